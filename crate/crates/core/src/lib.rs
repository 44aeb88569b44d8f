//! Grand Lebesgue space calculus for tail bounds of averaged random
//! variables: tail functions, natural generating functions, Young-Fenchel
//! duals, averaging pipelines and a Monte Carlo verification harness.

pub mod averaging;
pub mod descriptor;
pub mod error;
pub mod fenchel;
pub mod glspace;
pub mod grid;
pub mod mcverify;
pub mod quad;
pub mod tailfun;

pub use error::{GlsError, Result};
