//! Seeded Monte Carlo simulators and empirical verification of bound reports.

pub mod fit;
pub mod rng;
pub mod sim;
pub mod verify;

pub use sim::{
    sample_moment_growth, simulate_conditional, simulate_field_average,
    simulate_field_average_samples, simulate_martingale, simulate_normalized_sums, BaseVariable,
    ConditionalSimulation, ConditionalSpec, Dependence, MartingaleSimulation, NormalizedSums,
    SimConfig,
};
pub use verify::{verify_domination, Verdict};
