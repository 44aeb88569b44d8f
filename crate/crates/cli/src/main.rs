//! `gls`: tail bounds for averaged random variables from the command line.
//!
//! Exit status: 0 ok, 2 parse error, 3 precondition violation,
//! 4 numeric divergence, 5 verification failure.

mod commands;
mod config;
mod demo;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{Effective, GlobalOpts};

#[derive(Debug, Parser)]
#[command(name = "gls", version, about = "Grand Lebesgue space tail bounds for averages")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Natural generating function psi(p) = ||tau||_p of a tail.
    Natural {
        /// Tail descriptor: `family:k=v,...`, JSON, or `@file`.
        #[arg(long)]
        tail: String,
        /// Upper end of the exported p-grid when all moments exist.
        #[arg(long, default_value_t = 100.0)]
        p_max: f64,
    },
    /// Run a bound pipeline and write a report with its curve.
    Bound {
        #[command(subcommand)]
        pipeline: BoundCmd,
    },
    /// Doob or Burkholder transform of a generating function.
    Transform {
        kind: TransformKind,
        /// Generating-function descriptor, e.g. `psiML:m=2`.
        #[arg(long)]
        psi: String,
        #[arg(long, default_value_t = 100.0)]
        p_max: f64,
        /// Evaluate at these p instead of a log grid.
        #[arg(long, value_delimiter = ',')]
        at: Vec<f64>,
    },
    /// Simulate and write sample and tail CSVs.
    Simulate {
        #[command(subcommand)]
        what: SimCmd,
    },
    /// Check a bound report against simulated samples.
    Verify {
        #[arg(long)]
        report: PathBuf,
        /// Samples CSV written by `simulate`.
        #[arg(long)]
        sim: PathBuf,
        /// Column of the samples CSV to use.
        #[arg(long, default_value = "value")]
        column: String,
    },
    /// Built-in reproductions of the worked examples.
    Demo {
        example: DemoName,
        /// Singularity exponent for example-3.3.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "pipeline")]
pub enum BoundCmd {
    /// Average of a field whose marginals are dominated by one tail Q.
    Average {
        #[arg(long)]
        tail: String,
    },
    /// Conditional expectation of a variable with tail R.
    Conditional {
        #[arg(long)]
        tail: String,
    },
    /// Weak-type bound C(q) t^-q for marginals in the weak-L^q unit ball.
    Weak {
        #[arg(long)]
        tail: String,
        #[arg(long)]
        q: f64,
    },
    /// Fields with marginal bounds exp(-h*(ln(t/theta(x)))).
    Scaled {
        #[arg(long)]
        psi: String,
        /// `constant:value=V` or `linear:a=A,b=B`.
        #[arg(long, default_value = "constant:value=1")]
        theta: String,
    },
    /// exp(-h*(ln(t/norm))) for a given generating function and norm.
    FromPsi {
        #[arg(long)]
        psi: String,
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
    },
    /// Martingale term, maximum or normalized maximum.
    Martingale {
        #[arg(long)]
        tail: String,
        #[arg(long)]
        which: Statistic,
        #[arg(long, default_value = "uniformly-integrable")]
        kind: MartingaleKindArg,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "target")]
pub enum SimCmd {
    /// Spatial averages of a field with identical marginals.
    Field {
        #[arg(long)]
        tail: String,
        #[arg(long, default_value = "independent")]
        model: ModelArg,
        #[arg(long, default_value_t = 0.2)]
        correlation_length: f64,
    },
    /// Conditional expectation on an equal-cell partition of (0, 1).
    Conditional {
        /// Use eta = omega^(-alpha).
        #[arg(long, conflicts_with = "tail")]
        alpha: Option<f64>,
        /// Use eta = Q^{-1}(omega) for this tail.
        #[arg(long)]
        tail: Option<String>,
        #[arg(long, default_value_t = 2)]
        cells: usize,
    },
    /// Martingale paths.
    Martingale {
        #[arg(long, conflicts_with = "terminal")]
        increments: Option<LawArg>,
        #[arg(long, default_value_t = 256)]
        horizon: usize,
        /// `power:alpha=A` or `sine`, conditioned on dyadic partitions 1..=levels.
        #[arg(long)]
        terminal: Option<String>,
        #[arg(long, default_value_t = 10)]
        levels: u32,
    },
    /// Normalized sums of symmetric variables with tail exp(-y^q).
    Sums {
        #[arg(long, default_value_t = 3.0)]
        q: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,16,1024")]
        n: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Doob,
    Burkholder,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Term,
    Maximum,
    NormalizedMax,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartingaleKindArg {
    UniformlyIntegrable,
    IncrementBuilt,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Independent,
    CommonFactor,
    GaussianCopula,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawArg {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum DemoName {
    #[value(name = "example-2.1")]
    #[serde(rename = "example-2.1")]
    Example21,
    #[value(name = "example-2.2")]
    #[serde(rename = "example-2.2")]
    Example22,
    #[value(name = "example-2.3")]
    #[serde(rename = "example-2.3")]
    Example23,
    #[value(name = "example-3.1")]
    #[serde(rename = "example-3.1")]
    Example31,
    #[value(name = "example-3.2")]
    #[serde(rename = "example-3.2")]
    Example32,
    #[value(name = "example-3.3")]
    #[serde(rename = "example-3.3")]
    Example33,
    #[value(name = "all")]
    #[serde(rename = "all")]
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Effective::resolve(&cli.global).and_then(|eff| commands::run(&cli.command, &eff));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gls: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
