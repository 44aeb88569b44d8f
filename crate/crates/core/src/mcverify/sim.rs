//! Simulators for field averages, conditional expectations on interval
//! partitions, martingales and normalized sums.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use super::rng::{chunked_map, open_unit, signed_open_unit, stream_rng, StreamRng};
use crate::averaging::{IncrementLaw, MartingaleKind, MartingaleSpec, RandomFieldSpec, TerminalFamily};
use crate::error::{GlsError, Result};
use crate::tailfun::{empirical_tail, EmpiricalTail, SharedTail};

pub const MIN_SIM_SAMPLES: usize = 10_000;
/// Smallest sample count a partition cell may receive.
pub const MIN_CELL_SAMPLES: usize = 100;
/// Number of leading martingale paths kept in full.
pub const KEPT_PATHS: usize = 16;

const TAG_FIELD: u64 = 1;
const TAG_CONDITIONAL: u64 = 2;
const TAG_MARTINGALE: u64 = 3;
const TAG_SUMS: u64 = 4;
const TAG_GROWTH: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Quadrature nodes of the index space; must match the simulated field.
    pub field_nodes: usize,
    pub confidence: f64,
}

impl SimConfig {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        Self {
            seed,
            n_samples,
            field_nodes: crate::averaging::DEFAULT_NODES,
            confidence: 0.95,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.field_nodes = nodes;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_SIM_SAMPLES {
            return Err(GlsError::InvalidArgument(format!(
                "n_samples must be at least {MIN_SIM_SAMPLES}, got {}",
                self.n_samples
            )));
        }
        if self.field_nodes < 2 {
            return Err(GlsError::InvalidArgument(format!(
                "field_nodes must be at least 2, got {}",
                self.field_nodes
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(GlsError::InvalidArgument(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Joint law of the field across nodes, given its marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Dependence {
    /// Independent across nodes.
    Independent,
    /// One uniform drives every node (comonotone); for a scaled field this is `theta(x) zeta`.
    CommonFactor,
    /// Gaussian copula with correlation `exp(-|x - y| / length)`.
    GaussianCopula { correlation_length: f64 },
}

fn sampler_error(what: &str, i: usize) -> GlsError {
    GlsError::Sampler(format!("{what} produced a non-finite value at sample {i}"))
}

/// Samples of `sum_i w_i xi(x_i)`, each `xi(x_i)` drawn by inverse transform from its marginal.
pub fn simulate_field_average_samples(
    cfg: &SimConfig,
    field: &RandomFieldSpec,
    dependence: Dependence,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (nodes, weights) = field.index_space().nodes_and_weights();
    if nodes.len() != cfg.field_nodes {
        return Err(GlsError::InvalidArgument(format!(
            "configuration has {} nodes but the field has {}",
            cfg.field_nodes,
            nodes.len()
        )));
    }
    if let Dependence::GaussianCopula { correlation_length } = dependence {
        if !(correlation_length > 0.0) {
            return Err(GlsError::InvalidArgument("correlation length must be positive".into()));
        }
    }
    let marginals = field.marginals();
    let draw = |rng: &mut StreamRng, _i: usize| -> f64 {
        match dependence {
            Dependence::Independent => marginals
                .iter()
                .zip(&weights)
                .map(|(m, w)| w * m.quantile(open_unit(rng)))
                .sum(),
            Dependence::CommonFactor => {
                let u = open_unit(rng);
                marginals.iter().zip(&weights).map(|(m, w)| w * m.quantile(u)).sum()
            }
            Dependence::GaussianCopula { correlation_length } => {
                let mut z: f64 = StandardNormal.sample(rng);
                let mut acc = 0.0;
                for (k, (m, w)) in marginals.iter().zip(&weights).enumerate() {
                    if k > 0 {
                        let r = (-(nodes[k] - nodes[k - 1]).abs() / correlation_length).exp();
                        let e: f64 = StandardNormal.sample(rng);
                        z = r * z + (1.0 - r * r).sqrt() * e;
                    }
                    let u = (0.5 * erfc(z / std::f64::consts::SQRT_2)).clamp(f64::MIN_POSITIVE, 1.0);
                    acc += w * m.quantile(u);
                }
                acc
            }
        }
    };
    let samples = chunked_map(cfg.seed, TAG_FIELD, cfg.n_samples, draw);
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(sampler_error("field sampler", i));
    }
    Ok(samples)
}

pub fn simulate_field_average(
    cfg: &SimConfig,
    field: &RandomFieldSpec,
    dependence: Dependence,
) -> Result<EmpiricalTail> {
    empirical_tail(&simulate_field_average_samples(cfg, field, dependence)?, cfg.confidence)
}

/// The variable `eta` on `((0, 1), Lebesgue)`.
#[derive(Debug, Clone)]
pub enum BaseVariable {
    Terminal(TerminalFamily),
    /// `eta(omega) = Q^{-1}(omega)`, whose absolute value has tail `Q`.
    Quantile(SharedTail),
}

impl BaseVariable {
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            BaseVariable::Terminal(f) => f.eval(omega),
            BaseVariable::Quantile(t) => t.quantile(omega),
        }
    }
}

/// `eta` together with the sigma-field generated by a partition of `(0, 1)` into intervals.
#[derive(Debug, Clone)]
pub struct ConditionalSpec {
    base: BaseVariable,
    cuts: Vec<f64>,
}

impl ConditionalSpec {
    /// `cuts` are the partition boundaries `0 = c_0 < c_1 < ... < c_k = 1`.
    pub fn new(base: BaseVariable, cuts: Vec<f64>) -> Result<Self> {
        let ok = cuts.len() >= 2
            && cuts[0] == 0.0
            && cuts[cuts.len() - 1] == 1.0
            && cuts.windows(2).all(|w| w[1] > w[0]);
        if !ok {
            return Err(GlsError::InvalidArgument(
                "partition boundaries must increase strictly from 0 to 1".into(),
            ));
        }
        Ok(Self { base, cuts })
    }

    /// `omega^(-alpha)` conditioned on the halves `(0, 1/2]`, `(1/2, 1)`.
    pub fn power_singularity_halves(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(GlsError::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Self::new(
            BaseVariable::Terminal(TerminalFamily::PowerSingularity { alpha }),
            vec![0.0, 0.5, 1.0],
        )
    }

    pub fn base(&self) -> &BaseVariable {
        &self.base
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    fn cell_of(&self, omega: f64) -> usize {
        // cells are (c_{j}, c_{j+1}]
        let j = self.cuts.partition_point(|c| *c < omega);
        j.saturating_sub(1).min(self.cuts.len() - 2)
    }

    /// Closed-form `E[eta | cell]` when the base variable has one.
    pub fn exact_cell_values(&self) -> Option<Vec<f64>> {
        match &self.base {
            BaseVariable::Terminal(f) => Some(self.cells().iter().map(|(a, b)| f.cell_mean(*a, *b)).collect()),
            BaseVariable::Quantile(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConditionalSimulation {
    pub eta: Vec<f64>,
    /// `E[eta | F]` evaluated with sample cell means.
    pub nu: Vec<f64>,
    pub cell_means: Vec<f64>,
    pub cell_counts: Vec<usize>,
    pub cell_std_errors: Vec<f64>,
    pub exact: Option<Vec<f64>>,
}

pub fn simulate_conditional(cfg: &SimConfig, spec: &ConditionalSpec) -> Result<ConditionalSimulation> {
    cfg.validate()?;
    let draws: Vec<(usize, f64)> = chunked_map(cfg.seed, TAG_CONDITIONAL, cfg.n_samples, |rng, _| {
        let omega = open_unit(rng);
        (spec.cell_of(omega), spec.base.eval(omega))
    });
    if let Some(i) = draws.iter().position(|(_, e)| !e.is_finite()) {
        return Err(sampler_error("base variable", i));
    }
    let k = spec.cuts.len() - 1;
    let mut count = vec![0usize; k];
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    for &(c, e) in &draws {
        count[c] += 1;
        sum[c] += e;
        sum_sq[c] += e * e;
    }
    if let Some(c) = count.iter().position(|n| *n < MIN_CELL_SAMPLES) {
        return Err(GlsError::EmptyCell { cell: c, count: count[c] });
    }
    let means: Vec<f64> = sum.iter().zip(&count).map(|(s, n)| s / *n as f64).collect();
    let std_errors = (0..k)
        .map(|c| {
            let n = count[c] as f64;
            let var = (sum_sq[c] - n * means[c] * means[c]) / (n - 1.0);
            (var.max(0.0) / n).sqrt()
        })
        .collect();
    Ok(ConditionalSimulation {
        nu: draws.iter().map(|(c, _)| means[*c]).collect(),
        eta: draws.into_iter().map(|(_, e)| e).collect(),
        cell_means: means,
        cell_counts: count,
        cell_std_errors: std_errors,
        exact: spec.exact_cell_values(),
    })
}

/// Mean over `replicates` of `ln(n^-1 sum_{i<=n} |eta_i|^p)` for each `n` in
/// `n_list`, using nested prefixes of one sample per replicate.
pub fn sample_moment_growth(
    base: &BaseVariable,
    p: f64,
    n_list: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(GlsError::InvalidArgument("sample sizes must be positive and increasing".into()));
    }
    if replicates == 0 {
        return Err(GlsError::InvalidArgument("at least one replicate is needed".into()));
    }
    let n_max = n_list[n_list.len() - 1];
    let per_rep: Vec<Vec<f64>> = chunked_map(seed, TAG_GROWTH, replicates, |_, r| {
        let mut rng = stream_rng(seed, super::rng::stream_id(TAG_GROWTH + 1, r as u64));
        let mut out = Vec::with_capacity(n_list.len());
        let mut acc = 0.0;
        let mut next = 0;
        for i in 1..=n_max {
            acc += base.eval(open_unit(&mut rng)).abs().powf(p);
            if i == n_list[next] {
                out.push((acc / i as f64).ln());
                next += 1;
            }
        }
        out
    });
    Ok((0..n_list.len())
        .map(|j| per_rep.iter().map(|v| v[j]).sum::<f64>() / replicates as f64)
        .collect())
}

#[derive(Debug, Clone)]
pub struct MartingaleSimulation {
    pub terminal: Vec<f64>,
    /// `max_{k <= n} |kappa_k|` per path.
    pub running_max: Vec<f64>,
    /// `[kappa]_n^2` per path.
    pub square_variation: Vec<f64>,
    pub sigma_profile: Vec<f64>,
    /// The first [`KEPT_PATHS`] paths in full.
    pub sample_paths: Vec<Vec<f64>>,
}

impl MartingaleSimulation {
    pub fn sigma_n(&self) -> f64 {
        *self.sigma_profile.last().expect("horizon is positive")
    }
}

fn martingale_path(spec: &MartingaleSpec, rng: &mut StreamRng) -> Vec<f64> {
    match &spec.kind {
        MartingaleKind::UniformlyIntegrable { terminal, levels } => {
            let omega = open_unit(rng);
            levels
                .iter()
                .map(|&l| {
                    let cells = (1u64 << l) as f64;
                    let c = (omega * cells).floor().min(cells - 1.0);
                    terminal.cell_mean(c / cells, (c + 1.0) / cells)
                })
                .collect()
        }
        MartingaleKind::IncrementBuilt { law, variances } => {
            let mut s = 0.0;
            variances
                .iter()
                .map(|v| {
                    let e = match law {
                        IncrementLaw::Gaussian => StandardNormal.sample(rng),
                        IncrementLaw::Rademacher => {
                            if rng.next_u32() >> 31 == 1 {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                    };
                    s += v.sqrt() * e;
                    s
                })
                .collect()
        }
    }
}

pub fn simulate_martingale(cfg: &SimConfig, spec: &MartingaleSpec) -> Result<MartingaleSimulation> {
    cfg.validate()?;
    let rows: Vec<(f64, f64, f64, Option<Vec<f64>>)> =
        chunked_map(cfg.seed, TAG_MARTINGALE, cfg.n_samples, |rng, i| {
            let path = martingale_path(spec, rng);
            let mut prev = 0.0;
            let mut qv = 0.0;
            let mut mx: f64 = 0.0;
            for &k in &path {
                qv += (k - prev) * (k - prev);
                mx = mx.max(k.abs());
                prev = k;
            }
            let keep = (i < KEPT_PATHS).then(|| path.clone());
            (prev, mx, qv, keep)
        });
    if let Some(i) = rows.iter().position(|r| !(r.0.is_finite() && r.2.is_finite())) {
        return Err(GlsError::Sampler(format!("non-finite increment on path {i}")));
    }
    let mut sim = MartingaleSimulation {
        terminal: Vec::with_capacity(rows.len()),
        running_max: Vec::with_capacity(rows.len()),
        square_variation: Vec::with_capacity(rows.len()),
        sigma_profile: spec.sigma_profile(),
        sample_paths: Vec::new(),
    };
    for (t, m, q, keep) in rows {
        sim.terminal.push(t);
        sim.running_max.push(m);
        sim.square_variation.push(q);
        if let Some(p) = keep {
            sim.sample_paths.push(p);
        }
    }
    Ok(sim)
}

#[derive(Debug, Clone)]
pub struct NormalizedSums {
    pub n: usize,
    /// Signed samples of `n^(-1/2) sum_{i<=n} zeta_i`.
    pub samples: Vec<f64>,
    pub tail: EmpiricalTail,
}

/// `E zeta^2 = 2 int_0^inf t exp(-t^q) dt = (2/q) Gamma(2/q)`.
pub fn normalized_source_variance(q: f64) -> f64 {
    2.0 / q * gamma(2.0 / q)
}

/// Normalized sums of symmetric `zeta` with `P(|zeta| > y) = exp(-y^q)`.
pub fn simulate_normalized_sums(q: f64, n_list: &[usize], cfg: &SimConfig) -> Result<Vec<NormalizedSums>> {
    cfg.validate()?;
    if !(q > 2.0) {
        return Err(GlsError::InvalidArgument(format!("q must exceed 2, got {q}")));
    }
    if n_list.iter().any(|n| *n == 0) {
        return Err(GlsError::InvalidArgument("summand counts must be positive".into()));
    }
    let inv_q = 1.0 / q;
    n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let scale = 1.0 / (n as f64).sqrt();
            let tag = (TAG_SUMS << 8) | j as u64;
            let samples = chunked_map(cfg.seed, tag, cfg.n_samples, |rng, _| {
                let mut s = 0.0;
                for _ in 0..n {
                    let (u, sign) = signed_open_unit(rng);
                    s += sign * (-u.ln()).powf(inv_q);
                }
                s * scale
            });
            let tail = empirical_tail(&samples, cfg.confidence)?;
            Ok(NormalizedSums { n, samples, tail })
        })
        .collect()
}
