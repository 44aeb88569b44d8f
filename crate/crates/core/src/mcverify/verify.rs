//! Empirical checks of bound reports and moment inequalities.

use serde::{Deserialize, Serialize};

use super::sim::MartingaleSimulation;
use crate::averaging::BoundReport;
use crate::error::{GlsError, Result};
use crate::glspace::GeneratingFunction;
use crate::tailfun::{EmpiricalTail, TailFunction};

/// Smallest number of grid points a domination check accepts.
pub const MIN_CHECK_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// `max_t (emp(t) - band - bound(t))`; positive on failure.
    pub worst_margin: f64,
    pub worst_t: f64,
    pub checked_points: usize,
    pub band_epsilon: f64,
    pub confidence: f64,
    pub n_samples: usize,
}

/// PASS iff `emp(t) - band <= bound(t)` on every table point `t >= validity_from`
/// within the sample range.
pub fn verify_domination(emp: &EmpiricalTail, report: &BoundReport) -> Result<Verdict> {
    let lo = report.validity_from();
    let hi = emp.max_sample();
    let eps = emp.band_epsilon();
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    let mut checked = 0;
    for &(t, b) in report.table() {
        if t < lo || t > hi {
            continue;
        }
        checked += 1;
        let margin = emp.eval(t) - eps - b;
        if margin > worst.0 {
            worst = (margin, t);
        }
    }
    if checked < MIN_CHECK_POINTS {
        return Err(GlsError::InsufficientRange(format!(
            "only {checked} grid points lie in [{lo:.4e}, {hi:.4e}]"
        )));
    }
    Ok(Verdict {
        pass: worst.0 <= 0.0,
        worst_margin: worst.0,
        worst_t: worst.1,
        checked_points: checked,
        band_epsilon: eps,
        confidence: emp.confidence(),
        n_samples: emp.n(),
    })
}

/// Sample mean and standard error of `x`.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Relative standard error of `lhs`.
    pub rel_se: f64,
    pub pass: bool,
}

/// `E (max_k |kappa_k|)^p <= (p/(p-1))^p E|kappa_n|^p (1 + 3 SE)`.
pub fn doob_check(sim: &MartingaleSimulation, p: f64) -> MomentCheck {
    let lhs_v: Vec<f64> = sim.running_max.iter().map(|m| m.powf(p)).collect();
    let rhs_v: Vec<f64> = sim.terminal.iter().map(|k| k.abs().powf(p)).collect();
    let (lhs, se) = mean_and_se(&lhs_v);
    let (rhs_mean, _) = mean_and_se(&rhs_v);
    let rhs = (p / (p - 1.0)).powf(p) * rhs_mean;
    let rel_se = se / lhs;
    MomentCheck {
        p,
        lhs,
        rhs,
        rel_se,
        pass: lhs <= rhs * (1.0 + 3.0 * rel_se),
    }
}

/// `|| max_k |kappa_k| / sigma_n ||_p <= p upsilon(p)` with `upsilon_hat = p upsilon`.
pub fn burkholder_check(sim: &MartingaleSimulation, p: f64, upsilon_hat: &GeneratingFunction) -> Result<MomentCheck> {
    let sigma = sim.sigma_n();
    let v: Vec<f64> = sim.running_max.iter().map(|m| (m / sigma).powf(p)).collect();
    let (m, se) = mean_and_se(&v);
    let lhs = m.powf(1.0 / p);
    // delta method: relative SE of the p-th root
    let rel_se = se / m / p;
    let rhs = upsilon_hat.try_eval(p)?;
    Ok(MomentCheck {
        p,
        lhs,
        rhs,
        rel_se,
        pass: lhs <= rhs * (1.0 + 3.0 * rel_se),
    })
}

/// Sample `E|x|^p`.
pub fn sample_abs_moment(x: &[f64], p: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(p)).sum::<f64>() / x.len() as f64
}

/// Checks whether an empirical tail respects `eval(t) <= tail(t) + band` on a set of points.
pub fn within_band(emp: &EmpiricalTail, tail: &dyn TailFunction, ts: &[f64]) -> bool {
    ts.iter()
        .all(|&t| (emp.eval(t) - tail.eval(t)).abs() <= emp.band_epsilon())
}
