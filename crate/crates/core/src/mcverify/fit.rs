//! Shape fits for tail curves.

use statrs::function::gamma::gamma_ur;

use crate::error::{GlsError, Result};
use crate::grid::{golden_max, log_space, ols};
use crate::tailfun::{EmpiricalTail, TailFunction};

/// OLS slope of `ln(-ln T(t))` against `ln t` on `n` log-spaced points.
pub fn log_log_slope(tail: &dyn TailFunction, t_lo: f64, t_hi: f64, n: usize) -> Result<f64> {
    let ts = log_space(t_lo, t_hi, n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for t in ts {
        let l = -tail.ln_eval_at_log(t.ln());
        if !(l > 0.0) || !l.is_finite() {
            return Err(GlsError::InvalidArgument(format!(
                "tail is not in (0, 1) at t = {t:.4e}"
            )));
        }
        x.push(t.ln());
        y.push(l.ln());
    }
    Ok(ols(&x, &y).0)
}

/// Exponent `gamma` in `T(e^u) ~ c e^(-beta u) u^gamma`: OLS slope of
/// `ln T(e^u) + beta u` against `ln u` for `u` in `[u_lo, u_hi]`.
pub fn log_power_exponent(tail: &dyn TailFunction, beta: f64, u_lo: f64, u_hi: f64, n: usize) -> Result<f64> {
    let us = log_space(u_lo, u_hi, n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for u in us {
        let l = tail.ln_eval_at_log(u);
        if !l.is_finite() {
            return Err(GlsError::InvalidArgument(format!("tail vanishes at ln t = {u}")));
        }
        x.push(u.ln());
        y.push(l + beta * u);
    }
    Ok(ols(&x, &y).0)
}

/// Generalized-normal fit of an empirical two-sided tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedNormalFit {
    /// Shape `k` in `P(|X| > t) = Gamma(1/k, (t/s)^k) / Gamma(1/k)`; 2 is Gaussian.
    pub shape: f64,
    pub scale: f64,
    pub points: usize,
}

fn ln_gn_tail(t: f64, k: f64, s: f64) -> f64 {
    gamma_ur(1.0 / k, (t / s).powf(k)).ln()
}

/// Fits `(shape, scale)` by count-weighted least squares on the log tail,
/// over 60 log-spaced points from `t_lo` to the largest `t` with at least
/// `min_count` exceedances.
pub fn fit_generalized_normal(emp: &EmpiricalTail, t_lo: f64, min_count: usize) -> Result<GeneralizedNormalFit> {
    let sorted = emp.sorted_abs_samples();
    let n = sorted.len();
    if min_count == 0 || min_count >= n {
        return Err(GlsError::InvalidArgument("min_count must lie in [1, n)".into()));
    }
    let t_hi = sorted[n - min_count];
    if !(t_hi > t_lo && t_lo > 0.0) {
        return Err(GlsError::InsufficientRange(format!(
            "no sample range above t = {t_lo:.4e} with {min_count} exceedances"
        )));
    }
    let pts: Vec<(f64, f64, f64)> = log_space(t_lo, t_hi, 60)
        .into_iter()
        .map(|t| {
            let c = emp.count_at_least(t) as f64;
            (t, (c / n as f64).ln(), c)
        })
        .collect();
    let loss = |k: f64, s: f64| -> f64 {
        pts.iter()
            .map(|(t, y, w)| {
                let r = y - ln_gn_tail(*t, k, s);
                if r.is_finite() {
                    w * r * r
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    };
    let scale_for = |k: f64| -> (f64, f64) {
        let (ls, v) = golden_max(|ls: f64| -loss(k, ls.exp()), (t_lo * 0.01).ln(), (t_hi * 10.0).ln(), 1e-10);
        (ls.exp(), -v)
    };
    let (k, _) = golden_max(|k| -scale_for(k).1, 0.5, 8.0, 1e-8);
    Ok(GeneralizedNormalFit {
        shape: k,
        scale: scale_for(k).0,
        points: pts.len(),
    })
}
