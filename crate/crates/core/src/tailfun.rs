//! Tail functions `t -> P(|tau| >= t)`: the parametric catalog, empirical
//! estimates, tabulated curves and the weak-L^q quasi-norm.
//!
//! Every tail can be evaluated in log-log form through
//! [`TailFunction::ln_eval_at_log`], which is what the moment integrals and
//! Fenchel bounds use so that very light or very far tails never underflow.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use statrs::function::erf::{erfc, erfc_inv};

use crate::descriptor::TailDescriptor;
use crate::error::{GlsError, Result};
use crate::grid::{argmax, golden_max, lin_space, log_space};

/// Lower end of the log grids used for suprema over `t`.
pub const T_GRID_MIN: f64 = 1e-3;
/// Upper end of the log grids used for suprema over `t`.
pub const T_GRID_MAX: f64 = 1e9;

/// Survival curve of a non-negative variable.
pub trait TailFunction: Send + Sync + fmt::Debug {
    /// `P(|tau| >= t)` for `t >= 0`.
    fn eval(&self, t: f64) -> f64;

    /// `ln T(e^s)`. Overridden by the catalog so that far tails stay finite in log form.
    fn ln_eval_at_log(&self, s: f64) -> f64 {
        self.eval(s.exp()).ln()
    }

    /// A `t` beyond which the tail is numerically zero.
    fn support_hint(&self) -> Option<f64> {
        None
    }

    /// Points where the curve has a jump or kink.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Generalized inverse `sup { t : T(t) >= u }` for `u` in `(0, 1]`.
    fn quantile(&self, u: f64) -> f64 {
        bisect_quantile(self, u)
    }

    /// `ln E|tau|^p` when it is available without quadrature (step curves).
    fn ln_moment_override(&self, _p: f64) -> Option<f64> {
        None
    }

    fn describe(&self) -> String;

    fn descriptor(&self) -> Option<TailDescriptor> {
        None
    }
}

pub type SharedTail = Arc<dyn TailFunction>;

/// Monotone bisection for `inf {x : T(x) < u}`, absolute tolerance 1e-12.
pub fn bisect_quantile<T: TailFunction + ?Sized>(tail: &T, u: f64) -> f64 {
    if !(u > 0.0) {
        return f64::INFINITY;
    }
    if tail.eval(0.0) < u {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut guard = 0;
    while tail.eval(hi) >= u {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 1100 {
            return f64::INFINITY;
        }
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail.eval(mid) >= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // a jump inside the final bracket is the exact answer
    tail.breakpoints()
        .into_iter()
        .find(|&b| b >= lo && b <= hi && tail.eval(b) < u)
        .unwrap_or(hi)
}

/// `ln(ln(1 + e^s))`, stable for large `s`.
fn ln_softplus_ln(s: f64) -> f64 {
    let sp = if s > 30.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
    sp.ln()
}

/// Slowly varying factor `L` on `[1, inf)`.
#[derive(Clone)]
pub struct SlowlyVarying {
    kind: SvKind,
}

#[derive(Clone)]
enum SvKind {
    /// `L(p) = (ln(p + 1))^r`.
    LogPower(f64),
    Custom {
        label: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for SlowlyVarying {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SlowlyVarying({})", self.description())
    }
}

impl SlowlyVarying {
    /// `L == 1`.
    pub fn one() -> Self {
        Self::log_power(0.0)
    }

    /// `L(p) = (ln(p + 1))^r`.
    pub fn log_power(r: f64) -> Self {
        Self {
            kind: SvKind::LogPower(r),
        }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(label: &str, f: F) -> Self {
        Self {
            kind: SvKind::Custom {
                label: label.to_string(),
                f: Arc::new(f),
            },
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self.kind, SvKind::LogPower(r) if r == 0.0)
    }

    pub fn log_power_exponent(&self) -> Option<f64> {
        match self.kind {
            SvKind::LogPower(r) => Some(r),
            SvKind::Custom { .. } => None,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match &self.kind {
            SvKind::LogPower(r) => {
                if *r == 0.0 {
                    1.0
                } else {
                    p.ln_1p().powf(*r)
                }
            }
            SvKind::Custom { f, .. } => f(p),
        }
    }

    pub fn ln_eval(&self, p: f64) -> f64 {
        match &self.kind {
            SvKind::LogPower(r) => {
                if *r == 0.0 {
                    0.0
                } else {
                    r * p.ln_1p().ln()
                }
            }
            SvKind::Custom { f, .. } => f(p).ln(),
        }
    }

    /// `ln L(e^s)`.
    pub fn ln_eval_at_log(&self, s: f64) -> f64 {
        match &self.kind {
            SvKind::LogPower(r) => {
                if *r == 0.0 {
                    0.0
                } else {
                    r * ln_softplus_ln(s)
                }
            }
            SvKind::Custom { f, .. } => f(s.exp()).ln(),
        }
    }

    pub fn description(&self) -> String {
        match &self.kind {
            SvKind::LogPower(r) if *r == 0.0 => "1".to_string(),
            SvKind::LogPower(r) => format!("(ln(p+1))^{r}"),
            SvKind::Custom { label, .. } => label.clone(),
        }
    }

    /// Numerical check of `sup_{p >= 1} L(p^theta) / L(p) < cap` for
    /// `theta` in {0.5, 2, 10}, on a log grid of `[1, 1e6]`.
    pub fn theta_condition(&self, cap: f64) -> bool {
        let grid = log_space(1.0, 1e6, 400);
        [0.5_f64, 2.0, 10.0].iter().all(|&theta| {
            grid.iter().all(|&p| {
                let ratio = (self.ln_eval_at_log(theta * p.ln()) - self.ln_eval(p)).exp();
                ratio.is_finite() && ratio <= cap
            })
        })
    }
}

/// `T(t) = min(1, t^-beta (ln t)^gamma L(ln t))` for `t >= e`, and 1 below `e`.
#[derive(Debug, Clone)]
pub struct PowerLogTail {
    pub beta: f64,
    pub gamma: f64,
    pub l: SlowlyVarying,
}

impl PowerLogTail {
    pub fn new(beta: f64, gamma: f64, l: SlowlyVarying) -> Result<Self> {
        if !(beta > 1.0) || !(gamma > -1.0) {
            return Err(GlsError::InvalidArgument(format!(
                "power-log tail needs beta > 1 and gamma > -1, got beta = {beta}, gamma = {gamma}"
            )));
        }
        let tail = Self { beta, gamma, l };
        require_monotone(&tail)?;
        Ok(tail)
    }
}

impl TailFunction for PowerLogTail {
    fn eval(&self, t: f64) -> f64 {
        if t < std::f64::consts::E {
            return 1.0;
        }
        self.ln_eval_at_log(t.ln()).exp()
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        if s < 1.0 {
            return 0.0;
        }
        let v = -self.beta * s + self.gamma * s.ln() + self.l.ln_eval(s);
        v.min(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![std::f64::consts::E]
    }

    fn quantile(&self, u: f64) -> f64 {
        if self.gamma == 0.0 && self.l.is_one() {
            return u.powf(-1.0 / self.beta).max(std::f64::consts::E);
        }
        bisect_quantile(self, u)
    }

    fn describe(&self) -> String {
        format!(
            "power-log tail beta={} gamma={} L={}",
            self.beta,
            self.gamma,
            self.l.description()
        )
    }

    fn descriptor(&self) -> Option<TailDescriptor> {
        Some(TailDescriptor::PowerLog {
            beta: self.beta,
            gamma: self.gamma,
            r: self.l.log_power_exponent()?,
        })
    }
}

/// Rejects parameter sets whose log tail increases somewhere on `ln t in [1, 200]`.
fn require_monotone(tail: &dyn TailFunction) -> Result<()> {
    let mut prev = 0.0_f64;
    for s in lin_space(1.0, 200.0, 4000) {
        let v = tail.ln_eval_at_log(s);
        if v > prev + 1e-12 * prev.abs() {
            return Err(GlsError::InvalidArgument(format!(
                "{} increases near t = e^{s:.3}",
                tail.describe()
            )));
        }
        prev = v;
    }
    Ok(())
}

/// `T(u) = exp(-c u^m / L(u))` for `u >= e`, and 1 below `e`.
#[derive(Debug, Clone)]
pub struct WeibullLogTail {
    pub m: f64,
    pub c: f64,
    pub l: SlowlyVarying,
}

impl WeibullLogTail {
    pub fn new(m: f64, c: f64, l: SlowlyVarying) -> Result<Self> {
        if !(m > 1.0) || !(c > 0.0) {
            return Err(GlsError::InvalidArgument(format!(
                "Weibull-log tail needs m > 1 and c > 0, got m = {m}, c = {c}"
            )));
        }
        let tail = Self { m, c, l };
        require_monotone(&tail)?;
        Ok(tail)
    }
}

impl TailFunction for WeibullLogTail {
    fn eval(&self, t: f64) -> f64 {
        if t < std::f64::consts::E {
            return 1.0;
        }
        self.ln_eval_at_log(t.ln()).exp()
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        if s < 1.0 {
            return 0.0;
        }
        -(self.c.ln() + self.m * s - self.l.ln_eval_at_log(s)).exp()
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![std::f64::consts::E]
    }

    fn quantile(&self, u: f64) -> f64 {
        if self.l.is_one() {
            return (-u.ln() / self.c)
                .powf(1.0 / self.m)
                .max(std::f64::consts::E);
        }
        bisect_quantile(self, u)
    }

    fn describe(&self) -> String {
        format!(
            "Weibull-log tail m={} c={} L={}",
            self.m,
            self.c,
            self.l.description()
        )
    }

    fn descriptor(&self) -> Option<TailDescriptor> {
        Some(TailDescriptor::WeibullLog {
            m: self.m,
            c: self.c,
            r: self.l.log_power_exponent()?,
        })
    }
}

/// `T(t) = exp(-(t / scale)^q)` on all of `[0, inf)`; `q = 1` is the exponential tail.
#[derive(Debug, Clone, Copy)]
pub struct StretchedExpTail {
    pub q: f64,
    pub scale: f64,
}

impl StretchedExpTail {
    pub fn exponential(scale: f64) -> Self {
        Self { q: 1.0, scale }
    }
}

impl TailFunction for StretchedExpTail {
    fn eval(&self, t: f64) -> f64 {
        (-(t / self.scale).powf(self.q)).exp()
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        -(self.q * (s - self.scale.ln())).exp()
    }

    fn quantile(&self, u: f64) -> f64 {
        self.scale * (-u.ln()).powf(1.0 / self.q)
    }

    fn describe(&self) -> String {
        format!("stretched-exponential tail q={} scale={}", self.q, self.scale)
    }

    fn descriptor(&self) -> Option<TailDescriptor> {
        if self.q == 1.0 {
            return Some(TailDescriptor::Exponential { scale: self.scale });
        }
        Some(TailDescriptor::StretchedExp {
            q: self.q,
            scale: self.scale,
        })
    }
}

/// `T(t) = min(1, c t^-q)`.
#[derive(Debug, Clone, Copy)]
pub struct ParetoTail {
    pub c: f64,
    pub q: f64,
}

impl TailFunction for ParetoTail {
    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (self.c * t.powf(-self.q)).min(1.0)
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        (self.c.ln() - self.q * s).min(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.c.powf(1.0 / self.q)]
    }

    fn quantile(&self, u: f64) -> f64 {
        (self.c / u).powf(1.0 / self.q)
    }

    fn describe(&self) -> String {
        format!("Pareto tail min(1, {} t^-{})", self.c, self.q)
    }

    fn descriptor(&self) -> Option<TailDescriptor> {
        Some(TailDescriptor::Pareto {
            c: self.c,
            q: self.q,
        })
    }
}

/// Tail of `|Z|`, `Z ~ N(0, sigma^2)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianAbsTail {
    pub sigma: f64,
}

fn ln_erfc(x: f64) -> f64 {
    if x < 25.0 {
        erfc(x).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2);
        -x2 - (x * std::f64::consts::PI.sqrt()).ln() + series.ln()
    }
}

impl TailFunction for GaussianAbsTail {
    fn eval(&self, t: f64) -> f64 {
        erfc(t / (self.sigma * std::f64::consts::SQRT_2))
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        ln_erfc((s - self.sigma.ln()).exp() / std::f64::consts::SQRT_2)
    }

    fn quantile(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        self.sigma * std::f64::consts::SQRT_2 * erfc_inv(u)
    }

    fn describe(&self) -> String {
        format!("|N(0, {}^2)| tail", self.sigma)
    }

    fn descriptor(&self) -> Option<TailDescriptor> {
        Some(TailDescriptor::Gaussian { sigma: self.sigma })
    }
}

/// Tail of a variable with `|tau| = bound`: 1 on `[0, bound)`, 0 from `bound` on.
#[derive(Debug, Clone, Copy)]
pub struct BoundedTail {
    pub bound: f64,
}

impl TailFunction for BoundedTail {
    fn eval(&self, t: f64) -> f64 {
        if t < self.bound {
            1.0
        } else {
            0.0
        }
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        if s < self.bound.ln() {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn support_hint(&self) -> Option<f64> {
        Some(self.bound)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.bound]
    }

    fn quantile(&self, _u: f64) -> f64 {
        self.bound
    }

    fn describe(&self) -> String {
        format!("bounded tail |tau| = {}", self.bound)
    }

    fn descriptor(&self) -> Option<TailDescriptor> {
        Some(TailDescriptor::Bounded { bound: self.bound })
    }
}

/// `t -> T(t / scale)`, the tail of `scale * tau`.
#[derive(Debug, Clone)]
pub struct ScaledTail {
    pub inner: SharedTail,
    pub scale: f64,
}

impl ScaledTail {
    pub fn new(inner: SharedTail, scale: f64) -> Self {
        Self { inner, scale }
    }
}

impl TailFunction for ScaledTail {
    fn eval(&self, t: f64) -> f64 {
        if self.scale == 0.0 {
            return if t <= 0.0 { 1.0 } else { 0.0 };
        }
        self.inner.eval(t / self.scale)
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        if self.scale == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.inner.ln_eval_at_log(s - self.scale.ln())
    }

    fn support_hint(&self) -> Option<f64> {
        self.inner.support_hint().map(|t| t * self.scale)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner
            .breakpoints()
            .into_iter()
            .map(|t| t * self.scale)
            .collect()
    }

    fn quantile(&self, u: f64) -> f64 {
        self.scale * self.inner.quantile(u)
    }

    fn ln_moment_override(&self, p: f64) -> Option<f64> {
        if self.scale == 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        self.inner
            .ln_moment_override(p)
            .map(|v| v + p * self.scale.ln())
    }

    fn describe(&self) -> String {
        format!("{} scaled by {}", self.inner.describe(), self.scale)
    }

    fn descriptor(&self) -> Option<TailDescriptor> {
        Some(TailDescriptor::Scaled {
            inner: Box::new(self.inner.descriptor()?),
            scale: self.scale,
        })
    }
}

/// Pointwise supremum of several tails (the uniform tail of a field).
#[derive(Debug, Clone)]
pub struct SupTail {
    pub parts: Vec<SharedTail>,
}

impl TailFunction for SupTail {
    fn eval(&self, t: f64) -> f64 {
        self.parts.iter().map(|p| p.eval(t)).fold(0.0, f64::max)
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| p.ln_eval_at_log(s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn support_hint(&self) -> Option<f64> {
        let hints: Option<Vec<f64>> = self.parts.iter().map(|p| p.support_hint()).collect();
        hints.map(|h| h.into_iter().fold(0.0, f64::max))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.parts.iter().flat_map(|p| p.breakpoints()).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    fn describe(&self) -> String {
        format!("sup of {} tails", self.parts.len())
    }
}

/// An arbitrary user-supplied curve; no invariants are assumed.
#[derive(Clone)]
pub struct CurveTail {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CurveTail {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(label: &str, f: F) -> Self {
        Self {
            label: label.to_string(),
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for CurveTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CurveTail({})", self.label)
    }
}

impl TailFunction for CurveTail {
    fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Tail known on a grid, interpolated linearly in `(ln t, ln T)`.
///
/// Below the first node the first value is used; past the last node the
/// final log-log segment is extrapolated when it decreases, otherwise 0.
#[derive(Debug, Clone)]
pub struct TabulatedTail {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl TabulatedTail {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(GlsError::InvalidArgument(
                "a tabulated tail needs at least two points".into(),
            ));
        }
        let mut points = points;
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.iter().any(|(t, v)| !(*t > 0.0) || !(0.0..=1.0).contains(v)) {
            return Err(GlsError::InvalidArgument(
                "tabulated tail needs t > 0 and values in [0, 1]".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].1 > w[0].1 + 1e-12) {
            return Err(GlsError::InvalidArgument("tabulated tail must be non-increasing".into()));
        }
        let (t, v) = points.into_iter().unzip();
        Ok(Self { t, v })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.v.iter().copied())
    }
}

impl TailFunction for TabulatedTail {
    fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.v[0];
        }
        let j = self.t.partition_point(|x| *x < t);
        if j < n && self.t[j] == t {
            return self.v[j];
        }
        let (i0, i1) = if j >= n { (n - 2, n - 1) } else { (j - 1, j) };
        let (t0, t1, v0, v1) = (self.t[i0], self.t[i1], self.v[i0], self.v[i1]);
        if j >= n && !(v1 > 0.0 && v1 < v0) {
            return 0.0;
        }
        if v0 <= 0.0 || v1 <= 0.0 {
            let w = (t - t0) / (t1 - t0);
            return v0 + w * (v1 - v0);
        }
        let w = (t.ln() - t0.ln()) / (t1.ln() - t0.ln());
        (v0.ln() + w * (v1.ln() - v0.ln())).exp().min(1.0)
    }

    fn describe(&self) -> String {
        format!("tabulated tail ({} nodes)", self.t.len())
    }
}

/// Right-continuous empirical survival function of `|x_i|` with a DKW band.
#[derive(Debug, Clone)]
pub struct EmpiricalTail {
    sorted_abs_samples: Vec<f64>,
    band_epsilon: f64,
    confidence: f64,
}

/// Smallest sample size accepted by [`empirical_tail`].
pub const MIN_EMPIRICAL_SAMPLES: usize = 100;

/// DKW half-width `sqrt(ln(2 / alpha) / (2 n))` at confidence `1 - alpha`.
pub fn dkw_epsilon(n: usize, confidence: f64) -> f64 {
    let alpha = 1.0 - confidence;
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Builds the empirical tail of `|samples|` with a DKW band at `confidence`.
pub fn empirical_tail(samples: &[f64], confidence: f64) -> Result<EmpiricalTail> {
    if samples.len() < MIN_EMPIRICAL_SAMPLES {
        return Err(GlsError::InvalidArgument(format!(
            "empirical tail needs at least {MIN_EMPIRICAL_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(GlsError::InvalidArgument(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(GlsError::InvalidArgument("non-finite sample".into()));
    }
    let mut sorted: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(EmpiricalTail {
        band_epsilon: dkw_epsilon(sorted.len(), confidence),
        sorted_abs_samples: sorted,
        confidence,
    })
}

impl EmpiricalTail {
    pub fn n(&self) -> usize {
        self.sorted_abs_samples.len()
    }

    pub fn band_epsilon(&self) -> f64 {
        self.band_epsilon
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn sorted_abs_samples(&self) -> &[f64] {
        &self.sorted_abs_samples
    }

    pub fn max_sample(&self) -> f64 {
        *self.sorted_abs_samples.last().expect("non-empty by construction")
    }

    /// Number of samples with `|x| >= t`.
    pub fn count_at_least(&self, t: f64) -> usize {
        self.n() - self.sorted_abs_samples.partition_point(|x| *x < t)
    }

    /// Number of samples with `|x| > t`.
    pub fn count_above(&self, t: f64) -> usize {
        self.n() - self.sorted_abs_samples.partition_point(|x| *x <= t)
    }

    /// Sample `E|x|^p` in log form.
    pub fn ln_abs_moment(&self, p: f64) -> f64 {
        let logs: Vec<f64> = self
            .sorted_abs_samples
            .iter()
            .filter(|x| **x > 0.0)
            .map(|x| p * x.ln())
            .collect();
        if logs.is_empty() {
            return f64::NEG_INFINITY;
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = logs.iter().map(|v| (v - m).exp()).sum();
        m + s.ln() - (self.n() as f64).ln()
    }
}

impl TailFunction for EmpiricalTail {
    fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        self.count_above(t) as f64 / self.n() as f64
    }

    fn support_hint(&self) -> Option<f64> {
        Some(self.max_sample())
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.n();
        let k = ((u * n as f64).ceil() as usize).clamp(1, n);
        self.sorted_abs_samples[n - k]
    }

    fn ln_moment_override(&self, p: f64) -> Option<f64> {
        Some(self.ln_abs_moment(p))
    }

    fn describe(&self) -> String {
        format!(
            "empirical tail n={} band={:.3e}",
            self.n(),
            self.band_epsilon
        )
    }
}

/// `sup_t (t^q T(t))^{1/q}` over a log grid of `[1e-3, 1e9]` (100 points per
/// decade), refined by golden section near the maximizer. The grid is
/// extended by two decades twice when the maximum sits on the right edge.
pub fn weak_lorentz_norm(tail: &dyn TailFunction, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(GlsError::InvalidArgument(format!("weak-L^q needs q > 1, got {q}")));
    }
    let objective = |ln_t: f64| ln_t + tail.ln_eval_at_log(ln_t) / q;
    let mut lo = T_GRID_MIN.ln();
    let mut hi = T_GRID_MAX.ln();
    let mut grid: Vec<f64> = log_space(T_GRID_MIN, T_GRID_MAX, 1201)
        .into_iter()
        .map(f64::ln)
        .collect();
    let mut values: Vec<f64> = grid.iter().map(|&s| objective(s)).collect();
    let step = (hi - lo) / 1200.0;
    for extension in 0..=2 {
        let i = argmax(&values).ok_or_else(|| {
            GlsError::InvalidArgument("tail is identically zero on the grid".into())
        })?;
        if i + 1 < values.len() {
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(grid.len() - 1)];
            let (_, v) = golden_max(objective, a, b, 1e-10);
            return Ok(v.max(values[i]).exp());
        }
        if extension == 2 {
            break;
        }
        // right edge: extend by two decades
        let prev_best = values[i];
        lo = hi;
        hi += 2.0 * std::f64::consts::LN_10;
        let n_ext = ((hi - lo) / step).round() as usize;
        for k in 1..=n_ext {
            let s = lo + step * k as f64;
            grid.push(s);
            values.push(objective(s));
        }
        let new_best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if new_best <= prev_best + 1e-12 * prev_best.abs().max(1.0) {
            return Ok(prev_best.exp());
        }
    }
    Err(GlsError::Divergence(format!(
        "(t^{q} T(t))^(1/{q}) still grows at t = {:.3e}; the tail is not in weak-L^{q}",
        hi.exp()
    )))
}

/// True iff `eval(0) <= 1` and the curve is non-increasing on a log grid of
/// `grid_size` points over `[1e-3, 1e9]` (with `t = 0` prepended).
pub fn check_monotone_tail(tail: &dyn TailFunction, grid_size: usize) -> bool {
    let at_zero = tail.eval(0.0);
    if !(at_zero <= 1.0) || grid_size < 2 {
        return false;
    }
    let mut prev = at_zero;
    for t in log_space(T_GRID_MIN, T_GRID_MAX, grid_size) {
        let v = tail.eval(t);
        if v.is_nan() || v > prev + 1e-14 * prev.abs() {
            return false;
        }
        prev = v;
    }
    true
}

/// Writes `t,tail` rows in scientific notation.
pub fn write_tail_csv<W: Write>(out: W, points: &[(f64, f64)]) -> Result<()> {
    write_two_column_csv(out, ("t", "tail"), points)
}

pub(crate) fn write_two_column_csv<W: Write>(
    out: W,
    header: (&str, &str),
    points: &[(f64, f64)],
) -> Result<()> {
    let io = |e: csv::Error| GlsError::InvalidArgument(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record([header.0, header.1]).map_err(io)?;
    for (a, b) in points {
        w.write_record([format!("{a:.16e}"), format!("{b:.16e}")])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| GlsError::InvalidArgument(format!("csv flush failed: {e}")))?;
    Ok(())
}

pub(crate) fn read_two_column_csv<R: Read>(input: R, header: (&str, &str)) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_reader(input);
    let hdr = r
        .headers()
        .map_err(|e| GlsError::Parse(format!("csv header: {e}")))?
        .clone();
    if hdr.len() != 2 || &hdr[0] != header.0 || &hdr[1] != header.1 {
        return Err(GlsError::Parse(format!(
            "expected header `{},{}`, found `{}`",
            header.0,
            header.1,
            hdr.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| GlsError::Parse(format!("csv row {}: {e}", line + 2)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| GlsError::Parse(format!("csv row {}: {e}", line + 2)))
        };
        out.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(out)
}

/// Reads a `t,tail` CSV into a [`TabulatedTail`].
pub fn read_tail_csv<R: Read>(input: R) -> Result<TabulatedTail> {
    TabulatedTail::new(read_two_column_csv(input, ("t", "tail"))?)
}

/// Samples a tail on a log grid, for export.
pub fn tabulate(tail: &dyn TailFunction, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter().map(|&t| (t, tail.eval(t))).collect()
}

/// The six catalog tails used throughout the tests and the demo runs.
pub fn catalog() -> Vec<(&'static str, SharedTail)> {
    vec![
        ("exponential", Arc::new(StretchedExpTail::exponential(1.0)) as SharedTail),
        ("gaussian", Arc::new(GaussianAbsTail { sigma: 1.0 })),
        (
            "weibull-m2",
            Arc::new(WeibullLogTail::new(2.0, 1.0, SlowlyVarying::one()).expect("valid")),
        ),
        (
            "weibull-log-m1.5",
            Arc::new(WeibullLogTail::new(1.5, 1.0, SlowlyVarying::log_power(1.0)).expect("valid")),
        ),
        (
            "power-b3",
            Arc::new(PowerLogTail::new(3.0, 0.0, SlowlyVarying::one()).expect("valid")),
        ),
        (
            "power-log-b2.5",
            Arc::new(PowerLogTail::new(2.5, 1.0, SlowlyVarying::log_power(0.5)).expect("valid")),
        ),
    ]
}
