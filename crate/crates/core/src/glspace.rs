//! Generating functions `psi(p)`, natural functions of tails, moment profiles
//! and the GLS norm `sup_p ||tau||_p / psi(p)`.
//!
//! Moments are integrated in `s = ln t`:
//! `E|tau|^p = int p e^{p s} T(e^s) ds`, with the integrand handled as
//! `ln p + p s + ln T(e^s)` so that the peak can sit at any scale. Panels are
//! integrated around the peak outward, each rescaled by its own maximum and
//! accumulated with log-sum-exp.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::descriptor::PsiDescriptor;
use crate::error::{GlsError, Result};
use crate::grid::{argmax, golden_max, log_space, ols};
use crate::quad::{integrate, QuadConfig};
use crate::tailfun::{read_two_column_csv, write_two_column_csv, SharedTail, SlowlyVarying, TailFunction};

/// Largest order probed when deciding whether a tail has all moments.
pub const NATURAL_P_CAP: f64 = 1e4;

const SCAN_LO: f64 = -60.0;
const SCAN_HI: f64 = 64.0;
const SCAN_STEP: f64 = 0.25;
/// `ln(1e16)`: panels below this fraction of the running integral are dropped.
const NEGLIGIBLE: f64 = 36.8;
const HORIZONS: [f64; 3] = [1e4, 1e5, 1e6];
const S_FLOOR: f64 = -700.0;
const MAX_PANELS: usize = 20_000;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln int_a^b exp(f(s)) ds`, scaled by the largest of three samples.
fn log_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadConfig) -> f64 {
    let c = [f(a), f(0.5 * (a + b)), f(b)]
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if c == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let r = integrate(
        |s| {
            let v = f(s) - c;
            if v.is_nan() {
                0.0
            } else {
                v.exp()
            }
        },
        a.min(b),
        a.max(b),
        cfg,
    );
    if r.value > 0.0 {
        c + r.value.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Sweeps panels away from `start` in direction `dir` (+1 or -1) and returns
/// the log of the accumulated integral together with the final abscissa.
fn sweep<F: Fn(f64) -> f64>(
    f: &F,
    start: f64,
    dir: f64,
    breaks: &[f64],
    acc_in: f64,
    cfg: &QuadConfig,
) -> Result<(f64, f64)> {
    let mut acc = acc_in;
    let mut a = start;
    let mut w = 0.5_f64;
    let limit = start + dir * HORIZONS[HORIZONS.len() - 1];
    for _ in 0..MAX_PANELS {
        let fa = f(a);
        if fa == f64::NEG_INFINITY {
            return Ok((acc, a));
        }
        if dir < 0.0 && a <= S_FLOOR {
            return Ok((acc, a));
        }
        // never integrate across a jump or kink
        let snap = |b: f64| {
            let mut b = b;
            for &bp in breaks {
                if (bp - a) * dir > 1e-12 * (1.0 + a.abs()) && (b - bp) * dir > 0.0 {
                    b = bp;
                }
            }
            if dir < 0.0 { b.max(S_FLOOR) } else { b }
        };
        let mut b = snap(a + dir * w);
        let mut halvings = 0;
        loop {
            let fb = f(b);
            let at_break = breaks.contains(&b);
            let too_steep = fb.is_nan() || (fa - fb).abs() > 25.0;
            if too_steep && !(at_break && fb == f64::NEG_INFINITY) && halvings < 60 {
                w *= 0.5;
                b = snap(a + dir * w);
                halvings += 1;
            } else {
                break;
            }
        }
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            return Ok((acc, a));
        }
        let v = log_panel(f, a, b, cfg);
        acc = log_add(acc, v);
        let fb = f(b);
        let shrinking = fb < fa;
        if fb == f64::NEG_INFINITY
            || (shrinking && v < acc - NEGLIGIBLE && fb < acc - NEGLIGIBLE)
        {
            return Ok((acc, b));
        }
        if (fa - fb).abs() < 5.0 {
            w *= 2.0;
        }
        w = w.min(1.0_f64.max(b.abs() * 0.5));
        a = b;
        if (a - limit) * dir > 0.0 {
            break;
        }
    }
    Err(GlsError::Divergence(format!(
        "moment integral did not stabilize within |ln t| <= {:.0e}",
        HORIZONS[HORIZONS.len() - 1]
    )))
}

/// `ln E|tau|^p = ln (p int_0^inf t^{p-1} T(t) dt)` for `p >= 1`.
pub fn ln_abs_moment(tail: &dyn TailFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(GlsError::InvalidArgument(format!("moment order must be >= 1, got {p}")));
    }
    if let Some(v) = tail.ln_moment_override(p) {
        return Ok(v);
    }
    let cfg = QuadConfig::default();
    let lnp = p.ln();
    let f = |s: f64| lnp + p * s + tail.ln_eval_at_log(s);

    let n = ((SCAN_HI - SCAN_LO) / SCAN_STEP).round() as usize + 1;
    let scan: Vec<f64> = (0..n).map(|i| SCAN_LO + SCAN_STEP * i as f64).collect();
    let values: Vec<f64> = scan.iter().map(|&s| f(s)).collect();
    let Some(i) = argmax(&values) else {
        return Ok(f64::NEG_INFINITY);
    };
    let (peak, f_peak) = golden_max(&f, scan[i.saturating_sub(1)], scan[(i + 1).min(n - 1)], 1e-9);
    // exp(f - c) carries rounding noise of order eps * |f|
    let noise = 64.0 * f64::EPSILON * (p * peak.abs() + f_peak.abs());
    let cfg = QuadConfig {
        rel_tol: cfg.rel_tol.max(noise),
        ..cfg
    };

    let mut breaks: Vec<f64> = tail
        .breakpoints()
        .into_iter()
        .filter(|b| *b > 0.0 && b.is_finite())
        .map(f64::ln)
        .collect();
    breaks.sort_by(f64::total_cmp);
    let up_breaks: Vec<f64> = breaks.iter().copied().filter(|b| *b > peak).collect();
    let down_breaks: Vec<f64> = breaks.iter().rev().copied().filter(|b| *b < peak).collect();

    let (acc, _) = sweep(&f, peak, 1.0, &up_breaks, f64::NEG_INFINITY, &cfg)?;
    let (acc, s_lo) = sweep(&f, peak, -1.0, &down_breaks, acc, &cfg)?;

    // direct piece on [0, e^{s_lo}]: t0^p int_0^1 p x^{p-1} T(t0 x) dx <= t0^p
    if p * s_lo < acc - NEGLIGIBLE {
        return finish(acc, p);
    }
    let t0 = s_lo.exp();
    let head = integrate(
        |x| {
            if x <= 0.0 {
                0.0
            } else {
                (lnp + (p - 1.0) * x.ln() + tail.ln_eval_at_log(s_lo + x.ln())).exp()
            }
        },
        0.0,
        1.0,
        &cfg,
    );
    let acc = if head.value > 0.0 && t0 > 0.0 {
        log_add(acc, p * s_lo + head.value.ln())
    } else {
        acc
    };
    finish(acc, p)
}

fn finish(acc: f64, p: f64) -> Result<f64> {
    if acc.is_nan() || acc == f64::INFINITY {
        return Err(GlsError::Divergence(format!("moment of order {p} overflowed")));
    }
    Ok(acc)
}

/// `psi_tau(p) = (E|tau|^p)^{1/p}`.
pub fn natural_psi(tail: &dyn TailFunction, p: f64) -> Result<f64> {
    Ok((ln_abs_moment(tail, p)? / p).exp())
}

fn moment_converges(tail: &dyn TailFunction, p: f64) -> Result<bool> {
    match ln_abs_moment(tail, p) {
        Ok(v) => Ok(v.is_finite() || v == f64::NEG_INFINITY),
        Err(e) if e.is_divergence() => Ok(false),
        Err(e) => Err(e),
    }
}

/// Largest `p <= p_max` with a finite moment, to within 1e-6; `+inf` if the
/// moment of order `p_max` is finite. Returns 1 when no order above 1 converges.
pub fn natural_domain(tail: &dyn TailFunction, p_max: f64) -> Result<f64> {
    if !(p_max >= 2.0) {
        return Err(GlsError::InvalidArgument(format!("p_max must be >= 2, got {p_max}")));
    }
    let mut last_ok: Option<f64> = None;
    let mut first_bad: Option<f64> = None;
    for p in log_space(1.0, p_max, 32) {
        if moment_converges(tail, p)? {
            last_ok = Some(p);
        } else {
            first_bad = Some(p);
            break;
        }
    }
    let Some(mut hi) = first_bad else {
        return Ok(f64::INFINITY);
    };
    let Some(mut lo) = last_ok else {
        return Ok(1.0);
    };
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if moment_converges(tail, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

type LogMomentFn = dyn Fn(f64) -> Result<f64> + Send + Sync;

/// A generating function stored through `h(p) = p ln psi(p)` on `[1, b]`.
#[derive(Clone)]
pub struct GeneratingFunction {
    h: Arc<LogMomentFn>,
    domain_hi: f64,
    label: String,
    descriptor: Option<PsiDescriptor>,
}

impl fmt::Debug for GeneratingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratingFunction")
            .field("label", &self.label)
            .field("domain_hi", &self.domain_hi)
            .finish()
    }
}

impl GeneratingFunction {
    pub fn from_log_moment<F>(label: &str, domain_hi: f64, h: F) -> Self
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            h: Arc::new(h),
            domain_hi,
            label: label.to_string(),
            descriptor: None,
        }
    }

    pub fn from_psi<F>(label: &str, domain_hi: f64, psi: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_log_moment(label, domain_hi, move |p| Ok(p * psi(p).ln()))
    }

    /// `p^(1/m) L(p)` on `(1, inf)`.
    pub fn psi_ml(m: f64, l: SlowlyVarying) -> Result<Self> {
        if !(m > 1.0) {
            return Err(GlsError::InvalidArgument(format!("psiML needs m > 1, got {m}")));
        }
        let descriptor = l.log_power_exponent().map(|r| PsiDescriptor::PsiMl { m, r });
        let label = format!("p^(1/{m}) * {}", l.description());
        let mut g =
            Self::from_log_moment(&label, f64::INFINITY, move |p| Ok(p * (p.ln() / m + l.ln_eval(p))));
        g.descriptor = descriptor;
        Ok(g)
    }

    /// `sqrt(p)`, the subgaussian generating function.
    pub fn sqrt_p() -> Self {
        Self::psi_ml(2.0, SlowlyVarying::one()).expect("m = 2 is valid")
    }

    pub fn constant(value: f64, domain_hi: f64) -> Result<Self> {
        if !(value > 0.0) || !(domain_hi > 1.0) {
            return Err(GlsError::InvalidArgument(format!(
                "constant psi needs value > 0 and b > 1, got {value}, {domain_hi}"
            )));
        }
        let lv = value.ln();
        let mut g = Self::from_log_moment(&format!("{value}"), domain_hi, move |p| Ok(p * lv));
        g.descriptor = Some(PsiDescriptor::Constant {
            value,
            b: domain_hi.is_finite().then_some(domain_hi),
        });
        Ok(g)
    }

    /// The natural function of `tail`, with its domain found numerically.
    pub fn natural(tail: SharedTail) -> Result<Self> {
        let b = natural_domain(tail.as_ref(), NATURAL_P_CAP)?;
        if !(b > 1.0) {
            return Err(GlsError::Divergence(format!(
                "{} has no finite moment of order above 1",
                tail.describe()
            )));
        }
        let label = format!("natural function of {}", tail.describe());
        let descriptor = tail.descriptor().map(|t| PsiDescriptor::Natural { tail: t });
        let mut g = Self::from_log_moment(&label, b, move |p| ln_abs_moment(tail.as_ref(), p));
        g.descriptor = descriptor;
        Ok(g)
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn with_descriptor(mut self, d: Option<PsiDescriptor>) -> Self {
        self.descriptor = d;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_hi(&self) -> f64 {
        self.domain_hi
    }

    pub fn descriptor(&self) -> Option<&PsiDescriptor> {
        self.descriptor.as_ref()
    }

    /// `h(p) = p ln psi(p)` on `[1, b]` (the closed right end only matters when `h(b)` is finite).
    pub fn log_moment(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) || p > self.domain_hi {
            return Err(GlsError::InvalidArgument(format!(
                "p = {p} outside the domain [1, {}] of {}",
                self.domain_hi, self.label
            )));
        }
        let v = (self.h)(p)?;
        if v.is_nan() || v == f64::INFINITY {
            return Err(GlsError::Divergence(format!("{} is infinite at p = {p}", self.label)));
        }
        Ok(v)
    }

    pub fn try_eval(&self, p: f64) -> Result<f64> {
        Ok((self.log_moment(p)? / p).exp())
    }

    /// `psi(p)`, or `+inf` where the log-moment fails.
    pub fn eval(&self, p: f64) -> f64 {
        self.try_eval(p).unwrap_or(f64::INFINITY)
    }

    /// `p -> factor(p) * psi(p)` on the same domain.
    pub fn multiplied<F>(&self, label: &str, factor: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let inner = self.h.clone();
        Self::from_log_moment(label, self.domain_hi, move |p| Ok(inner(p)? + p * factor(p).ln()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.multiplied(&format!("{c} * ({})", self.label), move |_| c)
    }

    /// Positivity and finiteness on 200 interior grid points.
    pub fn validate(&self, floor: f64) -> Result<()> {
        for p in interior_grid(self.domain_hi.min(1e6), 200) {
            let v = self.try_eval(p)?;
            if !(v >= floor) || !v.is_finite() {
                return Err(GlsError::Hypothesis(format!(
                    "{} = {v} at p = {p} violates the floor {floor}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    pub fn tabulate(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter().map(|&p| (p, self.eval(p))).collect()
    }
}

/// `n` log-spaced points on `(1 + 1e-4, b (1 - 1e-4))`, or up to `1e6` when `b` is infinite.
pub fn interior_grid(b: f64, n: usize) -> Vec<f64> {
    let hi = if b.is_finite() { b * (1.0 - 1e-4) } else { 1e6 };
    log_space(1.0 + 1e-4, hi.max(1.0 + 2e-4), n)
}

/// Writes a `p,value` curve.
pub fn write_psi_csv<W: Write>(out: W, points: &[(f64, f64)]) -> Result<()> {
    write_two_column_csv(out, ("p", "value"), points)
}

#[derive(Clone)]
enum ProfileSource {
    Tail(SharedTail),
    Function(GeneratingFunction),
    Table,
}

/// `p -> ||tau||_p` on a grid, with lazy evaluation off-grid when the source is known.
#[derive(Clone)]
pub struct MomentProfile {
    source: ProfileSource,
    domain_hi: f64,
    p_grid: Vec<f64>,
    values: Vec<f64>,
}

impl fmt::Debug for MomentProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MomentProfile")
            .field("domain_hi", &self.domain_hi)
            .field("points", &self.p_grid.len())
            .finish()
    }
}

/// Moment profile of `tail` on `p_grid`; the domain is found by bisection.
pub fn moments_from_tail(tail: SharedTail, p_grid: &[f64]) -> Result<MomentProfile> {
    let values = p_grid
        .iter()
        .map(|&p| natural_psi(tail.as_ref(), p))
        .collect::<Result<Vec<_>>>()?;
    let domain_hi = natural_domain(tail.as_ref(), NATURAL_P_CAP)?;
    Ok(MomentProfile {
        source: ProfileSource::Tail(tail),
        domain_hi,
        p_grid: p_grid.to_vec(),
        values,
    })
}

impl MomentProfile {
    /// Profile evaluated on demand from `tail`, with a known domain.
    pub fn from_tail_lazy(tail: SharedTail, domain_hi: f64) -> Self {
        Self {
            source: ProfileSource::Tail(tail),
            domain_hi,
            p_grid: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_function(g: GeneratingFunction, p_grid: &[f64]) -> Result<Self> {
        let values = p_grid.iter().map(|&p| g.try_eval(p)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            domain_hi: g.domain_hi(),
            source: ProfileSource::Function(g),
            p_grid: p_grid.to_vec(),
            values,
        })
    }

    /// A tabulated profile, interpolated linearly in `(ln p, ln value)`.
    pub fn from_values(points: Vec<(f64, f64)>, domain_hi: f64) -> Result<Self> {
        if points.len() < 2 || points.iter().any(|(p, v)| !(*p >= 1.0) || !(*v > 0.0)) {
            return Err(GlsError::InvalidArgument(
                "moment table needs two or more rows with p >= 1 and positive values".into(),
            ));
        }
        let mut points = points;
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (p_grid, values) = points.into_iter().unzip();
        Ok(Self {
            source: ProfileSource::Table,
            domain_hi,
            p_grid,
            values,
        })
    }

    pub fn read_csv<R: Read>(input: R, domain_hi: f64) -> Result<Self> {
        Self::from_values(read_two_column_csv(input, ("p", "value"))?, domain_hi)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_psi_csv(out, &self.points().collect::<Vec<_>>())
    }

    pub fn domain_hi(&self) -> f64 {
        self.domain_hi
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p_grid.iter().copied().zip(self.values.iter().copied())
    }

    /// `ln ||tau||_p`.
    pub fn ln_eval(&self, p: f64) -> Result<f64> {
        match &self.source {
            ProfileSource::Tail(t) => Ok(ln_abs_moment(t.as_ref(), p)? / p),
            ProfileSource::Function(g) => Ok(g.log_moment(p)? / p),
            ProfileSource::Table => {
                let (lo, hi) = (self.p_grid[0], self.p_grid[self.p_grid.len() - 1]);
                if p < lo || p > hi {
                    return Err(GlsError::InvalidArgument(format!(
                        "p = {p} outside the tabulated range [{lo}, {hi}]"
                    )));
                }
                let j = self.p_grid.partition_point(|x| *x < p).max(1);
                let (p0, p1) = (self.p_grid[j - 1], self.p_grid[j]);
                let (v0, v1) = (self.values[j - 1].ln(), self.values[j].ln());
                if p1 == p0 {
                    return Ok(v0);
                }
                let w = (p.ln() - p0.ln()) / (p1.ln() - p0.ln());
                Ok(v0 + w * (v1 - v0))
            }
        }
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        Ok(self.ln_eval(p)?.exp())
    }

    /// Convexity of `p -> p ln ||tau||_p` on the stored grid, up to `tol`.
    pub fn is_log_convex(&self, tol: f64) -> bool {
        let h: Vec<f64> = self.points().map(|(p, v)| p * v.ln()).collect();
        (1..h.len().saturating_sub(1)).all(|i| {
            let (p0, p1, p2) = (self.p_grid[i - 1], self.p_grid[i], self.p_grid[i + 1]);
            let w = (p1 - p0) / (p2 - p0);
            let chord = (1.0 - w) * h[i - 1] + w * h[i + 1];
            h[i] <= chord + tol * (1.0 + chord.abs())
        })
    }
}

/// `sup_p M(p) / psi(p)` over the common domain.
///
/// The supremum is taken on 200 log points of `(1 + 1e-4, b (1 - 1e-4))` and
/// refined by golden section. When the maximum sits at the right edge the
/// edge is pushed out (to `b (1 - 1e-6)`, `b (1 - 1e-8)` for finite `b`, or
/// to `1e4`, `1e5` from `1e3` for infinite `b`).
pub fn gls_norm(m: &MomentProfile, psi: &GeneratingFunction) -> Result<f64> {
    let b = m.domain_hi().min(psi.domain_hi());
    let lo = 1.0 + 1e-4;
    let edges: [f64; 3] = if b.is_finite() {
        [b * (1.0 - 1e-4), b * (1.0 - 1e-6), b * (1.0 - 1e-8)]
    } else {
        [1e3, 1e4, 1e5]
    };
    if !(edges[0] > lo) {
        return Err(GlsError::InvalidArgument(format!(
            "the domains of the moment profile and {} do not overlap",
            psi.label()
        )));
    }
    let ln_ratio = |p: f64| -> f64 {
        match (m.ln_eval(p), psi.log_moment(p)) {
            (Ok(a), Ok(h)) => a - h / p,
            _ => f64::INFINITY,
        }
    };
    let grid = log_space(lo, edges[0], 200);
    let values: Vec<f64> = grid.iter().map(|&p| ln_ratio(p)).collect();
    let i = argmax(&values)
        .ok_or_else(|| GlsError::InvalidArgument("moment profile is zero".into()))?;
    if values[i] == f64::INFINITY {
        return Err(GlsError::UnboundedNorm(format!(
            "moment ratio is infinite at p = {}",
            grid[i]
        )));
    }
    if i + 1 < grid.len() {
        let a = grid[i.saturating_sub(1)].ln();
        let c = grid[i + 1].ln();
        let (_, v) = golden_max(|x| ln_ratio(x.exp()), a, c, 1e-10);
        return Ok(v.max(values[i]).exp());
    }
    let mut best = values[i];
    let mut edge_value = values[i];
    let mut growth = 0.0;
    for w in edges.windows(2) {
        let seg = log_space(w[0], w[1], 21);
        let seg_values: Vec<f64> = seg[1..].iter().map(|&p| ln_ratio(p)).collect();
        let new_edge = seg_values[seg_values.len() - 1];
        if new_edge == f64::INFINITY {
            return Err(GlsError::UnboundedNorm(format!(
                "moment ratio is infinite near p = {:.6e}",
                w[1]
            )));
        }
        let seg_best = seg_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best = best.max(seg_best);
        growth = new_edge - edge_value;
        edge_value = new_edge;
        if best > new_edge || growth <= 0.0 {
            return Ok(best.exp());
        }
    }
    if growth > 1e-3_f64.ln_1p() {
        return Err(GlsError::UnboundedNorm(format!(
            "||tau||_p / {} still grows at p = {:.6e}",
            psi.label(),
            edges[2]
        )));
    }
    Ok(best.exp())
}

/// Numerical form of `psi(p) / p -> 0`: the ratio decreases over the last
/// decade of a log grid up to 1e6, and either its log-log slope there is
/// below -0.01 or its last value is below 1e-2 times the first.
pub fn check_lim_zero(psi: &GeneratingFunction) -> bool {
    if psi.domain_hi().is_finite() {
        return false;
    }
    let grid = log_space(1.0 + 1e-4, 1e6, 241);
    let ratio: Vec<f64> = grid.iter().map(|&p| psi.eval(p) / p).collect();
    if ratio.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return false;
    }
    let last_decade = grid.iter().position(|&p| p >= 1e5).unwrap_or(0);
    let tail = &ratio[last_decade..];
    let decreasing = tail.windows(2).all(|w| w[1] <= w[0]) && tail[tail.len() - 1] < tail[0];
    if !decreasing {
        return false;
    }
    let x: Vec<f64> = grid[last_decade..].iter().map(|p| p.ln()).collect();
    let y: Vec<f64> = tail.iter().map(|r| r.ln()).collect();
    let (slope, _) = ols(&x, &y);
    slope < -0.01 || ratio[ratio.len() - 1] < 1e-2 * ratio[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tailfun::{BoundedTail, PowerLogTail, StretchedExpTail};
    use approx::assert_relative_eq;
    use statrs::function::gamma::ln_gamma;

    #[test]
    fn exponential_moments_match_gamma() {
        let t = StretchedExpTail::exponential(1.0);
        for p in [1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 40.0] {
            let got = natural_psi(&t, p).unwrap();
            let want = (ln_gamma(p + 1.0) / p).exp();
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn bounded_tail_moments_are_one() {
        let t = BoundedTail { bound: 1.0 };
        for p in [1.0, 2.0, 7.5, 100.0] {
            assert_relative_eq!(natural_psi(&t, p).unwrap(), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn power_tail_domain() {
        let t = PowerLogTail::new(3.0, 0.0, SlowlyVarying::one()).unwrap();
        let b = natural_domain(&t, 10.0).unwrap();
        assert!((b - 3.0).abs() < 1e-3, "{b}");
        assert!(natural_domain(&StretchedExpTail::exponential(1.0), 50.0)
            .unwrap()
            .is_infinite());
        assert!(natural_domain(&BoundedTail { bound: 1.0 }, 50.0).unwrap().is_infinite());
    }

    #[test]
    fn power_tail_moment_closed_form() {
        // e^p + p e^(p - beta) / (beta - p)
        let t = PowerLogTail::new(3.0, 0.0, SlowlyVarying::one()).unwrap();
        for p in [1.0_f64, 2.0, 2.9] {
            let want = p + (p * (-3.0_f64).exp() / (3.0 - p)).ln_1p();
            assert_relative_eq!(ln_abs_moment(&t, p).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn divergent_moment_reported() {
        let t = PowerLogTail::new(2.5, 0.0, SlowlyVarying::one()).unwrap();
        let e = ln_abs_moment(&t, 2.6).unwrap_err();
        assert!(e.is_divergence());
    }

    #[test]
    fn sqrt_p_and_constant() {
        let g = GeneratingFunction::sqrt_p();
        assert_relative_eq!(g.eval(4.0), 2.0, max_relative = 1e-14);
        let c = GeneratingFunction::constant(2.0, 5.0).unwrap();
        assert_relative_eq!(c.eval(3.0), 2.0, max_relative = 1e-14);
        assert!(c.try_eval(6.0).is_err());
        assert!(g.validate(1.0).is_ok());
        assert!(GeneratingFunction::psi_ml(1.0, SlowlyVarying::one()).is_err());
    }

    #[test]
    fn lim_zero_examples() {
        assert!(check_lim_zero(&GeneratingFunction::sqrt_p()));
        assert!(!check_lim_zero(&GeneratingFunction::from_psi("p", f64::INFINITY, |p| p)));
        let g = GeneratingFunction::psi_ml(1.5, SlowlyVarying::log_power(2.0)).unwrap();
        assert!(check_lim_zero(&g));
    }

    #[test]
    fn gls_norm_simple_cases() {
        let psi = GeneratingFunction::sqrt_p();
        let m = MomentProfile::from_function(psi.scaled(2.0), &[2.0, 3.0]).unwrap();
        assert_relative_eq!(gls_norm(&m, &psi).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn table_profile_interpolates() {
        let m = MomentProfile::from_values(vec![(1.0, 1.0), (4.0, 4.0)], 10.0).unwrap();
        assert_relative_eq!(m.eval(2.0).unwrap(), 2.0, max_relative = 1e-12);
        assert!(m.eval(5.0).is_err());
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = MomentProfile::read_csv(buf.as_slice(), 10.0).unwrap();
        assert_eq!(back.points().collect::<Vec<_>>(), m.points().collect::<Vec<_>>());
    }
}
