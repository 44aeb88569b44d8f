//! Log-moment functions `h(p) = p ln psi(p)`, their Young-Fenchel duals
//! `h*(u) = sup_p (p u - h(p))`, and the passage between GLS membership and
//! tail bounds `T(t) <= exp(-h*(ln t))`.

use std::fmt;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use crate::error::{GlsError, Result};
use crate::glspace::{check_lim_zero, gls_norm, natural_domain, GeneratingFunction, MomentProfile, NATURAL_P_CAP};
use crate::grid::{argmax, golden_max, log_space};
use crate::tailfun::{SharedTail, SlowlyVarying, TailFunction};

const GRID_POINTS: usize = 200;
const PAD: f64 = 1e-4;
/// Grid levels for an infinite domain; later levels are built on demand.
const INFINITE_LEVELS: [(f64, f64); 3] = [(1.0 + PAD, 1e4), (1e4, 1e8), (1e8, 1e12)];

#[derive(Debug)]
struct Level {
    p: Vec<f64>,
    h: Vec<f64>,
}

/// `h(p) = p ln psi(p)` with lazily cached grid values.
pub struct LogMomentFunction {
    psi: GeneratingFunction,
    levels: Vec<OnceLock<Level>>,
}

impl fmt::Debug for LogMomentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogMomentFunction")
            .field("psi", &self.psi.label())
            .field("domain_hi", &self.psi.domain_hi())
            .finish()
    }
}

impl LogMomentFunction {
    pub fn new(psi: GeneratingFunction) -> Self {
        let n = if psi.domain_hi().is_finite() { 1 } else { INFINITE_LEVELS.len() };
        Self {
            psi,
            levels: (0..n).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn psi(&self) -> &GeneratingFunction {
        &self.psi
    }

    pub fn domain_hi(&self) -> f64 {
        self.psi.domain_hi()
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        self.psi.log_moment(p)
    }

    fn h_or_inf(&self, p: f64) -> f64 {
        self.eval(p).unwrap_or(f64::INFINITY)
    }

    fn level(&self, k: usize) -> &Level {
        self.levels[k].get_or_init(|| {
            let b = self.domain_hi();
            let p: Vec<f64> = if b.is_finite() {
                let mut p = vec![1.0];
                p.extend(log_space(1.0 + PAD, (b * (1.0 - PAD)).max(1.0 + 2.0 * PAD), GRID_POINTS));
                p.push(b);
                p
            } else {
                let (lo, hi) = INFINITE_LEVELS[k];
                let mut p = log_space(lo, hi, GRID_POINTS);
                if k == 0 {
                    p.insert(0, 1.0);
                } else {
                    p.remove(0);
                }
                p
            };
            let h = p.iter().map(|&x| self.h_or_inf(x)).collect();
            Level { p, h }
        })
    }

    /// `(h*(u), maximizing p)`, without clipping.
    pub fn conjugate(&self, u: f64) -> Result<(f64, f64)> {
        if !u.is_finite() {
            return Err(GlsError::InvalidArgument(format!("u must be finite, got {u}")));
        }
        let mut ps: Vec<f64> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let n_levels = self.levels.len();
        let mut i = 0;
        for k in 0..n_levels {
            let level = self.level(k);
            ps.extend_from_slice(&level.p);
            vals.extend(level.p.iter().zip(&level.h).map(|(&p, &h)| p * u - h));
            i = argmax(&vals).ok_or_else(|| {
                GlsError::Divergence(format!("{} is infinite on its whole grid", self.psi.label()))
            })?;
            if i + 1 < vals.len() {
                break;
            }
            if k + 1 == n_levels && self.domain_hi().is_infinite() {
                return Err(GlsError::UnboundedDual { u });
            }
        }
        let best = (ps[i], vals[i]);
        if i == 0 || i + 1 == ps.len() {
            return Ok((best.1, best.0));
        }
        let obj = |x: f64| {
            let p = x.exp();
            p * u - self.h_or_inf(p)
        };
        let (x, v) = golden_max(obj, ps[i - 1].ln(), ps[i + 1].ln(), 1e-12);
        if v > best.1 {
            Ok((v, x.exp()))
        } else {
            Ok((best.1, best.0))
        }
    }
}

/// The numeric dual of a [`LogMomentFunction`].
#[derive(Debug, Clone)]
pub struct FenchelDual {
    source: Arc<LogMomentFunction>,
}

impl FenchelDual {
    pub fn new(psi: GeneratingFunction) -> Self {
        Self {
            source: Arc::new(LogMomentFunction::new(psi)),
        }
    }

    pub fn source(&self) -> &LogMomentFunction {
        &self.source
    }

    /// `h*(u)` clipped below at 0.
    pub fn eval(&self, u: f64) -> Result<f64> {
        young_fenchel(&self.source, u)
    }

    pub fn argmax_hint(&self, u: f64) -> Result<f64> {
        Ok(self.source.conjugate(u)?.1)
    }

    /// Rows `(u, h*(u), argmax p)` for export.
    pub fn table(&self, us: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
        us.iter()
            .map(|&u| {
                let (v, p) = self.source.conjugate(u)?;
                Ok((u, v.max(0.0), p))
            })
            .collect()
    }
}

/// `h*(u) = sup_p (p u - h(p))`, clipped at 0.
pub fn young_fenchel(h: &LogMomentFunction, u: f64) -> Result<f64> {
    Ok(h.conjugate(u)?.0.max(0.0))
}

/// Writes `u,hstar,argmax_p` rows.
pub fn write_dual_csv<W: Write>(out: W, rows: &[(f64, f64, f64)]) -> Result<()> {
    let io = |e: csv::Error| GlsError::InvalidArgument(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "hstar", "argmax_p"]).map_err(io)?;
    for (u, v, p) in rows {
        w.write_record([format!("{u:.16e}"), format!("{v:.16e}"), format!("{p:.16e}")])
            .map_err(io)?;
    }
    w.flush()
        .map_err(|e| GlsError::InvalidArgument(format!("csv flush failed: {e}")))
}

/// `t -> exp(-h*(ln(t / norm)))` for `t >= e norm`, and 1 below.
#[derive(Debug, Clone)]
pub struct BoundCurve {
    dual: FenchelDual,
    norm: f64,
}

impl BoundCurve {
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn threshold(&self) -> f64 {
        std::f64::consts::E * self.norm
    }

    pub fn dual(&self) -> &FenchelDual {
        &self.dual
    }

    pub fn psi(&self) -> &GeneratingFunction {
        self.dual.source().psi()
    }

    /// `ln bound(e^s)`, with errors surfaced.
    pub fn try_ln_eval_at_log(&self, s: f64) -> Result<f64> {
        if s < 1.0 + self.norm.ln() {
            return Ok(0.0);
        }
        match self.dual.eval(s - self.norm.ln()) {
            Ok(v) => Ok(-v),
            // the objective still grows at p = 1e12, so h* is astronomically large
            Err(GlsError::UnboundedDual { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    pub fn try_eval(&self, t: f64) -> Result<f64> {
        if t < self.threshold() {
            return Ok(1.0);
        }
        Ok(self.try_ln_eval_at_log(t.ln())?.exp())
    }
}

impl TailFunction for BoundCurve {
    fn eval(&self, t: f64) -> f64 {
        self.try_eval(t).unwrap_or(1.0)
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        self.try_ln_eval_at_log(s).unwrap_or(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.threshold()]
    }

    fn describe(&self) -> String {
        format!("exp(-h*(ln(t/{}))) for psi = {}", self.norm, self.psi().label())
    }
}

/// Tail bound for a variable with `||tau||_{G psi} = norm`.
pub fn tail_bound_from_gls(psi: &GeneratingFunction, norm: f64) -> Result<BoundCurve> {
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(GlsError::InvalidArgument(format!("norm must be positive, got {norm}")));
    }
    let curve = BoundCurve {
        dual: FenchelDual::new(psi.clone()),
        norm,
    };
    curve.try_eval(curve.threshold())?;
    Ok(curve)
}

/// Numeric surrogate for the embedding constant: the GLS norm, in `G psi`,
/// of a variable whose tail is `tail`.
pub fn gls_from_tail_bound(tail: SharedTail, psi: &GeneratingFunction) -> Result<f64> {
    if psi.domain_hi().is_infinite() && !check_lim_zero(psi) {
        return Err(GlsError::Hypothesis(format!(
            "{} does not satisfy psi(p)/p -> 0",
            psi.label()
        )));
    }
    let b = natural_domain(tail.as_ref(), NATURAL_P_CAP)?;
    if !(b > 1.0) {
        return Err(GlsError::UnboundedNorm(format!(
            "{} has no finite moment above order 1",
            tail.describe()
        )));
    }
    let profile = MomentProfile::from_tail_lazy(tail, b);
    gls_norm(&profile, psi).map_err(|e| match e {
        GlsError::UnboundedNorm(_) => e,
        e if e.is_divergence() => GlsError::UnboundedNorm(e.to_string()),
        e => e,
    })
}

/// `(beta - p)^(-(gamma+1)/beta) L(1/(beta-p))^(1/beta)` on `(1, beta)`, with unit constant.
pub fn beta_gamma_psi(beta: f64, gamma: f64, l: SlowlyVarying) -> Result<GeneratingFunction> {
    if !(beta > 1.0) || !(gamma > -1.0) {
        return Err(GlsError::InvalidArgument(format!(
            "beta-gamma psi needs beta > 1 and gamma > -1, got beta = {beta}, gamma = {gamma}"
        )));
    }
    let descriptor = l.log_power_exponent().map(|r| crate::descriptor::PsiDescriptor::BetaGamma {
        beta,
        gamma,
        r,
    });
    let label = format!("beta-gamma psi beta={beta} gamma={gamma} L={}", l.description());
    let g = GeneratingFunction::from_log_moment(&label, beta, move |p| {
        let d = beta - p;
        if !(d > 0.0) {
            return Err(GlsError::Divergence(format!("beta-gamma psi is infinite at p = {p}")));
        }
        Ok(p * (-(gamma + 1.0) / beta * d.ln() + l.ln_eval(1.0 / d) / beta))
    });
    Ok(g.with_descriptor(descriptor))
}
