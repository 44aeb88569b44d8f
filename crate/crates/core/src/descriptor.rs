//! Serializable `{family, parameters}` descriptors for parametric tails and
//! generating functions, plus the compact `family:k=v,...` text form.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{GlsError, Result};
use crate::glspace::GeneratingFunction;
use crate::tailfun::{
    BoundedTail, GaussianAbsTail, ParetoTail, PowerLogTail, ScaledTail, SharedTail,
    SlowlyVarying, StretchedExpTail, WeibullLogTail,
};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameters", rename_all = "kebab-case")]
pub enum TailDescriptor {
    PowerLog {
        beta: f64,
        gamma: f64,
        #[serde(default)]
        r: f64,
    },
    WeibullLog {
        m: f64,
        #[serde(default = "one")]
        c: f64,
        #[serde(default)]
        r: f64,
    },
    Exponential {
        #[serde(default = "one")]
        scale: f64,
    },
    StretchedExp {
        q: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Pareto {
        #[serde(default = "one")]
        c: f64,
        q: f64,
    },
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
    },
    Bounded {
        #[serde(default = "one")]
        bound: f64,
    },
    Scaled {
        inner: Box<TailDescriptor>,
        scale: f64,
    },
}

impl TailDescriptor {
    pub fn build(&self) -> Result<SharedTail> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(GlsError::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        Ok(match self {
            TailDescriptor::PowerLog { beta, gamma, r } => {
                Arc::new(PowerLogTail::new(*beta, *gamma, SlowlyVarying::log_power(*r))?)
            }
            TailDescriptor::WeibullLog { m, c, r } => {
                Arc::new(WeibullLogTail::new(*m, *c, SlowlyVarying::log_power(*r))?)
            }
            TailDescriptor::Exponential { scale } => {
                Arc::new(StretchedExpTail::exponential(positive("scale", *scale)?))
            }
            TailDescriptor::StretchedExp { q, scale } => Arc::new(StretchedExpTail {
                q: positive("q", *q)?,
                scale: positive("scale", *scale)?,
            }),
            TailDescriptor::Pareto { c, q } => Arc::new(ParetoTail {
                c: positive("c", *c)?,
                q: positive("q", *q)?,
            }),
            TailDescriptor::Gaussian { sigma } => Arc::new(GaussianAbsTail {
                sigma: positive("sigma", *sigma)?,
            }),
            TailDescriptor::Bounded { bound } => Arc::new(BoundedTail {
                bound: positive("bound", *bound)?,
            }),
            TailDescriptor::Scaled { inner, scale } => {
                if !(*scale >= 0.0) {
                    return Err(GlsError::InvalidArgument(format!(
                        "scale must be non-negative, got {scale}"
                    )));
                }
                Arc::new(ScaledTail::new(inner.build()?, *scale))
            }
        })
    }

    /// Parses either JSON or the compact `family:k=v,...` form.
    pub fn parse(text: &str) -> Result<Self> {
        parse_descriptor(text)
    }

    pub fn to_compact(&self) -> Option<String> {
        to_compact(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameters")]
pub enum PsiDescriptor {
    /// `p^(1/m) (ln(p+1))^r` on `(1, inf)`.
    #[serde(rename = "psiML")]
    PsiMl {
        m: f64,
        #[serde(default)]
        r: f64,
    },
    /// `(beta - p)^(-(gamma+1)/beta) L(1/(beta-p))^(1/beta)` on `(1, beta)`.
    #[serde(rename = "beta-gamma")]
    BetaGamma {
        beta: f64,
        gamma: f64,
        #[serde(default)]
        r: f64,
    },
    /// Constant `value` on `(1, b)`; `b` omitted means infinite.
    #[serde(rename = "constant")]
    Constant {
        #[serde(default = "one")]
        value: f64,
        #[serde(default)]
        b: Option<f64>,
    },
    /// Natural function of a parametric tail.
    #[serde(rename = "natural")]
    Natural { tail: TailDescriptor },
}

impl PsiDescriptor {
    pub fn build(&self) -> Result<GeneratingFunction> {
        match self {
            PsiDescriptor::PsiMl { m, r } => {
                GeneratingFunction::psi_ml(*m, SlowlyVarying::log_power(*r))
            }
            PsiDescriptor::BetaGamma { beta, gamma, r } => {
                crate::fenchel::beta_gamma_psi(*beta, *gamma, SlowlyVarying::log_power(*r))
            }
            PsiDescriptor::Constant { value, b } => {
                GeneratingFunction::constant(*value, b.unwrap_or(f64::INFINITY))
            }
            PsiDescriptor::Natural { tail } => GeneratingFunction::natural(tail.build()?),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_descriptor(text)
    }

    pub fn to_compact(&self) -> Option<String> {
        to_compact(self)
    }
}

fn parse_descriptor<D: for<'de> Deserialize<'de>>(text: &str) -> Result<D> {
    let text = text.trim();
    let value = if text.starts_with('{') {
        serde_json::from_str::<Value>(text).map_err(|e| GlsError::Parse(e.to_string()))?
    } else {
        compact_to_json(text)?
    };
    serde_json::from_value(value).map_err(|e| GlsError::Parse(format!("`{text}`: {e}")))
}

fn compact_to_json(text: &str) -> Result<Value> {
    let (family, rest) = match text.split_once(':') {
        Some((f, r)) => (f.trim(), r.trim()),
        None => (text, ""),
    };
    if family.is_empty() {
        return Err(GlsError::Parse(format!("missing family in `{text}`")));
    }
    let mut params = Map::new();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| GlsError::Parse(format!("expected key=value, found `{item}`")))?;
        let num: f64 = v
            .trim()
            .parse()
            .map_err(|_| GlsError::Parse(format!("parameter `{}` is not a number: `{v}`", k.trim())))?;
        let num = serde_json::Number::from_f64(num)
            .ok_or_else(|| GlsError::Parse(format!("parameter `{}` is not finite", k.trim())))?;
        params.insert(k.trim().to_string(), Value::Number(num));
    }
    let mut obj = Map::new();
    obj.insert("family".into(), Value::String(family.to_string()));
    obj.insert("parameters".into(), Value::Object(params));
    Ok(Value::Object(obj))
}

fn to_compact<D: Serialize>(d: &D) -> Option<String> {
    let v = serde_json::to_value(d).ok()?;
    let family = v.get("family")?.as_str()?.to_string();
    let params = v.get("parameters")?.as_object()?;
    let mut parts = Vec::new();
    for (k, val) in params {
        match val {
            Value::Number(n) => parts.push(format!("{k}={}", n.as_f64()?)),
            Value::Null => {}
            _ => return None,
        }
    }
    Some(format!("{family}:{}", parts.join(",")))
}
