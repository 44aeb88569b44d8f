//! Bound pipelines for spatial averages of random fields, conditional
//! expectations and martingales.
//!
//! Every pipeline returns a [`BoundReport`]: the bound curve, the constants
//! that went into it, the threshold from which it is claimed, a text trace
//! of the stages and a fixed 400-point tabulation used for export and for
//! Monte Carlo checks.

use std::f64::consts::E;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GlsError, Result};
use crate::fenchel::{gls_from_tail_bound, tail_bound_from_gls};
use crate::glspace::{natural_psi, GeneratingFunction};
use crate::grid::log_space;
use crate::tailfun::{
    read_tail_csv, tabulate, weak_lorentz_norm, write_tail_csv, ParetoTail, ScaledTail,
    SharedTail, SupTail, TabulatedTail, TailFunction,
};

/// Default node count of the trapezoid rule on `[0, 1]`.
pub const DEFAULT_NODES: usize = 129;
/// Points in a report's tabulated curve.
pub const REPORT_POINTS: usize = 400;
/// The tabulated curve spans `[validity_from, validity_from * REPORT_SPAN]`.
pub const REPORT_SPAN: f64 = 1e4;

/// The index set `X` with its probability measure.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexSpace {
    /// `[0, 1]` with Lebesgue measure, discretized by the trapezoid rule.
    UnitInterval { nodes: usize },
    Finite { points: Vec<f64>, weights: Vec<f64> },
}

impl IndexSpace {
    pub fn unit_interval(nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(GlsError::InvalidArgument(format!(
                "the unit interval needs at least 2 nodes, got {nodes}"
            )));
        }
        Ok(IndexSpace::UnitInterval { nodes })
    }

    pub fn finite(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(GlsError::InvalidArgument(
                "a finite index space needs as many weights as points".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(GlsError::InvalidArgument("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(GlsError::InvalidArgument(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        Ok(IndexSpace::Finite { points, weights })
    }

    pub fn single_point() -> Self {
        IndexSpace::Finite {
            points: vec![0.0],
            weights: vec![1.0],
        }
    }

    /// Quadrature nodes and weights (weights sum to 1).
    pub fn nodes_and_weights(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            IndexSpace::UnitInterval { nodes } => {
                let n = *nodes;
                let h = 1.0 / (n - 1) as f64;
                let x = (0..n).map(|i| i as f64 * h).collect();
                let w = (0..n)
                    .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                    .collect();
                (x, w)
            }
            IndexSpace::Finite { points, weights } => (points.clone(), weights.clone()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IndexSpace::UnitInterval { nodes } => *nodes,
            IndexSpace::Finite { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The scale map `theta(x) >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScaleProfile {
    Constant { value: f64 },
    /// `a + b x`.
    Linear { a: f64, b: f64 },
    /// One value per quadrature node.
    Points { values: Vec<f64> },
}

impl ScaleProfile {
    pub fn values(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self {
            ScaleProfile::Constant { value } => vec![*value; nodes.len()],
            ScaleProfile::Linear { a, b } => nodes.iter().map(|x| a + b * x).collect(),
            ScaleProfile::Points { values } => {
                if values.len() != nodes.len() {
                    return Err(GlsError::InvalidArgument(format!(
                        "scale profile has {} values for {} nodes",
                        values.len(),
                        nodes.len()
                    )));
                }
                values.clone()
            }
        };
        if v.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(GlsError::InvalidArgument("scale profile must be finite and >= 0".into()));
        }
        Ok(v)
    }
}

/// A random field described through its marginal tails on the quadrature nodes.
#[derive(Debug, Clone)]
pub struct RandomFieldSpec {
    index_space: IndexSpace,
    marginals: Vec<SharedTail>,
    uniform_tail: SharedTail,
    scale: Option<(ScaleProfile, Vec<f64>)>,
    base: Option<SharedTail>,
}

impl RandomFieldSpec {
    /// All marginals equal to `tail`.
    pub fn identical(index_space: IndexSpace, tail: SharedTail) -> Self {
        let n = index_space.len();
        Self {
            index_space,
            marginals: vec![tail.clone(); n],
            uniform_tail: tail,
            scale: None,
            base: None,
        }
    }

    /// One marginal per node; the uniform tail is their pointwise supremum.
    pub fn from_marginals(index_space: IndexSpace, marginals: Vec<SharedTail>) -> Result<Self> {
        if marginals.len() != index_space.len() {
            return Err(GlsError::InvalidArgument(format!(
                "{} marginals for {} nodes",
                marginals.len(),
                index_space.len()
            )));
        }
        let uniform_tail: SharedTail = Arc::new(SupTail {
            parts: marginals.clone(),
        });
        Ok(Self {
            index_space,
            marginals,
            uniform_tail,
            scale: None,
            base: None,
        })
    }

    /// Marginal at `x` is the tail of `theta(x) * zeta` with `zeta ~ base`.
    pub fn scaled(index_space: IndexSpace, base: SharedTail, profile: ScaleProfile) -> Result<Self> {
        let (nodes, _) = index_space.nodes_and_weights();
        let theta = profile.values(&nodes)?;
        let theta_max = theta.iter().copied().fold(0.0, f64::max);
        let marginals = theta
            .iter()
            .map(|&s| Arc::new(ScaledTail::new(base.clone(), s)) as SharedTail)
            .collect();
        Ok(Self {
            index_space,
            marginals,
            uniform_tail: Arc::new(ScaledTail::new(base.clone(), theta_max)),
            scale: Some((profile, theta)),
            base: Some(base),
        })
    }

    /// Attaches a scale profile to an existing field (for the scaled pipeline).
    pub fn with_scale_profile(mut self, profile: ScaleProfile) -> Result<Self> {
        let (nodes, _) = self.index_space.nodes_and_weights();
        let theta = profile.values(&nodes)?;
        self.scale = Some((profile, theta));
        Ok(self)
    }

    pub fn index_space(&self) -> &IndexSpace {
        &self.index_space
    }

    pub fn marginals(&self) -> &[SharedTail] {
        &self.marginals
    }

    pub fn uniform_tail(&self) -> &SharedTail {
        &self.uniform_tail
    }

    pub fn scale_profile(&self) -> Option<&ScaleProfile> {
        self.scale.as_ref().map(|(p, _)| p)
    }

    /// `theta` at the quadrature nodes.
    pub fn scale_values(&self) -> Option<&[f64]> {
        self.scale.as_ref().map(|(_, v)| v.as_slice())
    }

    pub fn base(&self) -> Option<&SharedTail> {
        self.base.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConstant {
    pub name: String,
    #[serde(with = "extended_f64")]
    pub value: f64,
    pub note: String,
}

/// JSON number, or `"inf"`, `"-inf"`, `"nan"` for non-finite values.
mod extended_f64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!("not a number: `{other}`"))),
            },
        }
    }
}

fn constant(name: &str, value: f64, note: &str) -> NamedConstant {
    NamedConstant {
        name: name.to_string(),
        value,
        note: note.to_string(),
    }
}

/// A synthesized tail bound with its provenance.
#[derive(Debug, Clone)]
pub struct BoundReport {
    label: String,
    bound: SharedTail,
    constants: Vec<NamedConstant>,
    validity_from: f64,
    pipeline: Vec<String>,
    table: Vec<(f64, f64)>,
}

/// Serialized form of a [`BoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub label: String,
    pub validity_from: f64,
    pub constants: Vec<NamedConstant>,
    pub pipeline: Vec<String>,
    /// `t,tail` CSV of the tabulated bound.
    pub curve_csv: String,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

impl BoundReport {
    /// Wraps `bound` and tabulates it on `[validity_from, 1e4 validity_from]`.
    pub fn new(
        label: &str,
        bound: SharedTail,
        constants: Vec<NamedConstant>,
        validity_from: f64,
        pipeline: Vec<String>,
    ) -> Result<Self> {
        if !(validity_from > 0.0) || !validity_from.is_finite() {
            return Err(GlsError::InvalidArgument(format!(
                "validity threshold must be positive, got {validity_from}"
            )));
        }
        let grid = log_space(validity_from, validity_from * REPORT_SPAN, REPORT_POINTS);
        let table = tabulate(bound.as_ref(), &grid);
        if table.iter().any(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(GlsError::Divergence(format!(
                "bound curve of {label} left [0, 1] on its table"
            )));
        }
        Ok(Self {
            label: label.to_string(),
            bound,
            constants,
            validity_from,
            pipeline,
            table,
        })
    }

    /// The trivial bound `1`.
    pub fn unit(validity_from: f64) -> Result<Self> {
        let one: SharedTail = Arc::new(crate::tailfun::CurveTail::new("1", |_| 1.0));
        Self::new("trivial bound 1", one, Vec::new(), validity_from, vec!["bound(t) = 1".into()])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bound(&self) -> &SharedTail {
        &self.bound
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.bound.eval(t)
    }

    pub fn constants(&self) -> &[NamedConstant] {
        &self.constants
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    pub fn validity_from(&self) -> f64 {
        self.validity_from
    }

    pub fn pipeline(&self) -> &[String] {
        &self.pipeline
    }

    pub fn table(&self) -> &[(f64, f64)] {
        &self.table
    }

    /// The same report with every bound value multiplied by `factor`.
    pub fn scaled_by(&self, factor: f64) -> Result<Self> {
        let inner = self.bound.clone();
        let scaled: SharedTail = Arc::new(crate::tailfun::CurveTail::new(
            &format!("{factor} * ({})", inner.describe()),
            move |t| (factor * inner.eval(t)).min(1.0),
        ));
        let mut pipeline = self.pipeline.clone();
        pipeline.push(format!("multiplied by {factor}"));
        Self::new(
            &format!("{} x {factor}", self.label),
            scaled,
            self.constants.clone(),
            self.validity_from,
            pipeline,
        )
    }

    pub fn to_document(&self) -> Result<ReportDocument> {
        let mut buf = Vec::new();
        write_tail_csv(&mut buf, &self.table)?;
        Ok(ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            label: self.label.clone(),
            validity_from: self.validity_from,
            constants: self.constants.clone(),
            pipeline: self.pipeline.clone(),
            curve_csv: String::from_utf8(buf).expect("csv output is ASCII"),
        })
    }

    /// Rebuilds a report whose bound is the tabulated curve of `doc`.
    pub fn from_document(doc: &ReportDocument) -> Result<Self> {
        if doc.schema_version != REPORT_SCHEMA_VERSION {
            return Err(GlsError::Parse(format!(
                "unsupported report schema version {}",
                doc.schema_version
            )));
        }
        let tab: TabulatedTail = read_tail_csv(doc.curve_csv.as_bytes())?;
        let table: Vec<(f64, f64)> = tab.points().collect();
        Ok(Self {
            label: doc.label.clone(),
            bound: Arc::new(tab),
            constants: doc.constants.clone(),
            validity_from: doc.validity_from,
            pipeline: doc.pipeline.clone(),
            table,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_document()?)
            .map_err(|e| GlsError::InvalidArgument(format!("report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReportDocument =
            serde_json::from_str(text).map_err(|e| GlsError::Parse(format!("report: {e}")))?;
        Self::from_document(&doc)
    }
}

/// `int_X ||xi(x)||_p mu(dx)`, the right side of the integral triangle inequality.
pub fn lp_average_bound(field: &RandomFieldSpec, p: f64) -> Result<f64> {
    let (nodes, weights) = field.index_space.nodes_and_weights();
    let mut total = 0.0;
    for ((x, w), tail) in nodes.iter().zip(&weights).zip(&field.marginals) {
        if *w == 0.0 {
            continue;
        }
        let v = natural_psi(tail.as_ref(), p).map_err(|e| match e {
            GlsError::Divergence(msg) => GlsError::Divergence(format!("at x = {x}: {msg}")),
            e => e,
        })?;
        total += w * v;
    }
    Ok(total)
}

/// `C(q) = (q / (q - 1))^q`.
pub fn weak_type_constant(q: f64) -> f64 {
    (q / (q - 1.0)).powf(q)
}

/// Weak-type bound `C(q) t^-q` for fields with `sup_x T_{xi(x)}(t) <= t^-q`.
pub fn weak_type_average_bound(field: &RandomFieldSpec, q: f64) -> Result<BoundReport> {
    if !(q > 1.0) {
        return Err(GlsError::InvalidArgument(format!("q must exceed 1, got {q}")));
    }
    let norm = weak_lorentz_norm(field.uniform_tail.as_ref(), q)?;
    if norm > 1.0 + 1e-9 {
        return Err(GlsError::Hypothesis(format!(
            "sup_t (t^{q} Q(t))^(1/{q}) = {norm} exceeds 1"
        )));
    }
    let c = weak_type_constant(q);
    BoundReport::new(
        &format!("weak-type average bound q={q}"),
        Arc::new(ParetoTail { c, q }),
        vec![
            constant("weak_norm_Q", norm, "weak-L^q quasi-norm of the uniform tail"),
            constant(
                "C(q)",
                c,
                "(q/(q-1))^q from the quasi-norm / Lorentz-norm equivalence and the integral triangle inequality",
            ),
        ],
        1.0,
        vec![
            format!("Q: {}", field.uniform_tail.describe()),
            format!("sup_t (t^q Q(t))^(1/q) = {norm:.6e} <= 1"),
            format!("bound(t) = min(1, {c:.6e} t^-{q}), t >= 1"),
        ],
    )
}

fn natural_pipeline(tail: &SharedTail, roles: [&str; 3], label: &str) -> Result<BoundReport> {
    let [q, g0, g] = roles;
    let psi = GeneratingFunction::natural(tail.clone())?;
    let b = psi.domain_hi();
    let curve = tail_bound_from_gls(&psi, 1.0)?;
    BoundReport::new(
        label,
        Arc::new(curve),
        vec![
            constant("b", b, "largest finite moment order of the input tail"),
            constant("norm", 1.0, "norm of the average in the natural space of the input tail"),
        ],
        E,
        vec![
            format!("{q}: {}", tail.describe()),
            format!("{g0}(p) = (p int t^(p-1) {q}(t) dt)^(1/p) on (1, {b:.6e})"),
            format!("{g}(p) = p ln {g0}(p)"),
            format!("{g}*(u) = sup_p (p u - {g}(p))"),
            format!("bound(t) = exp(-{g}*(ln t)), t >= e"),
        ],
    )
}

/// `T_{xi[X]}(t) <= exp(-g*(ln t))` with `g` built from the uniform tail `Q`.
pub fn average_tail_bound(field: &RandomFieldSpec) -> Result<BoundReport> {
    natural_pipeline(&field.uniform_tail, ["Q", "g0", "g"], "average tail bound")
}

/// `T_nu(t) <= exp(-v*(ln t))` for the conditional expectation of a variable with tail `r`.
pub fn conditional_bound(r: &SharedTail) -> Result<BoundReport> {
    natural_pipeline(r, ["R", "delta", "v"], "conditional expectation bound")
}

/// Bound for fields whose marginals satisfy `T_{xi(x)}(t) <= exp(-h*(ln(t / theta(x))))`.
pub fn scaled_average_bound(field: &RandomFieldSpec, psi: &GeneratingFunction) -> Result<BoundReport> {
    let theta = field
        .scale_values()
        .ok_or_else(|| GlsError::InvalidArgument("the field has no scale profile".into()))?;
    let unit = tail_bound_from_gls(psi, 1.0)?;
    let grid = log_space(1e-3, 1e6, 200);
    for (i, (&s, marginal)) in theta.iter().zip(&field.marginals).enumerate() {
        for &t in &grid {
            let allowed = if s == 0.0 { 0.0 } else { unit.eval(t / s) };
            if marginal.eval(t) > allowed * (1.0 + 1e-9) + 1e-300 {
                return Err(GlsError::Hypothesis(format!(
                    "marginal at node {i} exceeds exp(-h*(ln(t/theta))) at t = {t:.4e}"
                )));
            }
        }
    }
    let (_, weights) = field.index_space.nodes_and_weights();
    let integral: f64 = theta.iter().zip(&weights).map(|(s, w)| s * w).sum();
    let c4 = gls_from_tail_bound(Arc::new(unit), psi)?;
    let c5 = c4 * integral;
    if !(c5 > 0.0) {
        return Err(GlsError::InvalidArgument("the scale profile integrates to 0".into()));
    }
    let curve = tail_bound_from_gls(psi, c5)?;
    BoundReport::new(
        "scaled average bound",
        Arc::new(curve),
        vec![
            constant("C4", c4, "GLS norm of a variable whose tail equals exp(-h*(ln t))"),
            constant("int_theta", integral, "integral of theta over X"),
            constant("C5", c5, "C4 * int_theta"),
        ],
        E * c5,
        vec![
            format!("psi: {}", psi.label()),
            format!("C4 = ||exp(-h*(ln t))||_(G psi) = {c4:.6e}"),
            format!("C5 = C4 * int theta = {c5:.6e}"),
            "bound(t) = exp(-h*(ln(t / C5))), t >= e C5".into(),
        ],
    )
}

/// `p -> p / (p - 1) * rho(p)`.
pub fn doob_transform(rho: &GeneratingFunction) -> GeneratingFunction {
    rho.multiplied(&format!("p/(p-1) * ({})", rho.label()), |p| p / (p - 1.0))
}

/// `p -> p * upsilon(p)`.
pub fn burkholder_transform(upsilon: &GeneratingFunction) -> GeneratingFunction {
    upsilon.multiplied(&format!("p * ({})", upsilon.label()), |p| p)
}

/// `min(1, 2 exp(-t^2 / 2))`: a normalized-sum tail valid for Gaussian and
/// bounded symmetric increments.
#[derive(Debug, Clone, Copy)]
pub struct HoeffdingTail;

impl TailFunction for HoeffdingTail {
    fn eval(&self, t: f64) -> f64 {
        self.ln_eval_at_log(t.ln()).exp()
    }

    fn ln_eval_at_log(&self, s: f64) -> f64 {
        (std::f64::consts::LN_2 - 0.5 * (2.0 * s).exp()).min(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![(2.0 * std::f64::consts::LN_2).sqrt()]
    }

    fn describe(&self) -> String {
        "min(1, 2 exp(-t^2/2))".into()
    }
}

/// Terminal variables on `((0, 1), Lebesgue)` with closed-form dyadic cell means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TerminalFamily {
    /// `omega^(-alpha)`, `0 < alpha < 1`.
    PowerSingularity { alpha: f64 },
    /// `sin(2 pi omega)`.
    Sine,
}

impl TerminalFamily {
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            TerminalFamily::PowerSingularity { alpha } => omega.powf(-alpha),
            TerminalFamily::Sine => (2.0 * std::f64::consts::PI * omega).sin(),
        }
    }

    /// Mean over the interval `(a, b)`.
    pub fn cell_mean(&self, a: f64, b: f64) -> f64 {
        match self {
            TerminalFamily::PowerSingularity { alpha } => {
                let k = 1.0 - alpha;
                (b.powf(k) - a.powf(k)) / (k * (b - a))
            }
            TerminalFamily::Sine => {
                let tau = 2.0 * std::f64::consts::PI;
                ((tau * a).cos() - (tau * b).cos()) / (tau * (b - a))
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, TerminalFamily::Sine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncrementLaw {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MartingaleKind {
    /// `kappa_n = E[kappa | F_n]`, `F_n` generated by the dyadic partition of depth `levels[n]`.
    UniformlyIntegrable {
        terminal: TerminalFamily,
        levels: Vec<u32>,
    },
    /// Partial sums of independent centered increments with the given variances.
    IncrementBuilt {
        law: IncrementLaw,
        variances: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSpec {
    pub kind: MartingaleKind,
}

impl MartingaleSpec {
    pub fn uniformly_integrable(terminal: TerminalFamily, levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GlsError::InvalidArgument(
                "partition depths must be non-empty and strictly increasing".into(),
            ));
        }
        if levels[levels.len() - 1] > 30 {
            return Err(GlsError::InvalidArgument("partition depth above 30".into()));
        }
        if let TerminalFamily::PowerSingularity { alpha } = terminal {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(GlsError::InvalidArgument(format!(
                    "alpha must lie in (0, 1), got {alpha}"
                )));
            }
        }
        Ok(Self {
            kind: MartingaleKind::UniformlyIntegrable { terminal, levels },
        })
    }

    pub fn increment_built(law: IncrementLaw, variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() || variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(GlsError::InvalidArgument(
                "increment variances must be positive and finite".into(),
            ));
        }
        Ok(Self {
            kind: MartingaleKind::IncrementBuilt { law, variances },
        })
    }

    pub fn horizon(&self) -> usize {
        match &self.kind {
            MartingaleKind::UniformlyIntegrable { levels, .. } => levels.len(),
            MartingaleKind::IncrementBuilt { variances, .. } => variances.len(),
        }
    }

    /// `sigma_n` for `n = 1..=horizon`, with `sigma_n^2 = E [kappa]_n^2`.
    pub fn sigma_profile(&self) -> Vec<f64> {
        match &self.kind {
            MartingaleKind::IncrementBuilt { variances, .. } => variances
                .iter()
                .scan(0.0, |acc, v| {
                    *acc += v;
                    Some(acc.sqrt())
                })
                .collect(),
            // orthogonal increments: E [kappa]_n^2 = E kappa_n^2
            MartingaleKind::UniformlyIntegrable { terminal, levels } => levels
                .iter()
                .map(|&l| {
                    let cells = 1u64 << l;
                    let w = 1.0 / cells as f64;
                    let s: f64 = (0..cells)
                        .map(|c| {
                            let m = terminal.cell_mean(c as f64 * w, (c + 1) as f64 * w);
                            w * m * m
                        })
                        .sum();
                    s.sqrt()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartingaleStatistic {
    Term,
    Maximum,
    NormalizedMax,
}

/// Bound for `kappa_n`, `max_k |kappa_k|`, or `max_k |kappa_k| / sigma_n`.
///
/// `u` is the terminal tail for the first two and the normalized tail bound
/// `W` for the last.
pub fn martingale_bound(
    spec: &MartingaleSpec,
    u: &SharedTail,
    which: MartingaleStatistic,
) -> Result<BoundReport> {
    let ui = matches!(spec.kind, MartingaleKind::UniformlyIntegrable { .. });
    match which {
        MartingaleStatistic::Term | MartingaleStatistic::Maximum if !ui => {
            return Err(GlsError::WrongKind(
                "term and maximum bounds need a uniformly integrable martingale".into(),
            ))
        }
        MartingaleStatistic::NormalizedMax if ui => {
            return Err(GlsError::WrongKind(
                "the normalized maximum needs an increment-built martingale".into(),
            ))
        }
        _ => {}
    }
    let rho = GeneratingFunction::natural(u.clone())?;
    let (psi, stage) = match which {
        MartingaleStatistic::Term => (rho.clone(), "rho(p)"),
        MartingaleStatistic::Maximum => (doob_transform(&rho), "p/(p-1) rho(p)"),
        MartingaleStatistic::NormalizedMax => (burkholder_transform(&rho), "p upsilon(p)"),
    };
    let curve = tail_bound_from_gls(&psi, 1.0)?;
    BoundReport::new(
        &format!("martingale {which:?} bound"),
        Arc::new(curve),
        vec![
            constant("b", rho.domain_hi(), "largest finite moment order of the input tail"),
        ],
        E,
        vec![
            format!("input tail: {}", u.describe()),
            "rho(p) = natural function of the input tail".into(),
            format!("psi(p) = {stage}"),
            "bound(t) = exp(-h*(ln t)), h(p) = p ln psi(p), t >= e".into(),
        ],
    )
}
