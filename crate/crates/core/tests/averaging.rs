use std::f64::consts::E;
use std::sync::Arc;

use approx::assert_relative_eq;
use gls_core::averaging::*;
use gls_core::fenchel::tail_bound_from_gls;
use gls_core::glspace::GeneratingFunction;
use gls_core::grid::log_space;
use gls_core::tailfun::*;
use gls_core::GlsError;

fn exp_tail(scale: f64) -> SharedTail {
    Arc::new(StretchedExpTail::exponential(scale))
}

fn unit_field(tail: SharedTail) -> RandomFieldSpec {
    RandomFieldSpec::identical(IndexSpace::unit_interval(DEFAULT_NODES).unwrap(), tail)
}

#[test]
fn lp_average_bound_examples() {
    let v = lp_average_bound(&unit_field(exp_tail(1.0)), 3.0).unwrap();
    assert_relative_eq!(v, 6f64.cbrt(), max_relative = 1e-9);

    let two = IndexSpace::finite(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
    let marginals: Vec<SharedTail> = vec![Arc::new(BoundedTail { bound: 1.0 }), Arc::new(BoundedTail { bound: 3.0 })];
    let field = RandomFieldSpec::from_marginals(two, marginals).unwrap();
    assert_relative_eq!(lp_average_bound(&field, 2.0).unwrap(), 2.0, max_relative = 1e-9);

    let field = RandomFieldSpec::scaled(
        IndexSpace::unit_interval(DEFAULT_NODES).unwrap(),
        Arc::new(BoundedTail { bound: 1.0 }),
        ScaleProfile::Linear { a: 0.0, b: 1.0 },
    )
    .unwrap();
    assert_relative_eq!(lp_average_bound(&field, 2.5).unwrap(), 0.5, max_relative = 1e-9);
}

#[test]
fn lp_average_bound_reports_divergence() {
    let power: SharedTail = Arc::new(PowerLogTail::new(2.0, 0.0, SlowlyVarying::one()).unwrap());
    assert!(lp_average_bound(&unit_field(power), 3.0).unwrap_err().is_divergence());
}

#[test]
fn weak_type_examples() {
    assert_relative_eq!(weak_type_constant(2.0), 4.0);
    assert_relative_eq!(weak_type_constant(3.0), 3.375, max_relative = 1e-15);
    let pareto: SharedTail = Arc::new(ParetoTail { c: 1.0, q: 2.0 });
    let report = weak_type_average_bound(&unit_field(pareto.clone()), 2.0).unwrap();
    assert_relative_eq!(report.eval(10.0), 0.04, max_relative = 1e-12);
    assert_eq!(report.constant("C(q)"), Some(4.0));

    let single = RandomFieldSpec::identical(IndexSpace::single_point(), pareto.clone());
    let report = weak_type_average_bound(&single, 2.0).unwrap();
    for t in log_space(1.0, 1e3, 50) {
        assert!(report.eval(t) >= pareto.eval(t));
    }
}

#[test]
fn weak_type_rejects_marginals_outside_the_unit_ball() {
    let big: SharedTail = Arc::new(ParetoTail { c: 4.0, q: 2.0 });
    let err = weak_type_average_bound(&unit_field(big), 2.0).unwrap_err();
    assert!(matches!(err, GlsError::Hypothesis(_)), "{err:?}");
}

#[test]
fn average_bound_dominates_the_marginal() {
    let q = exp_tail(1.0);
    let report = average_tail_bound(&unit_field(q.clone())).unwrap();
    assert_eq!(report.validity_from(), E);
    for &(t, b) in report.table() {
        assert!(b >= q.eval(t), "t={t}");
    }
}

#[test]
fn bounded_marginals_give_a_vanishing_bound() {
    let report = average_tail_bound(&unit_field(Arc::new(BoundedTail { bound: 1.0 }))).unwrap();
    assert_eq!(report.constant("b"), Some(f64::INFINITY));
    assert!(report.table().iter().all(|&(_, b)| b == 0.0));
}

#[test]
fn conditional_and_average_pipelines_agree_bitwise() {
    let r = exp_tail(1.0);
    let a = average_tail_bound(&unit_field(r.clone())).unwrap();
    let c = conditional_bound(&r).unwrap();
    assert_eq!(a.table(), c.table());
}

#[test]
fn heavier_marginals_give_larger_bounds() {
    let light = average_tail_bound(&unit_field(exp_tail(1.0))).unwrap();
    let heavy = average_tail_bound(&unit_field(exp_tail(2.0))).unwrap();
    for t in log_space(E, 200.0, 60) {
        assert!(light.eval(t) <= heavy.eval(t), "t={t}");
    }
}

#[test]
fn scaled_bound_constant_scale_single_point_reduces_to_fenchel() {
    let psi = GeneratingFunction::psi_ml(1.5, SlowlyVarying::one()).unwrap();
    let base: SharedTail = Arc::new(tail_bound_from_gls(&psi, 1.0).unwrap());
    let field = RandomFieldSpec::scaled(IndexSpace::single_point(), base, ScaleProfile::Constant { value: 1.0 }).unwrap();
    let report = scaled_average_bound(&field, &psi).unwrap();
    let c4 = report.constant("C4").unwrap();
    assert_eq!(report.constant("C5"), Some(c4));
    let direct = tail_bound_from_gls(&psi, c4).unwrap();
    for t in log_space(E * c4, 100.0, 30) {
        assert_relative_eq!(report.eval(t), direct.eval(t), max_relative = 1e-12);
    }
}

#[test]
fn scaled_bound_linear_profile_halves_the_constant() {
    let psi = GeneratingFunction::sqrt_p();
    let base: SharedTail = Arc::new(tail_bound_from_gls(&psi, 1.0).unwrap());
    let field = RandomFieldSpec::scaled(
        IndexSpace::unit_interval(DEFAULT_NODES).unwrap(),
        base,
        ScaleProfile::Linear { a: 0.0, b: 1.0 },
    )
    .unwrap();
    let report = scaled_average_bound(&field, &psi).unwrap();
    let c4 = report.constant("C4").unwrap();
    assert_relative_eq!(report.constant("C5").unwrap(), 0.5 * c4, max_relative = 1e-12);
}

#[test]
fn scaled_subgaussian_bound_closed_form() {
    let psi = GeneratingFunction::sqrt_p();
    let base: SharedTail = Arc::new(tail_bound_from_gls(&psi, 1.0).unwrap());
    let field = RandomFieldSpec::scaled(
        IndexSpace::unit_interval(DEFAULT_NODES).unwrap(),
        base,
        ScaleProfile::Constant { value: 1.0 },
    )
    .unwrap();
    let report = scaled_average_bound(&field, &psi).unwrap();
    let c5 = report.constant("C5").unwrap();
    assert_relative_eq!(report.validity_from(), E * c5, max_relative = 1e-12);
    for t in log_space(E * c5, 20.0 * c5, 20) {
        let want = (-(t / c5).powi(2) / (2.0 * E)).exp();
        assert_relative_eq!(report.eval(t), want, max_relative = 1e-6);
    }
}

#[test]
fn transform_examples() {
    let sqrt_p = GeneratingFunction::sqrt_p();
    let one = GeneratingFunction::constant(1.0, f64::INFINITY).unwrap();
    assert_relative_eq!(doob_transform(&sqrt_p).eval(2.0), 2.0 * 2f64.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(doob_transform(&one).eval(3.0), 1.5, max_relative = 1e-12);
    let far = 1e6;
    assert_relative_eq!(doob_transform(&sqrt_p).eval(far) / sqrt_p.eval(far), 1.0, max_relative = 1e-5);
    assert_relative_eq!(burkholder_transform(&sqrt_p).eval(4.0), 8.0, max_relative = 1e-12);
    assert_relative_eq!(burkholder_transform(&one).eval(2.0), 2.0, max_relative = 1e-12);
    let ratio = burkholder_transform(&sqrt_p).eval(2.0) / doob_transform(&sqrt_p).eval(2.0);
    assert_relative_eq!(ratio, 1.0, max_relative = 1e-12);
}

#[test]
fn transforms_dominate_their_input_and_weaken_the_bound() {
    let psi = GeneratingFunction::psi_ml(2.0, SlowlyVarying::one()).unwrap();
    let plain = tail_bound_from_gls(&psi, 1.0).unwrap();
    for g in [doob_transform(&psi), burkholder_transform(&psi)] {
        for p in log_space(1.01, 1e3, 50) {
            assert!(g.eval(p) >= psi.eval(p));
        }
        let curve = tail_bound_from_gls(&g, 1.0).unwrap();
        for t in log_space(E, 100.0, 40) {
            assert!(curve.eval(t) >= plain.eval(t), "t={t}");
        }
    }
}

fn ui_spec() -> MartingaleSpec {
    MartingaleSpec::uniformly_integrable(TerminalFamily::Sine, (1..=6).collect()).unwrap()
}

#[test]
fn martingale_term_bound_uses_the_gamma_profile() {
    let u = exp_tail(1.0);
    let term = martingale_bound(&ui_spec(), &u, MartingaleStatistic::Term).unwrap();
    let rho = GeneratingFunction::from_psi("gamma", f64::INFINITY, |p| statrs::function::gamma::gamma(p + 1.0).powf(1.0 / p));
    let oracle = tail_bound_from_gls(&rho, 1.0).unwrap();
    for t in log_space(E, 100.0, 20) {
        assert_relative_eq!(term.eval(t), oracle.eval(t), max_relative = 1e-6);
    }
    let max = martingale_bound(&ui_spec(), &u, MartingaleStatistic::Maximum).unwrap();
    for t in log_space(E, 100.0, 20) {
        assert!(max.eval(t) >= term.eval(t));
    }
}

#[test]
fn normalized_max_with_bounded_increments() {
    let spec = MartingaleSpec::increment_built(IncrementLaw::Rademacher, vec![1.0; 64]).unwrap();
    let w: SharedTail = Arc::new(BoundedTail { bound: 1.0 });
    let report = martingale_bound(&spec, &w, MartingaleStatistic::NormalizedMax).unwrap();
    for t in log_space(E, 200.0, 30) {
        assert_relative_eq!(report.eval(t), (-t / E).exp(), max_relative = 1e-6);
    }
}

#[test]
fn martingale_kind_mismatch_is_rejected() {
    let spec = MartingaleSpec::increment_built(IncrementLaw::Gaussian, vec![1.0; 8]).unwrap();
    let u = exp_tail(1.0);
    assert!(matches!(martingale_bound(&spec, &u, MartingaleStatistic::Term), Err(GlsError::WrongKind(_))));
    assert!(matches!(
        martingale_bound(&ui_spec(), &u, MartingaleStatistic::NormalizedMax),
        Err(GlsError::WrongKind(_))
    ));
}

#[test]
fn sigma_profile_accumulates_variances() {
    let spec = MartingaleSpec::increment_built(IncrementLaw::Gaussian, vec![1.0; 100]).unwrap();
    assert_relative_eq!(*spec.sigma_profile().last().unwrap(), 10.0, max_relative = 1e-12);
    assert_eq!(spec.horizon(), 100);
}

#[test]
fn report_json_round_trip() {
    let report = average_tail_bound(&unit_field(exp_tail(1.0))).unwrap();
    let back = BoundReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back.label(), report.label());
    assert_eq!(back.validity_from(), report.validity_from());
    assert_eq!(back.constants(), report.constants());
    assert_eq!(back.pipeline(), report.pipeline());
    assert_eq!(back.table(), report.table());
    for &(t, b) in report.table().iter().step_by(37) {
        assert_eq!(back.eval(t), b);
    }
}

#[test]
fn reports_reject_curves_above_one() {
    let bad: SharedTail = Arc::new(CurveTail::new("2", |_| 2.0));
    assert!(BoundReport::new("bad", bad, Vec::new(), 1.0, Vec::new()).is_err());
}

#[test]
fn index_space_validation() {
    assert!(IndexSpace::unit_interval(1).is_err());
    assert!(IndexSpace::finite(vec![0.0, 1.0], vec![0.4, 0.4]).is_err());
    assert!(IndexSpace::finite(vec![0.0, 1.0], vec![-0.5, 1.5]).is_err());
    let (_, w) = IndexSpace::unit_interval(5).unwrap().nodes_and_weights();
    assert_eq!(w, vec![0.125, 0.25, 0.25, 0.25, 0.125]);
}
