use std::f64::consts::E;
use std::sync::Arc;

use approx::assert_relative_eq;
use gls_core::averaging::*;
use gls_core::fenchel::tail_bound_from_gls;
use gls_core::glspace::GeneratingFunction;
use gls_core::grid::log_space;
use gls_core::mcverify::fit::fit_generalized_normal;
use gls_core::mcverify::rng::{chunked_map, open_unit, stream_rng};
use gls_core::mcverify::verify::{doob_check, mean_and_se, sample_abs_moment, within_band};
use gls_core::mcverify::*;
use gls_core::tailfun::*;
use gls_core::GlsError;

const SEED: u64 = 20_240_601;

fn unit_field(tail: SharedTail) -> RandomFieldSpec {
    RandomFieldSpec::identical(IndexSpace::unit_interval(DEFAULT_NODES).unwrap(), tail)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn simulations_are_bit_exact_across_thread_counts() {
    let cfg = SimConfig::new(SEED, 20_000);
    let field = unit_field(Arc::new(StretchedExpTail::exponential(1.0)));
    let dep = Dependence::GaussianCopula { correlation_length: 0.2 };
    let a = in_pool(1, || simulate_field_average_samples(&cfg, &field, dep).unwrap());
    let b = in_pool(4, || simulate_field_average_samples(&cfg, &field, dep).unwrap());
    assert_eq!(a, b);

    let spec = MartingaleSpec::increment_built(IncrementLaw::Rademacher, vec![1.0; 32]).unwrap();
    let a = in_pool(1, || simulate_martingale(&cfg, &spec).unwrap());
    let b = in_pool(3, || simulate_martingale(&cfg, &spec).unwrap());
    assert_eq!(a.running_max, b.running_max);
    assert_eq!(a.terminal, b.terminal);

    let other = simulate_field_average_samples(&SimConfig::new(SEED + 1, 20_000), &field, dep).unwrap();
    assert_ne!(a.terminal.len(), 0);
    assert_ne!(other, simulate_field_average_samples(&cfg, &field, dep).unwrap());
}

#[test]
fn common_factor_average_is_the_marginal_variable() {
    let q: SharedTail = Arc::new(StretchedExpTail::exponential(1.0));
    let cfg = SimConfig::new(SEED, 50_000);
    let emp = simulate_field_average(&cfg, &unit_field(q.clone()), Dependence::CommonFactor).unwrap();
    assert!(within_band(&emp, q.as_ref(), &log_space(0.01, 10.0, 100)));
}

#[test]
fn bounded_marginals_give_bounded_averages() {
    let cfg = SimConfig::new(SEED, 10_000);
    let field = unit_field(Arc::new(BoundedTail { bound: 1.0 }));
    let s = simulate_field_average_samples(&cfg, &field, Dependence::Independent).unwrap();
    assert!(s.iter().all(|&x| x <= 1.0 + 1e-12));
}

#[test]
fn independent_gaussian_average_has_the_weight_variance() {
    // symmetric Gaussian marginals via a signed quantile: draw |Z| and a sign per node
    let cfg = SimConfig::new(SEED, 100_000);
    let (_, w) = IndexSpace::unit_interval(DEFAULT_NODES).unwrap().nodes_and_weights();
    let want: f64 = w.iter().map(|x| x * x).sum();
    let g = GaussianAbsTail { sigma: 1.0 };
    let samples = chunked_map(cfg.seed, 99, cfg.n_samples, |rng, _| {
        w.iter()
            .map(|wi| {
                let (u, sign) = gls_core::mcverify::rng::signed_open_unit(rng);
                wi * sign * g.quantile(u)
            })
            .sum::<f64>()
    });
    let sq: Vec<f64> = samples.iter().map(|x| x * x).collect();
    let (var, se) = mean_and_se(&sq);
    assert!((var - want).abs() <= 3.0 * se, "{var} vs {want} (se {se})");
}

#[test]
fn field_configuration_must_match_the_field() {
    let cfg = SimConfig::new(SEED, 10_000).with_nodes(17);
    let field = unit_field(Arc::new(StretchedExpTail::exponential(1.0)));
    assert!(matches!(
        simulate_field_average_samples(&cfg, &field, Dependence::Independent),
        Err(GlsError::InvalidArgument(_))
    ));
    assert!(SimConfig::new(SEED, 9_999).validate().is_err());
}

#[test]
fn power_singularity_cells_match_closed_forms() {
    let spec = ConditionalSpec::power_singularity_halves(0.5).unwrap();
    let exact = spec.exact_cell_values().unwrap();
    assert_relative_eq!(exact[0], 2.0 * 2f64.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(exact[1], 4.0 - 2.0 * 2f64.sqrt(), max_relative = 1e-12);
    let sim = simulate_conditional(&SimConfig::new(SEED, 1_000_000), &spec).unwrap();
    for j in 0..2 {
        assert!((sim.cell_means[j] - exact[j]).abs() <= 3.0 * sim.cell_std_errors[j]);
    }
    assert!(sim.nu.iter().all(|v| *v == sim.cell_means[0] || *v == sim.cell_means[1]));
}

#[test]
fn power_singularity_moment_below_the_critical_order() {
    // E|eta|^p = 1 / (1 - alpha p) = 4 at alpha = 1/2, p = 3/2; heavy-tailed estimator
    let spec = ConditionalSpec::power_singularity_halves(0.5).unwrap();
    let sim = simulate_conditional(&SimConfig::new(SEED, 2_000_000), &spec).unwrap();
    let m = sample_abs_moment(&sim.eta, 1.5);
    assert!((m - 4.0).abs() < 0.2, "{m}");
}

#[test]
fn tiny_cells_are_reported_empty() {
    let base = BaseVariable::Terminal(TerminalFamily::Sine);
    let spec = ConditionalSpec::new(base, vec![0.0, 1e-6, 1.0]).unwrap();
    let err = simulate_conditional(&SimConfig::new(SEED, 10_000), &spec).unwrap_err();
    assert!(matches!(err, GlsError::EmptyCell { .. }), "{err:?}");
}

#[test]
fn conditioning_contracts_sample_moments() {
    let specs = [
        ConditionalSpec::power_singularity_halves(0.3).unwrap(),
        ConditionalSpec::new(
            BaseVariable::Quantile(Arc::new(StretchedExpTail::exponential(1.0))),
            (0..=16).map(|i| i as f64 / 16.0).collect(),
        )
        .unwrap(),
    ];
    for spec in &specs {
        let mut passes = 0;
        let runs = 100;
        for r in 0..runs {
            let sim = simulate_conditional(&SimConfig::new(SEED + r, 100_000), spec).unwrap();
            let ok = [1.5, 2.0, 3.0]
                .iter()
                .all(|&p| sample_abs_moment(&sim.nu, p) <= sample_abs_moment(&sim.eta, p));
            passes += ok as u32;
        }
        assert!(passes >= 99, "{passes}/{runs}");
    }
}

#[test]
fn moments_above_the_critical_order_keep_growing() {
    let base = BaseVariable::Terminal(TerminalFamily::PowerSingularity { alpha: 0.5 });
    let g = sample_moment_growth(&base, 2.1, &[10_000, 100_000, 1_000_000], 16, SEED).unwrap();
    assert!(g.windows(2).all(|w| w[1] > w[0]), "{g:?}");
}

#[test]
fn dkw_band_is_calibrated() {
    let tail = StretchedExpTail::exponential(1.0);
    let ts = [0.1, 0.5, 1.0, 2.0, 4.0];
    let runs = 500;
    let mut violations = [0usize; 5];
    for r in 0..runs {
        let mut rng = stream_rng(SEED, r);
        let xs: Vec<f64> = (0..1_000).map(|_| tail.quantile(open_unit(&mut rng))).collect();
        let emp = empirical_tail(&xs, 0.95).unwrap();
        for (k, &t) in ts.iter().enumerate() {
            if (emp.eval(t) - tail.eval(t)).abs() > emp.band_epsilon() {
                violations[k] += 1;
            }
        }
    }
    for v in violations {
        assert!(v as f64 / runs as f64 <= 0.05 + 0.02, "{violations:?}");
    }
}

#[test]
fn gaussian_martingale_square_variation() {
    let spec = MartingaleSpec::increment_built(IncrementLaw::Gaussian, vec![1.0; 100]).unwrap();
    let sim = simulate_martingale(&SimConfig::new(SEED, 100_000), &spec).unwrap();
    assert_relative_eq!(sim.sigma_n() * sim.sigma_n(), 100.0, max_relative = 1e-12);
    let (m, se) = mean_and_se(&sim.square_variation);
    assert!((m - 100.0).abs() <= 3.0 * se, "{m} (se {se})");
    for p in [2.0, 4.0] {
        assert!(doob_check(&sim, p).pass);
    }
}

#[test]
fn bounded_terminal_gives_bounded_martingale() {
    let spec = MartingaleSpec::uniformly_integrable(TerminalFamily::Sine, (1..=10).collect()).unwrap();
    let sim = simulate_martingale(&SimConfig::new(SEED, 10_000), &spec).unwrap();
    assert!(sim.running_max.iter().all(|m| *m <= 1.0 + 1e-12));
    assert_eq!(sim.sample_paths.len(), 16);
}

#[test]
fn single_summand_sums_follow_the_source() {
    let cfg = SimConfig::new(SEED, 200_000);
    let sums = simulate_normalized_sums(3.0, &[1, 64], &cfg).unwrap();
    let source = StretchedExpTail { q: 3.0, scale: 1.0 };
    assert!(within_band(&sums[0].tail, &source, &log_space(0.05, 2.5, 80)));
    // (2/3) Gamma(2/3), 30-digit reference
    let sigma2 = 0.902_745_292_950_933_6;
    assert_relative_eq!(gls_core::mcverify::sim::normalized_source_variance(3.0), sigma2, max_relative = 1e-14);
    for s in &sums {
        let sq: Vec<f64> = s.samples.iter().map(|x| x * x).collect();
        let (m, se) = mean_and_se(&sq);
        assert!((m - sigma2).abs() <= 3.0 * se, "n={}: {m} (se {se})", s.n);
    }
}

#[test]
fn gaussian_samples_fit_shape_two() {
    let g = GaussianAbsTail { sigma: 1.0 };
    let xs = chunked_map(SEED, 98, 200_000, |rng, _| g.quantile(open_unit(rng)));
    let fit = fit_generalized_normal(&empirical_tail(&xs, 0.95).unwrap(), 0.5, 100).unwrap();
    assert!((fit.shape - 2.0).abs() < 0.1, "{fit:?}");
}

fn subgaussian_samples(n: usize) -> EmpiricalTail {
    // inverse of 1 on [0, e), exp(-t^2 / 2e) from e on
    let atom = (-E / 2.0).exp();
    let xs = chunked_map(SEED, 97, n, |rng, _| {
        let u = open_unit(rng);
        if u > atom {
            E
        } else {
            (-2.0 * E * u.ln()).sqrt()
        }
    });
    empirical_tail(&xs, 0.95).unwrap()
}

#[test]
fn verdicts_for_trivial_exact_and_halved_bounds() {
    let emp = subgaussian_samples(100_000);
    let unit = verify_domination(&emp, &BoundReport::unit(0.01).unwrap()).unwrap();
    assert!(unit.pass);

    let curve = Arc::new(tail_bound_from_gls(&GeneratingFunction::sqrt_p(), 1.0).unwrap());
    let exact = BoundReport::new("subgaussian", curve, Vec::new(), E, Vec::new()).unwrap();
    let v = verify_domination(&emp, &exact).unwrap();
    assert!(v.pass, "{v:?}");

    let halved = verify_domination(&emp, &exact.scaled_by(0.5).unwrap()).unwrap();
    assert!(!halved.pass);
    assert!(halved.worst_margin > 0.0);
    assert!(halved.worst_t >= E);
}

#[test]
fn verification_needs_enough_range() {
    let emp = subgaussian_samples(10_000);
    let report = BoundReport::unit(1e3).unwrap();
    assert!(matches!(verify_domination(&emp, &report), Err(GlsError::InsufficientRange(_))));
}
