use std::sync::Arc;

use approx::assert_relative_eq;
use gls_core::glspace::*;
use gls_core::tailfun::*;
use gls_core::GlsError;

// Gamma(p + 1)^(1/p), 30-digit reference values.
const GAMMA_ROOTS: [(f64, f64); 6] = [
    (1.5, 1.208_993_965_512_352_2),
    (2.0, 1.414_213_562_373_095_0),
    (3.0, 1.817_120_592_832_139_7),
    (5.0, 2.605_171_084_697_351_9),
    (10.0, 4.528_728_688_116_764_8),
    (25.0, 10.177_141_834_880_185),
];

fn exponential() -> SharedTail {
    Arc::new(StretchedExpTail::exponential(1.0))
}

#[test]
fn natural_psi_of_exponential_matches_gamma_roots() {
    let tail = exponential();
    assert_relative_eq!(natural_psi(tail.as_ref(), 1.0).unwrap(), 1.0, max_relative = 1e-10);
    for (p, want) in GAMMA_ROOTS {
        assert_relative_eq!(natural_psi(tail.as_ref(), p).unwrap(), want, max_relative = 1e-9);
    }
}

#[test]
fn natural_psi_of_parametric_tails_matches_reference_integrals() {
    // e^p + p int_e^inf t^(p-1) T(t) dt, evaluated to 30 digits
    let w2 = WeibullLogTail::new(2.0, 1.0, SlowlyVarying::one()).unwrap();
    assert_relative_eq!(natural_psi(&w2, 4.0).unwrap(), 2.718_410_873_833_192, max_relative = 1e-8);
    let w15 = WeibullLogTail::new(1.5, 1.0, SlowlyVarying::one()).unwrap();
    assert_relative_eq!(natural_psi(&w15, 3.0).unwrap(), 2.723_866_137_619_726, max_relative = 1e-8);
    let pw = PowerLogTail::new(3.0, 0.0, SlowlyVarying::one()).unwrap();
    assert_relative_eq!(natural_psi(&pw, 2.0).unwrap(), 2.850_406_108_131_530, max_relative = 1e-8);
}

#[test]
fn bounded_tail_has_unit_moments() {
    let b = BoundedTail { bound: 1.0 };
    for p in [1.5, 3.0, 40.0, 1e3] {
        assert_relative_eq!(natural_psi(&b, p).unwrap(), 1.0, max_relative = 1e-9);
    }
    assert_eq!(natural_domain(&b, 50.0).unwrap(), f64::INFINITY);
}

#[test]
fn natural_domain_examples() {
    let pw = PowerLogTail::new(3.0, 0.0, SlowlyVarying::one()).unwrap();
    let b = natural_domain(&pw, 10.0).unwrap();
    assert!((b - 3.0).abs() < 1e-3, "{b}");
    assert_eq!(natural_domain(exponential().as_ref(), 50.0).unwrap(), f64::INFINITY);
}

#[test]
fn moments_past_the_domain_diverge() {
    let pw: SharedTail = Arc::new(PowerLogTail::new(2.5, 0.0, SlowlyVarying::one()).unwrap());
    let err = moments_from_tail(pw, &[1.5, 2.0, 2.6]).unwrap_err();
    assert!(err.is_divergence(), "{err:?}");
}

#[test]
fn moments_from_tail_examples() {
    let m = moments_from_tail(exponential(), &[1.0, 2.0, 3.0]).unwrap();
    let want = [1.0, 2f64.sqrt(), 6f64.cbrt()];
    for ((_, v), w) in m.points().zip(want) {
        assert_relative_eq!(v, w, max_relative = 1e-9);
    }
}

#[test]
fn scaling_a_tail_scales_its_natural_function() {
    for (name, tail) in catalog() {
        let b = natural_domain(tail.as_ref(), 20.0).unwrap();
        for s in [0.3, 4.0] {
            let scaled = ScaledTail::new(tail.clone(), s);
            for p in [1.2, 2.0, 2.4, 8.0] {
                if p >= b {
                    continue;
                }
                let base = natural_psi(tail.as_ref(), p).unwrap();
                let got = natural_psi(&scaled, p).unwrap();
                assert!((got / (s * base) - 1.0).abs() < 1e-6, "{name} s={s} p={p}");
            }
        }
    }
}

#[test]
fn natural_functions_are_lyapunov_monotone() {
    for (name, tail) in catalog() {
        let b = natural_domain(tail.as_ref(), 50.0).unwrap();
        let grid = interior_grid(b.min(50.0), 60);
        let values: Vec<f64> = grid.iter().map(|&p| natural_psi(tail.as_ref(), p).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)), "{name}");
    }
}

#[test]
fn self_normalisation_holds_for_every_catalog_tail() {
    for (name, tail) in catalog() {
        let psi = GeneratingFunction::natural(tail.clone()).unwrap();
        let m = MomentProfile::from_tail_lazy(tail.clone(), psi.domain_hi());
        let k = gls_norm(&m, &psi).unwrap();
        assert!((k - 1.0).abs() < 1e-6, "{name}: {k}");
    }
}

#[test]
fn constant_ratio_norm() {
    let psi = GeneratingFunction::psi_ml(2.0, SlowlyVarying::one()).unwrap();
    let grid = interior_grid(1e3, 80);
    let m = MomentProfile::from_function(psi.scaled(2.0), &grid).unwrap();
    assert_relative_eq!(gls_norm(&m, &psi).unwrap(), 2.0, max_relative = 1e-9);
}

#[test]
fn gaussian_norm_in_the_subgaussian_space() {
    let g: SharedTail = Arc::new(GaussianAbsTail { sigma: 1.0 });
    let m = MomentProfile::from_tail_lazy(g, f64::INFINITY);
    let k = gls_norm(&m, &GeneratingFunction::sqrt_p()).unwrap();
    // the ratio (E|Z|^p)^(1/p) / sqrt(p) decreases from 0.797867... at p = 1
    assert!((0.79..=1.0).contains(&k), "{k}");
    assert_relative_eq!(k, 0.797_867_308_674_221_2, max_relative = 1e-3);
}

#[test]
fn lim_zero_condition_examples() {
    assert!(check_lim_zero(&GeneratingFunction::psi_ml(2.0, SlowlyVarying::one()).unwrap()));
    let linear = GeneratingFunction::from_psi("p", f64::INFINITY, |p| p);
    assert!(!check_lim_zero(&linear));
    let l = SlowlyVarying::custom("ln(p+1)^2", |p| (p + 1.0).ln().powi(2));
    assert!(check_lim_zero(&GeneratingFunction::psi_ml(1.5, l).unwrap()));
}

#[test]
fn generating_function_validation() {
    assert!(matches!(GeneratingFunction::constant(0.0, 3.0), Err(GlsError::InvalidArgument(_))));
    let psi = GeneratingFunction::sqrt_p();
    assert!(psi.validate(0.5).is_ok());
    assert!(psi.validate(2.0).is_err());
}

#[test]
fn psi_csv_has_header_and_full_precision() {
    let psi = GeneratingFunction::sqrt_p();
    let pts = psi.tabulate(&[2.0, 3.0]);
    let mut buf = Vec::new();
    write_psi_csv(&mut buf, &pts).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,value"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row, vec![2.0, psi.eval(2.0)]);
    assert_relative_eq!(row[1], 2f64.sqrt(), max_relative = 1e-15);
}

#[test]
fn moment_profile_csv_round_trip() {
    let m = moments_from_tail(exponential(), &[1.5, 2.0, 4.0]).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let back = MomentProfile::read_csv(buf.as_slice(), f64::INFINITY).unwrap();
    assert!(m.points().zip(back.points()).all(|(a, b)| a == b));
    assert!(back.is_log_convex(1e-9));
}
