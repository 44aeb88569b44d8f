//! Built-in end-to-end reproductions. Each example writes its curves under
//! `<out>/<example>/` and a `checks.json`; any failed check makes the run fail.

use std::sync::Arc;

use gls_core::averaging::{
    average_tail_bound, conditional_bound, weak_type_average_bound, BoundReport, IndexSpace,
    RandomFieldSpec,
};
use gls_core::mcverify::fit::{fit_generalized_normal, log_log_slope, log_power_exponent};
use gls_core::mcverify::sim::normalized_source_variance;
use gls_core::mcverify::verify::{mean_and_se, sample_abs_moment, within_band};
use gls_core::mcverify::{
    sample_moment_growth, simulate_conditional, simulate_field_average, simulate_normalized_sums,
    verify_domination, BaseVariable, ConditionalSpec, Dependence,
};
use gls_core::tailfun::{
    empirical_tail, ParetoTail, PowerLogTail, ScaledTail, SharedTail, SlowlyVarying,
    StretchedExpTail, WeibullLogTail,
};
use serde::Serialize;

use crate::commands::{empirical_curve, write_report};
use crate::config::{Effective, Output};
use crate::error::CliResult;
use crate::DemoName;

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    target: String,
    pass: bool,
}

struct Ctx<'a> {
    out: &'a mut Output,
    eff: &'a Effective,
    dir: &'static str,
    checks: Vec<Check>,
}

impl Ctx<'_> {
    fn check(&mut self, name: &str, value: f64, target: &str, pass: bool) {
        println!(
            "{} {name}: {value:.6} [{target}] {}",
            self.dir,
            if pass { "PASS" } else { "FAIL" }
        );
        self.checks.push(Check {
            name: name.to_string(),
            value,
            target: target.to_string(),
            pass,
        });
    }

    fn file(&self, name: &str) -> String {
        format!("{}/{name}", self.dir)
    }

    fn report(&mut self, stem: &str, report: &BoundReport) -> CliResult<()> {
        let name = self.file(stem);
        write_report(self.out, &name, report)
    }

    fn tail_csv(&mut self, name: &str, rows: Vec<Vec<f64>>) -> CliResult<()> {
        let name = self.file(name);
        self.out.csv(&name, &["t", "tail"], rows)
    }
}

const MODELS: [(&str, Dependence); 3] = [
    ("independent", Dependence::Independent),
    ("common-factor", Dependence::CommonFactor),
    ("gaussian-copula", Dependence::GaussianCopula { correlation_length: 0.2 }),
];

fn weibull(m: f64) -> CliResult<SharedTail> {
    Ok(Arc::new(WeibullLogTail::new(m, 1.0, SlowlyVarying::one())?))
}

fn power_log(beta: f64, gamma: f64) -> CliResult<SharedTail> {
    Ok(Arc::new(PowerLogTail::new(beta, gamma, SlowlyVarying::one())?))
}

fn scaled(t: SharedTail, s: f64) -> SharedTail {
    Arc::new(ScaledTail::new(t, s))
}

pub fn run(out: &mut Output, eff: &Effective, which: DemoName, alpha: f64) -> CliResult<Option<String>> {
    let list = match which {
        DemoName::All => vec![
            DemoName::Example21,
            DemoName::Example22,
            DemoName::Example23,
            DemoName::Example31,
            DemoName::Example32,
            DemoName::Example33,
        ],
        one => vec![one],
    };
    let mut failed = Vec::new();
    for name in list {
        let dir = match name {
            DemoName::Example21 => "example-2.1",
            DemoName::Example22 => "example-2.2",
            DemoName::Example23 => "example-2.3",
            DemoName::Example31 => "example-3.1",
            DemoName::Example32 => "example-3.2",
            DemoName::Example33 => "example-3.3",
            DemoName::All => unreachable!("expanded above"),
        };
        let mut ctx = Ctx {
            out,
            eff,
            dir,
            checks: Vec::new(),
        };
        match name {
            DemoName::Example21 => spatial_weibull(&mut ctx)?,
            DemoName::Example22 => spatial_power_log(&mut ctx)?,
            DemoName::Example23 => normalized_sums(&mut ctx)?,
            DemoName::Example31 => conditional_weibull(&mut ctx)?,
            DemoName::Example32 => conditional_power_log(&mut ctx)?,
            DemoName::Example33 => singular_conditional(&mut ctx, alpha)?,
            DemoName::All => unreachable!("expanded above"),
        }
        let checks = std::mem::take(&mut ctx.checks);
        failed.extend(checks.iter().filter(|c| !c.pass).map(|c| format!("{dir}: {}", c.name)));
        let name = ctx.file("checks.json");
        out.json(&name, &checks)?;
    }
    Ok((!failed.is_empty()).then(|| failed.join("; ")))
}

fn shape_checks(ctx: &mut Ctx, conditional: bool) -> CliResult<()> {
    for m in [1.5, 2.0, 3.0] {
        let q = weibull(m)?;
        let report = if conditional {
            conditional_bound(&q)?
        } else {
            average_tail_bound(&RandomFieldSpec::identical(IndexSpace::unit_interval(ctx.eff.nodes)?, q))?
        };
        ctx.report(&format!("bound_m{m}"), &report)?;
        let slope = log_log_slope(report.bound().as_ref(), 100.0, 1000.0, 40)?;
        ctx.check(
            &format!("log-log slope m={m}"),
            slope,
            &format!("{m} +- 0.01 on t in [100, 1000]"),
            (slope - m).abs() <= 0.01,
        );
    }
    Ok(())
}

fn gamma_checks(ctx: &mut Ctx, conditional: bool) -> CliResult<()> {
    for (beta, gamma) in [(3.0, 0.0), (2.5, 1.0), (2.0, 0.5)] {
        let q = power_log(beta, gamma)?;
        let report = if conditional {
            conditional_bound(&q)?
        } else {
            average_tail_bound(&RandomFieldSpec::identical(IndexSpace::unit_interval(ctx.eff.nodes)?, q))?
        };
        ctx.report(&format!("bound_beta{beta}_gamma{gamma}"), &report)?;
        let g = log_power_exponent(report.bound().as_ref(), beta, 100.0, 1000.0, 40)?;
        ctx.check(
            &format!("log-power exponent beta={beta} gamma={gamma}"),
            g,
            &format!("{} +- 0.05 on ln t in [100, 1000]", gamma + 1.0),
            (g - gamma - 1.0).abs() <= 0.05,
        );
    }
    Ok(())
}

fn field_domination(ctx: &mut Ctx, label: &str, q: SharedTail) -> CliResult<()> {
    let field = RandomFieldSpec::identical(IndexSpace::unit_interval(ctx.eff.nodes)?, q);
    let report = average_tail_bound(&field)?;
    ctx.report(&format!("bound_{label}"), &report)?;
    let cfg = ctx.eff.sim_config();
    for (name, dep) in MODELS {
        let emp = simulate_field_average(&cfg, &field, dep)?;
        ctx.tail_csv(&format!("empirical_{label}_{name}.csv"), empirical_curve(&emp, ctx.eff.grid))?;
        let v = verify_domination(&emp, &report)?;
        ctx.check(&format!("domination {label} {name}"), v.worst_margin, "worst margin <= 0", v.pass);
    }
    Ok(())
}

fn conditional_domination(ctx: &mut Ctx, label: &str, r: SharedTail) -> CliResult<()> {
    let report = conditional_bound(&r)?;
    ctx.report(&format!("bound_{label}"), &report)?;
    let cuts = (0..=16).map(|i| i as f64 / 16.0).collect();
    let spec = ConditionalSpec::new(BaseVariable::Quantile(r), cuts)?;
    let sim = simulate_conditional(&ctx.eff.sim_config(), &spec)?;
    let emp = empirical_tail(&sim.nu, ctx.eff.confidence)?;
    ctx.tail_csv(&format!("empirical_{label}.csv"), empirical_curve(&emp, ctx.eff.grid))?;
    let v = verify_domination(&emp, &report)?;
    ctx.check(&format!("domination {label}"), v.worst_margin, "worst margin <= 0", v.pass);
    for p in [1.5, 2.0, 3.0] {
        let ratio = sample_abs_moment(&sim.nu, p) / sample_abs_moment(&sim.eta, p);
        ctx.check(&format!("Jensen E|nu|^{p} / E|eta|^{p}"), ratio, "<= 1", ratio <= 1.0);
    }
    Ok(())
}

fn spatial_weibull(ctx: &mut Ctx) -> CliResult<()> {
    shape_checks(ctx, false)?;
    field_domination(ctx, "weibull_m2_x4", scaled(weibull(2.0)?, 4.0))
}

fn spatial_power_log(ctx: &mut Ctx) -> CliResult<()> {
    gamma_checks(ctx, false)?;
    field_domination(ctx, "power_b3_x10", scaled(power_log(3.0, 0.0)?, 10.0))?;

    let pareto: SharedTail = Arc::new(ParetoTail { c: 1.0, q: 2.0 });
    let field = RandomFieldSpec::identical(IndexSpace::unit_interval(ctx.eff.nodes)?, pareto);
    let report = weak_type_average_bound(&field, 2.0)?;
    ctx.report("bound_weak_q2", &report)?;
    let cfg = ctx.eff.sim_config();
    for (name, dep) in MODELS {
        let emp = simulate_field_average(&cfg, &field, dep)?;
        let v = verify_domination(&emp, &report)?;
        ctx.check(&format!("weak-type domination {name}"), v.worst_margin, "worst margin <= 0", v.pass);
    }
    Ok(())
}

fn normalized_sums(ctx: &mut Ctx) -> CliResult<()> {
    let q = 3.0;
    let sums = simulate_normalized_sums(q, &[1, 16, 1024], &ctx.eff.sim_config())?;
    for s in &sums {
        ctx.tail_csv(&format!("empirical_n{}.csv", s.n), empirical_curve(&s.tail, ctx.eff.grid))?;
        if s.n > 1 {
            let fit = fit_generalized_normal(&s.tail, 0.5, 100)?;
            println!("{} fitted tail exponent n={}: {:.4}", ctx.dir, s.n, fit.shape);
        }
    }
    let source: SharedTail = Arc::new(StretchedExpTail { q, scale: 1.0 });
    let ys: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
    let in_band = within_band(&sums[0].tail, source.as_ref(), &ys);
    ctx.check("n=1 tail within DKW band of exp(-y^3)", in_band as u8 as f64, "1", in_band);

    let last = &sums[sums.len() - 1];
    let k = fit_generalized_normal(&last.tail, 0.5, 100)?.shape;
    ctx.check("fitted tail exponent n=1024", k, "[1.8, 2.2] and < 3", (1.8..=2.2).contains(&k) && k < q);

    let n = last.samples.len() as f64;
    let p_hat = last.samples.iter().filter(|x| **x > 2.0).count() as f64 / n;
    let lower = p_hat - 1.645 * (p_hat * (1.0 - p_hat) / n).sqrt();
    let floor = 5.0 * (-8.0f64).exp();
    ctx.check("P(S_1024 > 2) lower 95% bound", lower, &format!("> 5 exp(-8) = {floor:.6e}"), lower > floor);

    let sq: Vec<f64> = last.samples.iter().map(|x| x * x).collect();
    let (m2, se) = mean_and_se(&sq);
    let target = normalized_source_variance(q);
    ctx.check(
        "variance of S_1024",
        m2,
        &format!("{target:.6} within 3 SE ({se:.2e})"),
        (m2 - target).abs() <= 3.0 * se,
    );
    Ok(())
}

fn conditional_weibull(ctx: &mut Ctx) -> CliResult<()> {
    shape_checks(ctx, true)?;
    conditional_domination(ctx, "weibull_m2_x4", scaled(weibull(2.0)?, 4.0))
}

fn conditional_power_log(ctx: &mut Ctx) -> CliResult<()> {
    gamma_checks(ctx, true)?;
    conditional_domination(ctx, "power_b3_x10", scaled(power_log(3.0, 0.0)?, 10.0))
}

fn singular_conditional(ctx: &mut Ctx, alpha: f64) -> CliResult<()> {
    let spec = ConditionalSpec::power_singularity_halves(alpha)?;
    let sim = simulate_conditional(&ctx.eff.sim_config(), &spec)?;
    let exact = spec.exact_cell_values().expect("closed form for the power singularity");
    let name = ctx.file("cells.csv");
    ctx.out.csv(
        &name,
        &["lo", "hi", "count", "mean", "std_error", "exact"],
        spec.cells().iter().enumerate().map(|(c, (a, b))| {
            vec![*a, *b, sim.cell_counts[c] as f64, sim.cell_means[c], sim.cell_std_errors[c], exact[c]]
        }),
    )?;
    let labels = ["2^a/(1-a) on (0, 1/2]", "(2-2^a)/(1-a) on (1/2, 1)"];
    for c in 0..2 {
        let z = (sim.cell_means[c] - exact[c]) / sim.cell_std_errors[c];
        ctx.check(
            &format!("cell mean {}", labels[c]),
            sim.cell_means[c],
            &format!("exact {:.10} within 3 SE (z = {z:.3})", exact[c]),
            z.abs() <= 3.0,
        );
    }
    let top = exact[0] + 3.0 * sim.cell_std_errors[0];
    let max_nu = sim.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ctx.check("nu is bounded", max_nu, &format!("<= {top:.6}"), max_nu <= top);

    let p = 1.0 / alpha + 0.1;
    let n_list = [10_000, 100_000, 1_000_000];
    let growth = sample_moment_growth(spec.base(), p, &n_list, 64, ctx.eff.seed)?;
    for (n, g) in n_list.iter().zip(&growth) {
        println!("{} mean ln sample E|eta|^{p:.3} at n={n}: {g:.6}", ctx.dir);
    }
    let increasing = growth.windows(2).all(|w| w[1] > w[0]);
    ctx.check(
        &format!("sample E|eta|^{p:.3} keeps growing"),
        growth[2] - growth[0],
        "strictly increasing in n",
        increasing,
    );
    Ok(())
}
