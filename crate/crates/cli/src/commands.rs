use std::fs;
use std::path::Path;
use std::sync::Arc;

use gls_core::averaging::{
    average_tail_bound, burkholder_transform, conditional_bound, doob_transform, martingale_bound,
    scaled_average_bound, weak_type_average_bound, BoundReport, IncrementLaw, IndexSpace,
    MartingaleSpec, MartingaleStatistic, RandomFieldSpec, ScaleProfile, TerminalFamily,
};
use gls_core::descriptor::{PsiDescriptor, TailDescriptor};
use gls_core::fenchel::tail_bound_from_gls;
use gls_core::glspace::{interior_grid, GeneratingFunction};
use gls_core::grid::log_space;
use gls_core::mcverify::fit::fit_generalized_normal;
use gls_core::mcverify::verify::doob_check;
use gls_core::mcverify::{
    simulate_conditional, simulate_field_average_samples, simulate_martingale,
    simulate_normalized_sums, verify_domination, BaseVariable, ConditionalSpec, Dependence,
};
use gls_core::tailfun::{empirical_tail, EmpiricalTail, SharedTail, TailFunction};
use serde_json::json;

use crate::config::{Effective, Output};
use crate::error::{CliError, CliResult};
use crate::{BoundCmd, Command, LawArg, MartingaleKindArg, ModelArg, SimCmd, Statistic, TransformKind};

/// Runs one command, writes its manifest, and turns a failed check into exit status 5.
pub fn run(cmd: &Command, eff: &Effective) -> CliResult<()> {
    let mut out = Output::create(&eff.out)?;
    let failure = match cmd {
        Command::Natural { tail, p_max } => natural(&mut out, eff, tail, *p_max)?,
        Command::Bound { pipeline } => bound(&mut out, eff, pipeline)?,
        Command::Transform { kind, psi, p_max, at } => transform(&mut out, eff, *kind, psi, *p_max, at)?,
        Command::Simulate { what } => simulate(&mut out, eff, what)?,
        Command::Verify { report, sim, column } => verify(&mut out, eff, report, sim, column)?,
        Command::Demo { example, alpha } => crate::demo::run(&mut out, eff, *example, *alpha)?,
    };
    out.finish(cmd, eff)?;
    match failure {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn argument_text(text: &str) -> CliResult<String> {
    match text.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::io(path, e)),
        None => Ok(text.to_string()),
    }
}

pub fn parse_tail(text: &str) -> CliResult<SharedTail> {
    Ok(TailDescriptor::parse(&argument_text(text)?)?.build()?)
}

pub fn parse_psi(text: &str) -> CliResult<GeneratingFunction> {
    Ok(PsiDescriptor::parse(&argument_text(text)?)?.build()?)
}

fn parse_theta(text: &str) -> CliResult<ScaleProfile> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut value = None;
    let (mut a, mut b) = (None, None);
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("expected key=value in `{text}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("`{v}` is not a number in `{text}`")))?;
        match k.trim() {
            "value" => value = Some(v),
            "a" => a = Some(v),
            "b" => b = Some(v),
            other => return Err(CliError::Input(format!("unknown theta parameter `{other}`"))),
        }
    }
    match kind.trim() {
        "constant" => Ok(ScaleProfile::Constant { value: value.unwrap_or(1.0) }),
        "linear" => Ok(ScaleProfile::Linear {
            a: a.unwrap_or(0.0),
            b: b.unwrap_or(1.0),
        }),
        other => Err(CliError::Input(format!("unknown theta profile `{other}`"))),
    }
}

pub fn write_report(out: &mut Output, stem: &str, report: &BoundReport) -> CliResult<()> {
    let doc = report.to_document()?;
    out.text(&format!("{stem}.csv"), &doc.curve_csv)?;
    out.json(&format!("{stem}.json"), &doc)
}

/// The empirical tail on `grid` log points up to the largest sample.
pub fn empirical_curve(emp: &EmpiricalTail, grid: usize) -> Vec<Vec<f64>> {
    let hi = emp.max_sample();
    let lo_sample = emp
        .sorted_abs_samples()
        .iter()
        .copied()
        .find(|x| *x > 0.0)
        .unwrap_or(hi);
    let lo = lo_sample.max(hi * 1e-4);
    if !(hi > lo) {
        return vec![vec![hi, emp.eval(hi)]];
    }
    log_space(lo, hi, grid)
        .into_iter()
        .map(|t| vec![t, emp.eval(t)])
        .collect()
}

fn natural(out: &mut Output, eff: &Effective, tail: &str, p_max: f64) -> CliResult<Option<String>> {
    let t = parse_tail(tail)?;
    let g = GeneratingFunction::natural(t.clone())?;
    let b = g.domain_hi();
    let grid = interior_grid(b.min(p_max), eff.grid);
    let rows = grid
        .iter()
        .map(|&p| Ok(vec![p, g.try_eval(p)?]))
        .collect::<CliResult<Vec<_>>>()?;
    out.csv("psi.csv", &["p", "value"], rows)?;
    out.json(
        "summary.json",
        &json!({ "tail": t.describe(), "domain_hi": if b.is_finite() { json!(b) } else { json!("inf") } }),
    )?;
    println!("natural function of {}: domain (1, {b})", t.describe());
    Ok(None)
}

fn bound(out: &mut Output, eff: &Effective, cmd: &BoundCmd) -> CliResult<Option<String>> {
    let space = || IndexSpace::unit_interval(eff.nodes);
    let report = match cmd {
        BoundCmd::Average { tail } => {
            average_tail_bound(&RandomFieldSpec::identical(space()?, parse_tail(tail)?))?
        }
        BoundCmd::Conditional { tail } => conditional_bound(&parse_tail(tail)?)?,
        BoundCmd::Weak { tail, q } => {
            weak_type_average_bound(&RandomFieldSpec::identical(space()?, parse_tail(tail)?), *q)?
        }
        BoundCmd::Scaled { psi, theta } => {
            let g = parse_psi(psi)?;
            let base: SharedTail = Arc::new(tail_bound_from_gls(&g, 1.0)?);
            let field = RandomFieldSpec::scaled(space()?, base, parse_theta(theta)?)?;
            scaled_average_bound(&field, &g)?
        }
        BoundCmd::FromPsi { psi, norm } => {
            let g = parse_psi(psi)?;
            let curve = tail_bound_from_gls(&g, *norm)?;
            BoundReport::new(
                "bound from generating function",
                Arc::new(curve.clone()),
                Vec::new(),
                curve.threshold(),
                vec![
                    format!("psi: {}", g.label()),
                    format!("bound(t) = exp(-h*(ln(t / {norm})))"),
                ],
            )?
        }
        BoundCmd::Martingale { tail, which, kind } => {
            let spec = match kind {
                MartingaleKindArg::UniformlyIntegrable => {
                    MartingaleSpec::uniformly_integrable(TerminalFamily::Sine, vec![1])?
                }
                MartingaleKindArg::IncrementBuilt => {
                    MartingaleSpec::increment_built(IncrementLaw::Gaussian, vec![1.0])?
                }
            };
            let which = match which {
                Statistic::Term => MartingaleStatistic::Term,
                Statistic::Maximum => MartingaleStatistic::Maximum,
                Statistic::NormalizedMax => MartingaleStatistic::NormalizedMax,
            };
            martingale_bound(&spec, &parse_tail(tail)?, which)?
        }
    };
    write_report(out, "report", &report)?;
    println!("{}: valid from t = {:.6e}", report.label(), report.validity_from());
    for c in report.constants() {
        println!("  {} = {:.10e} ({})", c.name, c.value, c.note);
    }
    Ok(None)
}

fn transform(
    out: &mut Output,
    eff: &Effective,
    kind: TransformKind,
    psi: &str,
    p_max: f64,
    at: &[f64],
) -> CliResult<Option<String>> {
    let g = parse_psi(psi)?;
    let t = match kind {
        TransformKind::Doob => doob_transform(&g),
        TransformKind::Burkholder => burkholder_transform(&g),
    };
    let grid = if at.is_empty() {
        interior_grid(t.domain_hi().min(p_max), eff.grid)
    } else {
        at.to_vec()
    };
    let rows = grid
        .iter()
        .map(|&p| Ok(vec![p, t.try_eval(p)?]))
        .collect::<CliResult<Vec<_>>>()?;
    if !at.is_empty() {
        for r in &rows {
            println!("{}({:.6}) = {:.12}", t.label(), r[0], r[1]);
        }
    }
    out.csv("psi.csv", &["p", "value"], rows)?;
    Ok(None)
}

fn simulate(out: &mut Output, eff: &Effective, what: &SimCmd) -> CliResult<Option<String>> {
    let cfg = eff.sim_config();
    match what {
        SimCmd::Field {
            tail,
            model,
            correlation_length,
        } => {
            let field = RandomFieldSpec::identical(IndexSpace::unit_interval(eff.nodes)?, parse_tail(tail)?);
            let dep = match model {
                ModelArg::Independent => Dependence::Independent,
                ModelArg::CommonFactor => Dependence::CommonFactor,
                ModelArg::GaussianCopula => Dependence::GaussianCopula {
                    correlation_length: *correlation_length,
                },
            };
            let samples = simulate_field_average_samples(&cfg, &field, dep)?;
            let emp = empirical_tail(&samples, eff.confidence)?;
            out.csv("samples.csv", &["value"], samples.iter().map(|v| vec![*v]))?;
            out.csv("tail.csv", &["t", "tail"], empirical_curve(&emp, eff.grid))?;
            out.json(
                "summary.json",
                &json!({ "n": emp.n(), "band_epsilon": emp.band_epsilon(), "max": emp.max_sample() }),
            )?;
        }
        SimCmd::Conditional { alpha, tail, cells } => {
            if *cells == 0 {
                return Err(CliError::Input("--cells must be positive".into()));
            }
            let base = match (alpha, tail) {
                (Some(a), None) => BaseVariable::Terminal(TerminalFamily::PowerSingularity { alpha: *a }),
                (None, Some(t)) => BaseVariable::Quantile(parse_tail(t)?),
                _ => return Err(CliError::Input("give exactly one of --alpha or --tail".into())),
            };
            let cuts = (0..=*cells).map(|i| i as f64 / *cells as f64).collect();
            let spec = ConditionalSpec::new(base, cuts)?;
            let sim = simulate_conditional(&cfg, &spec)?;
            out.csv(
                "samples.csv",
                &["eta", "nu"],
                sim.eta.iter().zip(&sim.nu).map(|(e, n)| vec![*e, *n]),
            )?;
            let exact = sim.exact.clone().unwrap_or_else(|| vec![f64::NAN; sim.cell_means.len()]);
            out.csv(
                "cells.csv",
                &["lo", "hi", "count", "mean", "std_error", "exact"],
                spec.cells().iter().enumerate().map(|(c, (a, b))| {
                    vec![*a, *b, sim.cell_counts[c] as f64, sim.cell_means[c], sim.cell_std_errors[c], exact[c]]
                }),
            )?;
            let emp = empirical_tail(&sim.nu, eff.confidence)?;
            out.csv("tail.csv", &["t", "tail"], empirical_curve(&emp, eff.grid))?;
        }
        SimCmd::Martingale {
            increments,
            horizon,
            terminal,
            levels,
        } => {
            let spec = match (increments, terminal) {
                (Some(law), None) => {
                    let law = match law {
                        LawArg::Gaussian => IncrementLaw::Gaussian,
                        LawArg::Rademacher => IncrementLaw::Rademacher,
                    };
                    MartingaleSpec::increment_built(law, vec![1.0; *horizon])?
                }
                (None, Some(t)) => {
                    let fam = parse_terminal(t)?;
                    MartingaleSpec::uniformly_integrable(fam, (1..=*levels).collect())?
                }
                _ => return Err(CliError::Input("give exactly one of --increments or --terminal".into())),
            };
            let sim = simulate_martingale(&cfg, &spec)?;
            out.csv(
                "samples.csv",
                &["terminal", "running_max", "square_variation"],
                (0..sim.terminal.len()).map(|i| vec![sim.terminal[i], sim.running_max[i], sim.square_variation[i]]),
            )?;
            out.csv(
                "sigma.csv",
                &["n", "sigma"],
                sim.sigma_profile.iter().enumerate().map(|(k, s)| vec![(k + 1) as f64, *s]),
            )?;
            out.csv(
                "paths.csv",
                &["path", "n", "value"],
                sim.sample_paths.iter().enumerate().flat_map(|(j, p)| {
                    p.iter().enumerate().map(move |(k, v)| vec![j as f64, (k + 1) as f64, *v])
                }),
            )?;
            let checks: Vec<_> = [2.0, 4.0].iter().map(|&p| doob_check(&sim, p)).collect();
            out.json("summary.json", &json!({ "sigma_n": sim.sigma_n(), "doob": checks }))?;
        }
        SimCmd::Sums { q, n } => {
            let sums = simulate_normalized_sums(*q, n, &cfg)?;
            let mut summary = Vec::new();
            for s in &sums {
                out.csv(&format!("tail_n{}.csv", s.n), &["t", "tail"], empirical_curve(&s.tail, eff.grid))?;
                let fit = fit_generalized_normal(&s.tail, 0.5, 100).ok().map(|f| f.shape);
                summary.push(json!({ "n": s.n, "fitted_shape": fit, "max": s.tail.max_sample() }));
            }
            out.json("summary.json", &summary)?;
        }
    }
    Ok(None)
}

fn parse_terminal(text: &str) -> CliResult<TerminalFamily> {
    if text.trim() == "sine" {
        return Ok(TerminalFamily::Sine);
    }
    let alpha = text
        .trim()
        .strip_prefix("power:alpha=")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| CliError::Input(format!("terminal must be `sine` or `power:alpha=A`, got `{text}`")))?;
    Ok(TerminalFamily::PowerSingularity { alpha })
}

pub fn read_sample_column(path: &Path, column: &str) -> CliResult<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Input(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::Input(format!("{}: no column `{column}`", path.display())))?;
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            rec.get(idx)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Input(format!("{}: bad value on row {}", path.display(), i + 2)))
        })
        .collect()
}

fn verify(out: &mut Output, eff: &Effective, report: &Path, samples: &Path, column: &str) -> CliResult<Option<String>> {
    let text = fs::read_to_string(report).map_err(|e| CliError::io(report, e))?;
    let report = BoundReport::from_json(&text)?;
    let values = read_sample_column(samples, column)?;
    let emp = empirical_tail(&values, eff.confidence)?;
    let verdict = verify_domination(&emp, &report)?;
    out.json(
        "verdict.json",
        &json!({
            "verdict": if verdict.pass { "PASS" } else { "FAIL" },
            "details": verdict,
            "report": report.label(),
            "samples": samples.display().to_string(),
            "column": column,
        }),
    )?;
    println!(
        "{}: worst margin {:.6e} at t = {:.6e} over {} points",
        if verdict.pass { "PASS" } else { "FAIL" },
        verdict.worst_margin,
        verdict.worst_t,
        verdict.checked_points
    );
    Ok((!verdict.pass).then(|| format!("bound violated at t = {:.6e}", verdict.worst_t)))
}
