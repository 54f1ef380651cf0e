use std::path::Path;

use anyhow::Result;
use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use wptlab::delta::{atomwise_distance, run_delta_scheme, TangentMeasure};
use wptlab::geodesic::{continuity_residual, regularity_report, GeodesicPath};
use wptlab::manifold::{grad, potential_of, ScalarField, VectorField};
use wptlab::measure::otto_norm;
use wptlab::scenario::{DeltaScenario, Scenario};
use wptlab::scheme::{build_legs, compare_to_pde, run_scheme_on, scheme_diagnostics, SchemeOptions, SchemeOutput};
use wptlab::transport_pde::{pairing_series, solve_parallel_pde_with, Direction, TransportOptions, TransportSolution};
use wptlab::weak::{weak_residual, weak_residuals, TestBattery, Trig};

use crate::config::{Config, SchemaError};
use crate::table::{write_field, Check, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    GeodesicCheck,
    PdeTransport,
    SchemeTransport,
    Compare,
    DeltaTransport,
    WeakResidual,
    Sweep,
}

pub struct Report {
    pub table: Table,
    pub checks: Vec<Check>,
    pub metrics: Map<String, Value>,
    pub fields: Vec<(String, ScalarField)>,
}

impl Report {
    fn new(table: Table) -> Self {
        Self {
            table,
            checks: Vec::new(),
            metrics: Map::new(),
            fields: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `results.csv`, `summary.json` and, if requested, `fields/*.csv`.
    pub fn write(&self, out: &Path, command: Command, config: &Config) -> Result<()> {
        std::fs::create_dir_all(out)?;
        self.table.write_csv(&out.join("results.csv"))?;
        if config.output.fields && !self.fields.is_empty() {
            let dir = out.join("fields");
            std::fs::create_dir_all(&dir)?;
            for (name, f) in &self.fields {
                write_field(&dir.join(format!("{name}.csv")), f)?;
            }
        }
        let summary = json!({
            "command": command,
            "config": config,
            "rows": self.table.rows.len(),
            "passed": self.passed(),
            "checks": self.checks,
            "metrics": self.metrics,
        });
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        std::fs::write(out.join("summary.json"), text)?;
        Ok(())
    }
}

pub fn execute(command: Command, config: &Config) -> Result<Report> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.experiment.threads {
            b = b.num_threads(n);
        }
        b.build()?
    };
    pool.install(|| match command {
        Command::GeodesicCheck => geodesic_check(config),
        Command::PdeTransport => pde_transport(config),
        Command::SchemeTransport => scheme_transport(config),
        Command::Compare => compare(config),
        Command::DeltaTransport => delta_transport(config),
        Command::WeakResidual => weak(config),
        Command::Sweep => sweep(config),
    })
}

fn q_label(q: usize) -> String {
    format!("Q={q}")
}

/// Every Q must split the steps into whole legs, and into thirds of legs
/// when output samples are compared on the path grid.
fn check_divisible(config: &Config, steps: usize, per_leg: usize) -> Result<()> {
    for &q in &config.discretization.q {
        if steps % (per_leg * q) != 0 {
            return Err(SchemaError(format!("steps = {steps} is not divisible by {per_leg}·Q for Q = {q}")).into());
        }
    }
    Ok(())
}

/// `0, stride, 2·stride, …` and always the last sample.
fn sample_indices(steps: usize, stride: usize) -> Vec<usize> {
    let mut samples: Vec<usize> = (0..=steps).step_by(stride).collect();
    if samples.last() != Some(&steps) {
        samples.push(steps);
    }
    samples
}

fn grid_path(config: &Config) -> Result<(wptlab::scenario::GridScenario, GeodesicPath)> {
    let scenario = config.grid_scenario()?;
    let path = scenario.path()?;
    Ok((scenario, path))
}

fn backward_pde(config: &Config, path: &GeodesicPath, eta1: &ScalarField) -> Result<TransportSolution> {
    let opts = TransportOptions {
        initial_guess: config.experiment.initial_guess,
        ..TransportOptions::default()
    };
    Ok(solve_parallel_pde_with(path, eta1, Direction::Backward, &opts)?)
}

fn scheme_options(config: &Config) -> SchemeOptions {
    SchemeOptions {
        tol: config.discretization.scheme_tol,
        max_iter: config.discretization.max_iter,
    }
}

fn run_q(config: &Config, path: &GeodesicPath, g1: &VectorField, q: usize) -> Result<SchemeOutput> {
    let legs = build_legs(path, q)?;
    Ok(run_scheme_on(path, &legs, g1, &scheme_options(config))?)
}

fn push_contraction(report: &mut Report, qs: &[usize], errs: &[f64], quantity: &str, ratio: f64) {
    for (w, e) in qs.windows(2).zip(errs.windows(2)) {
        let value = if e[0] == 0.0 { 0.0 } else { e[1] / e[0] };
        report.checks.push(Check::max(q_label(w[1]), format!("{quantity} ratio"), value, ratio));
    }
}

fn geodesic_check(config: &Config) -> Result<Report> {
    let (_, path) = grid_path(config)?;
    let steps = path.steps();
    let stride = config.stride(steps);
    let tol = &config.tolerances;
    let mut report = Report::new(Table::new(&["j", "t", "mass_error", "min_density", "continuity_residual"]));
    let samples = sample_indices(steps, stride);
    let rows: Vec<(usize, f64, f64, f64)> = samples
        .par_iter()
        .map(|&j| {
            let mu = path.density(j);
            Ok((j, (mu.mass() - 1.0).abs(), mu.min(), continuity_residual(&path, j)?))
        })
        .collect::<Result<_>>()?;
    for (j, mass, min, res) in rows {
        let label = format!("j={j}");
        report.checks.push(Check::max(label.clone(), "mass_error", mass, tol.mass));
        report.checks.push(Check::max(label, "continuity_residual", res, tol.continuity_residual));
        report.table.push(vec![j.into(), path.time(j).into(), mass.into(), min.into(), res.into()]);
    }
    report.metrics.insert("min_extended_jacobian".into(), json!(path.min_extended_jacobian()));
    report.metrics.insert("regularity".into(), json!(regularity_report(&path)));
    report.metrics.insert("generator_continuity_residual".into(), json!(path.continuity_residual()));
    if config.output.fields {
        report.fields.push(("density_0".into(), path.density(0).field().clone()));
        report.fields.push(("density_1".into(), path.density(steps).field().clone()));
        report.fields.push(("potential_0".into(), path.potential(0).clone()));
    }
    Ok(report)
}

fn pde_transport(config: &Config) -> Result<Report> {
    let (scenario, path) = grid_path(config)?;
    let eta1 = scenario.terminal_potential()?;
    let sol = backward_pde(config, &path, &eta1)?;
    let series = pairing_series(&path, &sol, &sol)?;
    let steps = path.steps();
    let reference = series[steps];
    let change = |s: f64| if reference == 0.0 { 0.0 } else { (s - reference).abs() / reference };
    let mut report = Report::new(Table::new(&["j", "t", "pairing", "relative_change"]));
    for j in sample_indices(steps, config.stride(steps)) {
        report
            .table
            .push(vec![j.into(), path.time(j).into(), series[j].into(), change(series[j]).into()]);
    }
    let worst = series.iter().map(|&s| change(s)).fold(0.0, f64::max);
    report.checks.push(Check::max("all", "pairing_drift", worst, config.tolerances.pairing_drift));
    report.metrics.insert("pairing_drift".into(), json!(worst));
    report.metrics.insert("norm_0".into(), json!(series[0].sqrt()));
    report.metrics.insert("norm_1".into(), json!(reference.sqrt()));
    if config.output.fields {
        report.fields.push(("eta_0".into(), sol.eta(0).clone()));
        report.fields.push(("eta_1".into(), sol.eta(steps).clone()));
    }
    Ok(report)
}

fn scheme_transport(config: &Config) -> Result<Report> {
    let (scenario, path) = grid_path(config)?;
    check_divisible(config, path.steps(), 1)?;
    let g1 = scenario.terminal_field()?;
    let n1 = otto_norm(path.density(path.steps()), &g1)?;
    let qs = &config.discretization.q;
    let rows: Vec<_> = qs
        .par_iter()
        .map(|&q| {
            let legs = build_legs(&path, q)?;
            let out = run_scheme_on(&path, &legs, &g1, &scheme_options(config))?;
            let diag = scheme_diagnostics(&out, &legs)?;
            let n0 = otto_norm(path.density(0), out.initial())?;
            Ok((q, out, diag, n0))
        })
        .collect::<Result<Vec<_>>>()?;
    let tol = &config.tolerances;
    let mut report = Report::new(Table::new(&[
        "Q",
        "norm_0",
        "norm_1",
        "norm_drift",
        "max_iterations",
        "wl_gap",
        "ab_gap",
        "transition_gap",
        "jacobi_derivative",
    ]));
    for (q, out, diag, n0) in rows {
        let label = q_label(q);
        let iters = out.iterations().iter().copied().max().unwrap_or(0);
        report.checks.push(Check::max(label.clone(), "norm_drift", out.norm_drift(), tol.norm_drift));
        report.checks.push(Check::min(label, "norm_0", n0, n1 - tol.norm_deficit / q as f64));
        report.table.push(vec![
            q.into(),
            n0.into(),
            n1.into(),
            out.norm_drift().into(),
            iters.into(),
            diag.max_wl_gap().into(),
            diag.max_ab_gap().into(),
            diag.max_transition_gap().into(),
            diag.max_jacobi_derivative().into(),
        ]);
        if config.output.fields {
            report.fields.push((format!("scheme_0_q{q}"), potential_of(out.initial())?));
        }
    }
    Ok(report)
}

fn compare(config: &Config) -> Result<Report> {
    let (scenario, path) = grid_path(config)?;
    check_divisible(config, path.steps(), 3)?;
    let eta1 = scenario.terminal_potential()?;
    let g1 = grad(&eta1);
    let n1 = otto_norm(path.density(path.steps()), &g1)?;
    let sol = backward_pde(config, &path, &eta1)?;
    let qs = &config.discretization.q;
    let rows: Vec<_> = qs
        .par_iter()
        .map(|&q| {
            let out = run_q(config, &path, &g1, q)?;
            Ok((q, compare_to_pde(&path, &out, &sol)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::new(Table::new(&["Q", "err_0", "err_path", "relative_err_0"]));
    let mut errs = Vec::new();
    for (q, cmp) in rows {
        let rel = if n1 == 0.0 { cmp.err_0 } else { cmp.err_0 / n1 };
        report.checks.push(Check::max(q_label(q), "relative_err_0", rel, config.tolerances.relative_err_0));
        report.table.push(vec![q.into(), cmp.err_0.into(), cmp.err_path.into(), rel.into()]);
        errs.push(cmp.err_0);
    }
    push_contraction(&mut report, qs, &errs, "err_0", config.tolerances.contraction);
    if config.output.fields {
        report.fields.push(("pde_eta_0".into(), sol.eta(0).clone()));
    }
    Ok(report)
}

fn measure_norm(nu: &TangentMeasure) -> f64 {
    nu.atoms().iter().map(|(w, p)| p * w.norm().powi(2)).sum::<f64>().sqrt()
}

fn delta_transport(config: &Config) -> Result<Report> {
    let Scenario::Delta(scenario) = Scenario::builtin(config.scenario.name) else {
        return Err(SchemaError(format!("{:?} is not a delta scenario", config.scenario.name)).into());
    };
    let scenario = DeltaScenario {
        manifold: config.manifold.unwrap_or(scenario.manifold),
        ..scenario
    };
    let nu1 = scenario.terminal_measure()?;
    let n1 = measure_norm(&nu1);
    let qs = &config.discretization.q;
    let rows: Vec<_> = qs
        .iter()
        .map(|&q| Ok((q, run_delta_scheme(&scenario.geodesic(q)?, &nu1)?)))
        .collect::<Result<Vec<_>>>()?;
    let tol = &config.tolerances;
    let mut report = Report::new(Table::new(&["Q", "err", "norm_0", "norm_1", "reference_norm"]));
    let mut errs = Vec::new();
    let last = *qs.iter().max().expect("validated nonempty");
    for (q, run) in rows {
        let n0 = measure_norm(&run.nu0);
        if q == last {
            report.checks.push(Check::max(q_label(q), "err", run.err, tol.delta_err));
        }
        report.checks.push(Check::min(q_label(q), "norm_0", n0, n1 - tol.norm_deficit / q as f64));
        debug_assert_eq!(run.err, atomwise_distance(&run.nu0, &run.reference));
        report
            .table
            .push(vec![q.into(), run.err.into(), n0.into(), n1.into(), measure_norm(&run.reference).into()]);
        errs.push(run.err);
    }
    push_contraction(&mut report, qs, &errs, "err", tol.contraction);
    Ok(report)
}

fn describe_mode(mode: &Trig) -> String {
    match mode {
        Trig::Constant => "1".into(),
        Trig::Cos(k) => format!("cos({} {})", k[0], k[1]),
        Trig::Sin(k) => format!("sin({} {})", k[0], k[1]),
    }
}

fn weak(config: &Config) -> Result<Report> {
    let (scenario, path) = grid_path(config)?;
    let eta1 = scenario.terminal_potential()?;
    let sol = backward_pde(config, &path, &eta1)?;
    let steps = path.steps();
    let samples: Vec<(usize, VectorField)> = (0..=steps).map(|j| (j, sol.gradient(j))).collect();
    let mut v1 = sol.gradient(steps);
    let bump = config.experiment.corrupt_endpoint;
    if bump != 0.0 {
        v1 = v1.add_scaled(bump, &grad(&Trig::Sin([1, 0]).sample(path.grid())));
    }
    let battery = TestBattery::standard(path.grid());
    let residuals = weak_residuals(&path, &samples, &sol.gradient(0), &v1, &battery)?;
    let mut report = Report::new(Table::new(&["index", "power", "mode", "residual"]));
    for (i, (f, r)) in battery.functions().iter().zip(&residuals).enumerate() {
        report
            .table
            .push(vec![i.into(), (f.power as usize).into(), describe_mode(&f.mode).into(), (*r).into()]);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    report.checks.push(Check::max("all", "weak_residual", worst, config.tolerances.weak_residual));
    report.metrics.insert("weak_residual".into(), json!(worst));
    report.metrics.insert("battery_size".into(), json!(battery.len()));
    Ok(report)
}

fn sweep(config: &Config) -> Result<Report> {
    let (scenario, path) = grid_path(config)?;
    check_divisible(config, path.steps(), 3)?;
    let eta1 = scenario.terminal_potential()?;
    let g1 = grad(&eta1);
    let n1 = otto_norm(path.density(path.steps()), &g1)?;
    let sol = backward_pde(config, &path, &eta1)?;
    let battery = TestBattery::standard(path.grid());
    let qs = &config.discretization.q;
    let rows: Vec<_> = qs
        .par_iter()
        .map(|&q| {
            let out = run_q(config, &path, &g1, q)?;
            let cmp = compare_to_pde(&path, &out, &sol)?;
            let samples = out.path_samples().expect("divisibility checked");
            let wr = weak_residual(&path, &samples, out.initial(), out.terminal(), &battery)?;
            Ok((q, cmp, out.norm_drift(), wr))
        })
        .collect::<Result<Vec<_>>>()?;
    let tol = &config.tolerances;
    let mut report = Report::new(Table::new(&["Q", "err_0", "err_path", "norm_drift", "weak_residual"]));
    let mut errs = Vec::new();
    for (q, cmp, drift, wr) in rows {
        let rel = if n1 == 0.0 { cmp.err_0 } else { cmp.err_0 / n1 };
        report.checks.push(Check::max(q_label(q), "relative_err_0", rel, tol.relative_err_0));
        report.checks.push(Check::max(q_label(q), "norm_drift", drift, tol.norm_drift));
        report.table.push(vec![q.into(), cmp.err_0.into(), cmp.err_path.into(), drift.into(), wr.into()]);
        errs.push(cmp.err_0);
    }
    push_contraction(&mut report, qs, &errs, "err_0", tol.contraction);
    report.metrics.insert("pde_pairing_drift".into(), json!(sol.pairing_drift()));
    Ok(report)
}
