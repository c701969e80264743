use anyhow::{Context, Result};
use chrono::Utc;
use pointer_anneal::experiments::{
    self, compare_with_oracle, fit_lambda, fit_thresholds, ThresholdQuery,
};
use pointer_anneal::{dense, engine, EngineKind, NGrid, Quantity, SimParams};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::output::{finish_manifest, write_rows, RunManifest};
use crate::{
    AdiabaticArgs, EngineArg, FitArgs, GridArg, QuantityArg, ScheduleArgs, SimulateArgs, SweepArgs,
    ThresholdArgs, ToleranceBreach, VerifyArgs,
};

fn base_params(s: &ScheduleArgs, epsilon: f64) -> pointer_anneal::Result<SimParams> {
    let p = SimParams::new(epsilon, 1)?
        .with_h(s.h)
        .with_gamma(s.gamma)
        .with_t_final(s.t_final);
    p.validate()?;
    Ok(p)
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let started = Utc::now();
    let params = a.model.params()?;
    let kind = match a.engine {
        EngineArg::Collision => EngineKind::Collision,
        EngineArg::Dense => EngineKind::Dense,
    };
    let (rows, summary) = experiments::trajectory_run(&params, a.samples, kind)?;
    if a.output.out.is_some() {
        write_rows(&rows, &a.output)?;
        let mut m = RunManifest::new(
            "simulate",
            json!({ "params": params, "engine": kind, "samples": a.samples }),
            started,
        );
        m.integrator = Some(match kind {
            EngineKind::Collision => engine::integrator_config(&params),
            EngineKind::Dense => dense::default_config(params.n_qubits),
        });
        m.summary = Some(summary);
        finish_manifest(m, &a.output)?;
    }
    println!(
        "final_p1={} fidelity={}",
        summary.final_p1, summary.fidelity
    );
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Result<()> {
    let params = a.model.params()?;
    let c = compare_with_oracle(&params)?;
    let d = c.discrepancy();
    println!(
        "discrepancy={d:e} pointer={:e} fidelity_collision={} fidelity_dense={} samples={} tol={:e}",
        c.max_pointer_diff, c.fidelity_collision, c.fidelity_dense, c.boundary_samples, a.tol
    );
    if d < a.tol {
        Ok(())
    } else {
        Err(ToleranceBreach.into())
    }
}

#[derive(Serialize)]
struct ThresholdRow {
    epsilon: f64,
    n_min: Option<usize>,
    value_at_n_min: Option<f64>,
}

pub fn threshold(a: &ThresholdArgs) -> Result<()> {
    let started = Utc::now();
    let base = base_params(&a.schedule, 0.5)?;
    let quantity = match a.quantity {
        QuantityArg::P1 => Quantity::SuccessP1,
        QuantityArg::Fidelity => Quantity::Fidelity,
    };
    let grid = match a.grid {
        GridArg::Pow2 => NGrid::PowersOfTwo,
        GridArg::Bisect => NGrid::IntegerBisection,
    };
    let mut eps = a.epsilon_list.clone();
    eps.sort_by(|x, y| y.total_cmp(x));
    let queries: Vec<ThresholdQuery> = eps
        .iter()
        .map(|&e| {
            ThresholdQuery::new(e, a.target, quantity)
                .with_grid(grid)
                .with_cap(a.n_cap)
        })
        .collect();
    let results = experiments::threshold_sweep(&queries, &base)?;
    let rows: Vec<ThresholdRow> = results
        .iter()
        .map(|r| ThresholdRow {
            epsilon: r.query.epsilon,
            n_min: r.n_min,
            value_at_n_min: r.value_at_n_min,
        })
        .collect();
    write_rows(&rows, &a.output)?;
    let fit = fit_thresholds(&results);
    let mut m = RunManifest::new(
        "threshold",
        json!({ "base": base, "queries": queries, "results": results, "fit": fit }),
        started,
    );
    m.integrator = Some(engine::integrator_config(&base));
    finish_manifest(m, &a.output)?;
    match fit {
        Some(f) => println!("lambda_hat={} residual={:e}", f.lambda_hat, f.residual),
        None => println!("lambda_hat=nan residual=nan"),
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let started = Utc::now();
    let base = base_params(&a.schedule, 0.5)?;
    let mut eps = a.epsilon_list.clone();
    eps.sort_by(|x, y| y.total_cmp(x));
    eps.dedup();
    let mut ns = a.n_list.clone();
    ns.sort_unstable();
    ns.dedup();
    let rows = experiments::sweep(&eps, &ns, &base)?;
    write_rows(&rows, &a.output)?;
    let m = RunManifest::new(
        "sweep",
        json!({ "base": base, "epsilon_list": eps, "n_list": ns }),
        started,
    );
    finish_manifest(m, &a.output)
}

#[derive(Deserialize)]
struct FitRecord {
    epsilon: f64,
    n_min: Option<usize>,
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mut rdr = csv::Reader::from_path(&a.input)
        .with_context(|| format!("reading {}", a.input.display()))?;
    let mut points = Vec::new();
    for rec in rdr.deserialize() {
        let r: FitRecord = rec.with_context(|| format!("parsing {}", a.input.display()))?;
        if let Some(n) = r.n_min {
            points.push((r.epsilon, n));
        }
    }
    let f = fit_lambda(&points)?;
    println!(
        "lambda_hat={} residual={:e} points={}",
        f.lambda_hat,
        f.residual,
        f.points.len()
    );
    Ok(())
}

pub fn adiabatic(a: &AdiabaticArgs) -> Result<()> {
    let started = Utc::now();
    let params = base_params(&a.schedule, a.epsilon)?;
    let rows = experiments::adiabatic_report(&params, a.samples)?;
    write_rows(&rows, &a.output)?;
    let max = rows.iter().map(|r| r.metric).fold(0.0, f64::max);
    let min_gap = rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    let m = RunManifest::new(
        "adiabatic",
        json!({ "params": params, "samples": a.samples }),
        started,
    );
    finish_manifest(m, &a.output)?;
    eprintln!("max_metric={max} min_gap={min_gap}");
    Ok(())
}
