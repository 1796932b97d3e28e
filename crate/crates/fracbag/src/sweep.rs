//! Grid sweeps on a bounded worker pool. Rows come back in grid order.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{num, terminal_name};
use crate::run::{regularized, Setup};
use fracbag_core::integrator::{integrate, IntegratorControls, Mode};
use fracbag_core::model::energy_h;
use fracbag_core::shooter::{Classification, Shooter, Tag};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))
}

/// Classifies every grid point. Unresolved rows are kept.
pub fn classify_grid(sh: &Shooter, xs: &[f64], threads: Option<usize>) -> Result<Vec<Classification>, CliError> {
    Ok(pool(threads)?.install(|| xs.par_iter().map(|&x| sh.classify(x)).collect()))
}

/// Exit code 4 when some row failed.
pub fn run(cfg: &RunConfig, s: &Setup, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(Value, i32), CliError> {
    if cfg.x_grid.is_some() {
        x_sweep(cfg, s, dir, files)
    } else {
        eps_sweep(cfg, s, dir, files)
    }
}

fn x_sweep(cfg: &RunConfig, s: &Setup, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(Value, i32), CliError> {
    let xs: Vec<f64> = cfg.x_grid.as_ref().unwrap().iter().map(|&x| s.x(cfg, x)).collect();
    let sh = Shooter::new(&s.params, &s.controls)?;
    let rows = classify_grid(&sh, &xs, cfg.threads)?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["x", "tag", "winding", "rho0", "min_radius"])?;
    for c in &rows {
        w.write_record([num(c.x), c.tag.label(), c.winding.to_string(), num(c.rho0), num(c.min_radius)])?;
    }
    w.flush()?;
    files.push(path);
    let failures: Vec<Value> = rows
        .iter()
        .filter_map(|c| match &c.tag {
            Tag::Unresolved(why) => Some(json!({ "x": c.x, "reason": why })),
            _ => None,
        })
        .collect();
    // Reported, not enforced: the winding need not be monotone pointwise.
    let decreases = rows.windows(2).filter(|w| w[1].winding < w[0].winding).count();
    let code = if failures.is_empty() { 0 } else { 4 };
    let v = json!({
        "rows": rows.len(),
        "e0": s.e0,
        "tags": rows.iter().map(|c| c.tag.label()).collect::<Vec<_>>(),
        "winding_decreases": decreases,
        "failures": failures,
    });
    Ok((v, code))
}

/// Integrates one datum with the regularized field for each ε and compares the
/// states at the smallest radius every run reached.
fn eps_sweep(cfg: &RunConfig, s: &Setup, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(Value, i32), CliError> {
    let x = s.x(cfg, cfg.x.unwrap());
    let eps = cfg.eps_grid.clone().unwrap();
    let runs: Vec<Result<_, CliError>> = pool(cfg.threads)?.install(|| {
        eps.par_iter()
            .map(|&e| {
                let params = regularized(&s.params, e, cfg.params.e1, cfg.q_cone)?;
                let controls = IntegratorControls { mode: Mode::Regularized { eps: e }, ..s.controls };
                let sh = Shooter::new(&params, &controls)?;
                Ok(integrate(x, &sh.params, &sh.controls)?)
            })
            .collect()
    });
    let r_cmp = runs.iter().filter_map(|r| r.as_ref().ok()).map(|t| t.r_end()).fold(f64::INFINITY, f64::min);
    let mut states: Vec<Option<(f64, f64)>> = Vec::new();
    let path = dir.join("eps_sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["eps", "terminal", "r_end", "r_cmp", "u", "v", "H", "drift", "error"])?;
    let mut drift = Vec::new();
    let mut failures = Vec::new();
    for (&e, run) in eps.iter().zip(&runs) {
        let st = run.as_ref().map_err(|err| err.to_string()).and_then(|t| t.state_at(r_cmp).map(|p| (t, p)).map_err(|err| err.to_string()));
        match st {
            Ok((t, p)) => {
                let d = states.last().copied().flatten().map(|(u, v): (f64, f64)| (p.u - u).hypot(p.v - v));
                drift.push(d);
                states.push(Some((p.u, p.v)));
                w.write_record([
                    num(e),
                    terminal_name(&t.terminal).to_string(),
                    num(t.r_end()),
                    num(r_cmp),
                    num(p.u),
                    num(p.v),
                    num(energy_h(p.u, p.v, &s.params)),
                    d.map_or(String::new(), num),
                    String::new(),
                ])?;
            }
            Err(why) => {
                states.push(None);
                drift.push(None);
                failures.push(json!({ "eps": e, "reason": why.clone() }));
                w.write_record([num(e), String::new(), String::new(), num(r_cmp), String::new(), String::new(), String::new(), String::new(), why])?;
            }
        }
    }
    w.flush()?;
    files.push(path);
    let ds: Vec<f64> = drift.iter().flatten().copied().collect();
    let cauchy = ds.windows(2).all(|w| w[1] <= w[0]);
    let code = if failures.is_empty() { 0 } else { 4 };
    let v = json!({
        "x": x,
        "r_cmp": r_cmp,
        "drift": drift,
        "drift_nonincreasing": cauchy,
        "failures": failures,
    });
    Ok((v, code))
}
