//! Dispatch of a validated configuration and the run record.

use crate::config::{Command, RunConfig, DEFAULT_X_TOL};
use crate::error::CliError;
use crate::io::{sha256_file, terminal_name, write_events_csv, write_json, write_jsonl, write_trajectory_csv};
use crate::sweep;
use fracbag_core::constants::{p_bar, shooting_constants};
use fracbag_core::integrator::{integrate, IntegratorControls, Mode, Trajectory};
use fracbag_core::mitlimit::{continuation, nodal_structure};
use fracbag_core::model::e0;
use fracbag_core::shooter::{classify_trajectory, Shooter, ShotResult};
use fracbag_core::ModelParams;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance of one run, written as `run.json`. The timestamps are the only
/// fields that differ between reruns of the same config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub exit_code: i32,
    pub summary: Value,
    pub artifacts: Vec<Artifact>,
}

/// Parameters, controls and constants shared by every command.
pub struct Setup {
    pub params: ModelParams,
    pub controls: IntegratorControls,
    pub e0: f64,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let mut params = cfg.params.resolve()?;
        let controls = cfg.controls.resolve()?;
        if let Mode::Regularized { eps } = controls.mode {
            params = regularized(&params, eps, cfg.params.e1, cfg.q_cone)?;
        }
        controls.validate(&params)?;
        Ok(Setup { e0: e0(&params), params, controls })
    }

    /// `x` in absolute units.
    pub fn x(&self, cfg: &RunConfig, x: f64) -> f64 {
        if cfg.x_in_e0 {
            x * self.e0
        } else {
            x
        }
    }
}

pub fn regularized(params: &ModelParams, eps: f64, e1: Option<f64>, q_cone: Option<f64>) -> Result<ModelParams, CliError> {
    let e1 = match e1 {
        Some(e) => e,
        None => shooting_constants(params.p, q_cone, params)?.e1,
    };
    Ok(params.with_regularization(eps, e1)?)
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Runs the command, writes its artifacts and `run.json`, and returns the
/// record. A run that completes with failed rows still returns the record,
/// with a nonzero `exit_code`.
pub fn execute(cfg: &RunConfig) -> Result<RunRecord, CliError> {
    cfg.validate()?;
    let started = now_ms();
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let setup = Setup::new(cfg)?;
    let mut files: Vec<PathBuf> = Vec::new();
    let (summary, exit_code) = match cfg.command {
        Command::Constants => (constants(cfg, &setup, &dir, &mut files)?, 0),
        Command::Integrate => (integrate_cmd(cfg, &setup, &dir, &mut files)?, 0),
        Command::Shoot => (shoot(cfg, &setup, &dir, &mut files)?, 0),
        Command::MitLimit => mit_limit(cfg, &setup, &dir, &mut files)?,
        Command::Sweep => sweep::run(cfg, &setup, &dir, &mut files)?,
    };
    let mut artifacts = Vec::with_capacity(files.len());
    for f in &files {
        artifacts.push(Artifact {
            file: f.file_name().unwrap().to_string_lossy().into_owned(),
            sha256: sha256_file(f)?,
            bytes: std::fs::metadata(f)?.len(),
        });
    }
    let record = RunRecord {
        config: cfg.clone(),
        tool_version: TOOL_VERSION.to_string(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        exit_code,
        summary,
        artifacts,
    };
    write_json(&dir.join("run.json"), &record)?;
    Ok(record)
}

fn constants(cfg: &RunConfig, s: &Setup, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, CliError> {
    let sc = shooting_constants(s.params.p, cfg.q_cone, &s.params)?;
    let v = json!({
        "p": s.params.p,
        "omega": s.params.omega,
        "mass": s.params.mass,
        "p_bar": p_bar(),
        "constants": sc,
    });
    let path = dir.join("constants.json");
    write_json(&path, &v)?;
    files.push(path);
    Ok(v)
}

fn write_trajectory(dir: &Path, stem: &str, tr: &Trajectory, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let t = dir.join(format!("{stem}.csv"));
    write_trajectory_csv(&t, tr)?;
    let e = dir.join(format!("{stem}_events.csv"));
    write_events_csv(&e, tr)?;
    files.push(t);
    files.push(e);
    Ok(())
}

fn integrate_cmd(cfg: &RunConfig, s: &Setup, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, CliError> {
    let x = s.x(cfg, cfg.x.unwrap());
    // Through the shooter so the negative-energy margin is filled in.
    let sh = Shooter::new(&s.params, &s.controls)?;
    let tr = integrate(x, &sh.params, &sh.controls)?;
    let c = classify_trajectory(&tr, sh.controls.negative_energy_margin.unwrap_or(0.0));
    write_trajectory(dir, "trajectory", &tr, files)?;
    let v = json!({
        "x": x,
        "x_over_e0": x / s.e0,
        "e0": s.e0,
        "terminal": terminal_name(&tr.terminal),
        "tag": c.tag.label(),
        "winding": c.winding,
        "h_terminal": c.h_terminal,
        "rho0": c.rho0,
        "min_radius": c.min_radius,
        "r_end": tr.r_end(),
        "hit_radius": tr.hit_radius(),
        "node_radii": tr.node_radii(),
        "crossings": tr.crossings.len(),
        "samples": tr.samples.len(),
    });
    let path = dir.join("integrate.json");
    write_json(&path, &v)?;
    files.push(path);
    Ok(v)
}

/// The shot without its trajectory, which goes to CSV.
pub fn shot_summary(shot: &ShotResult, e0: f64) -> Value {
    json!({
        "k": shot.k,
        "x_k": shot.x_k,
        "x_k_over_e0": shot.x_k / e0,
        "e0": e0,
        "bracket": [shot.bracket.0, shot.bracket.1],
        "winding": shot.trajectory.winding(),
        "terminal": terminal_name(&shot.trajectory.terminal),
        "support_radius": shot.support_radius,
        "support_bound": shot.support_bound,
        "node_radii": shot.node_radii,
        "min_radius": shot.min_radius,
        "h_terminal": shot.h_terminal,
        "iterations": shot.iterations,
        "log": shot.log,
    })
}

fn shoot(cfg: &RunConfig, s: &Setup, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, CliError> {
    let sh = Shooter::new(&s.params, &s.controls)?;
    let shot = sh.find_nodal(cfg.k.unwrap(), cfg.x_tol.unwrap_or(DEFAULT_X_TOL))?;
    write_trajectory(dir, "trajectory", &shot.trajectory, files)?;
    let v = shot_summary(&shot, s.e0);
    let path = dir.join("shot.json");
    write_json(&path, &v)?;
    files.push(path);
    Ok(v)
}

/// Exit code 3 when some exponent failed, 0 otherwise.
fn mit_limit(cfg: &RunConfig, s: &Setup, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(Value, i32), CliError> {
    let k = cfg.k.unwrap();
    let steps = continuation(k, cfg.p_list.as_deref().unwrap(), &s.params, &s.controls, cfg.x_tol.unwrap_or(DEFAULT_X_TOL))?;
    let records: Vec<_> = steps.iter().map(|st| st.record.clone()).collect();
    let path = dir.join("continuation.jsonl");
    write_jsonl(&path, &records)?;
    files.push(path);
    for (i, st) in steps.iter().enumerate() {
        if let Some(shot) = &st.shot {
            write_trajectory(dir, &format!("trajectory_{i}"), &shot.trajectory, files)?;
        }
    }
    let last = steps.iter().rev().find_map(|st| st.shot.as_ref()).map(|s| &s.trajectory);
    let structure = match nodal_structure(&records, last) {
        Ok(rep) => json!({ "ok": true, "report": rep }),
        Err(e) => json!({ "ok": false, "error": e.to_string() }),
    };
    let path = dir.join("structure.json");
    write_json(&path, &structure)?;
    files.push(path);
    let failed: Vec<f64> = records.iter().filter(|r| r.failed.is_some()).map(|r| r.p).collect();
    let v = json!({
        "k": k,
        "p": records.iter().map(|r| r.p).collect::<Vec<_>>(),
        "x_k": records.iter().map(|r| r.x_k).collect::<Vec<_>>(),
        "sup_distance": records.iter().map(|r| r.sup_distance).collect::<Vec<_>>(),
        "failed_p": failed,
        "structure": structure,
    });
    Ok((v, if failed.is_empty() { 0 } else { 3 }))
}
