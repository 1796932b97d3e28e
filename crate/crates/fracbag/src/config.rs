//! Run configuration: a JSON document, overridden field by field from flags.

use crate::error::CliError;
use fracbag_core::constants::omega_threshold;
use fracbag_core::integrator::{IntegratorControls, Mode};
use fracbag_core::ModelParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    Integrate,
    Shoot,
    MitLimit,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Integrate => "integrate",
            Command::Shoot => "shoot",
            Command::MitLimit => "mit-limit",
            Command::Sweep => "sweep",
        }
    }
}

/// `Ω` is `omega` when given, else `omega_factor · Ω_q` with `q = omega_ref_p`
/// (default: `p` itself).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub p: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ref_p: Option<f64>,
    /// Tube width for the regularized mode; defaults to the shooting constant `E₁`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e1: Option<f64>,
}

fn one() -> f64 {
    1.0
}

pub const DEFAULT_OMEGA_FACTOR: f64 = 1.1;

impl ParamsConfig {
    pub fn resolve(&self) -> Result<ModelParams, CliError> {
        let omega = match self.omega {
            Some(w) => w,
            None => {
                let q = self.omega_ref_p.unwrap_or(self.p);
                let f = self.omega_factor.unwrap_or(DEFAULT_OMEGA_FACTOR);
                let field = if self.omega_ref_p.is_some() { "params.omega_ref_p" } else { "params.p" };
                let w = omega_threshold(q, self.mass).map_err(|e| CliError::usage(field, e))?;
                f * w
            }
        };
        ModelParams::new(self.p, omega, self.mass).map_err(|e| CliError::usage("params", e))
    }
}

/// Integration controls; absent fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_diag: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_origin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_origin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// `"diagonal-switch"`, `"original"` or `"regularized"` (with `eps`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_energy_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_crossings: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl ControlsConfig {
    pub fn resolve(&self) -> Result<IntegratorControls, CliError> {
        let mut c = IntegratorControls::default();
        c.h_init = self.h_init.or(c.h_init);
        c.tol_rel = self.tol_rel.unwrap_or(c.tol_rel);
        c.tol_abs = self.tol_abs.unwrap_or(c.tol_abs);
        c.delta_diag = self.delta_diag.unwrap_or(c.delta_diag);
        c.tol_origin = self.tol_origin.or(c.tol_origin);
        c.h_origin = self.h_origin.unwrap_or(c.h_origin);
        c.r_max = self.r_max.unwrap_or(c.r_max);
        c.band_width = self.band_width.unwrap_or(c.band_width);
        c.negative_energy_margin = self.negative_energy_margin.or(c.negative_energy_margin);
        c.max_crossings = self.max_crossings.unwrap_or(c.max_crossings);
        c.max_steps = self.max_steps.unwrap_or(c.max_steps);
        c.mode = match (self.mode.as_deref(), self.eps) {
            (None | Some("diagonal-switch"), None) => Mode::DiagonalSwitch,
            (Some("original"), None) => Mode::Original,
            (Some("regularized") | None, Some(eps)) => Mode::Regularized { eps },
            (Some("regularized"), None) => return Err(CliError::Usage("controls.mode: regularized needs controls.eps".into())),
            (Some(m), _) => return Err(CliError::Usage(format!("controls.mode: unknown mode {m:?}, or eps given with it"))),
        };
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub params: ParamsConfig,
    #[serde(default)]
    pub controls: ControlsConfig,
    /// Initial datum (`integrate`, ε-sweeps).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Read `x` and `x_grid` in units of `E₀`.
    #[serde(default)]
    pub x_in_e0: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Bisection width relative to the bracket's upper end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_cone: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    /// Sweep worker count; `None` uses the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_X_TOL: f64 = 1e-12;
pub const OUTPUT_DIR_ENV: &str = "FRACBAG_OUTPUT_DIR";

impl RunConfig {
    pub fn new(command: Command, p: f64) -> Self {
        RunConfig {
            command,
            params: ParamsConfig { p, mass: 1.0, omega: None, omega_factor: None, omega_ref_p: None, e1: None },
            controls: ControlsConfig::default(),
            x: None,
            x_in_e0: false,
            k: None,
            x_tol: None,
            q_cone: None,
            p_list: None,
            x_grid: None,
            eps_grid: None,
            threads: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The explicit directory, else `$FRACBAG_OUTPUT_DIR`, else `./fracbag-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("fracbag-out"))
    }

    /// Checks the fields each command needs.
    pub fn validate(&self) -> Result<(), CliError> {
        let need = |ok: bool, field: &str| if ok { Ok(()) } else { Err(CliError::Usage(format!("{}: missing {field}", self.command.name()))) };
        match self.command {
            Command::Constants => {}
            Command::Integrate => need(self.x.is_some(), "x")?,
            Command::Shoot => need(self.k.is_some(), "k")?,
            Command::MitLimit => {
                need(self.k.is_some(), "k")?;
                need(self.p_list.as_ref().is_some_and(|l| !l.is_empty()), "p_list")?;
            }
            Command::Sweep => {
                let grid = self.x_grid.as_ref().or(self.eps_grid.as_ref());
                need(grid.is_some_and(|g| !g.is_empty()), "x_grid or eps_grid")?;
                if self.x_grid.is_some() && self.eps_grid.is_some() {
                    return Err(CliError::Usage("sweep: give x_grid or eps_grid, not both".into()));
                }
                let g = grid.unwrap();
                let up = g.windows(2).all(|w| w[1] > w[0]);
                let down = g.windows(2).all(|w| w[1] < w[0]);
                if !(up || down) {
                    return Err(CliError::Usage("sweep: grid must be strictly monotone".into()));
                }
                if self.eps_grid.is_some() {
                    need(self.x.is_some(), "x")?;
                }
            }
        }
        if let Some(t) = self.x_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Usage(format!("x_tol must lie in (0, 1), got {t}")));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        Ok(())
    }
}
