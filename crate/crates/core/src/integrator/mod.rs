//! Adaptive integration of the radial system across the singular set.
//!
//! Away from the diagonal the state `(r, u, v)` is advanced in the rescaled
//! time `τ` with `dr/dτ = 1/(Ω + m + F)`, which keeps the stiff factor `F`
//! bounded. Close to the diagonal (`|v² − u²| < κ·(|u|+|v|)²`) the state is
//! `(r, H)` with `w = sgn(s)|s|^p` as the independent variable; `(u, v)` is
//! recovered from the level set. Near the origin the diagonal turns at a
//! vertex too small to resolve; there the turn is taken analytically.

mod band;
mod diagnostics;
pub mod fixed;
mod run;
mod stepper;

use crate::math::hypot;
use crate::model::{energy_h, nonlinearity_f, phi_eps, ModelParams, PlaneState};
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

pub use band::diagonal_crossing;
pub use diagnostics::{diagnostics, Diagnostics};
pub use run::integrate;

/// Which vector field is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    /// The radial system as written. The diagonal cannot be crossed.
    Original,
    /// The `2u/r` term is multiplied by `φ_ε` (needs `e1 > 0` in the params).
    Regularized { eps: f64 },
    /// The `2u/r` term is dropped in a thin tube around the diagonal.
    DiagonalSwitch,
}

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratorControls {
    /// Radius of the Taylor launch; `None` picks `1e−6/(Ω+m)`.
    pub h_init: Option<f64>,
    pub tol_rel: f64,
    pub tol_abs: f64,
    /// Half-width of the Hamiltonian tube, on the `|v² − u²|^p` scale.
    pub delta_diag: f64,
    /// Origin radius; `None` picks `1e−8·x`.
    pub tol_origin: Option<f64>,
    /// Relative energy below which a pass at the origin counts as a hit.
    pub h_origin: f64,
    pub r_max: f64,
    pub mode: Mode,
    /// Width `κ` of the near-diagonal zone `|v² − u²| < κ (|u|+|v|)²`.
    pub band_width: f64,
    /// Extra radius integrated after the energy first turns negative.
    pub negative_energy_margin: Option<f64>,
    pub max_crossings: usize,
    pub max_steps: usize,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        IntegratorControls {
            h_init: None,
            tol_rel: 1e-10,
            tol_abs: 1e-14,
            delta_diag: 1e-10,
            tol_origin: None,
            h_origin: 1e-9,
            r_max: 10.0,
            mode: Mode::DiagonalSwitch,
            band_width: 0.05,
            negative_energy_margin: None,
            max_crossings: 10_000,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::precondition(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if let Some(h) = self.h_init {
            pos("h_init", h)?;
        }
        pos("tol_rel", self.tol_rel)?;
        pos("tol_abs", self.tol_abs)?;
        pos("delta_diag", self.delta_diag)?;
        if let Some(t) = self.tol_origin {
            pos("tol_origin", t)?;
        }
        pos("h_origin", self.h_origin)?;
        pos("r_max", self.r_max)?;
        if !(self.band_width > 0.0 && self.band_width < 0.5) {
            return Err(Error::precondition(format!("band_width must lie in (0, 0.5), got {}", self.band_width)));
        }
        if let Some(m) = self.negative_energy_margin {
            if !(m >= 0.0) {
                return Err(Error::precondition("negative_energy_margin must be nonnegative"));
            }
        }
        if let Mode::Regularized { eps } = self.mode {
            if !(eps > 0.0 && eps < params.mass) {
                return Err(Error::precondition(format!("eps must lie in (0, mass), got {eps}")));
            }
        }
        Ok(())
    }

    /// Parameters as seen by the vector field in this mode.
    pub(crate) fn field_params(&self, params: &ModelParams) -> ModelParams {
        match self.mode {
            Mode::Regularized { eps } => ModelParams { eps, ..*params },
            _ => *params,
        }
    }
}

/// Kinds of located events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventKind {
    VZero,
    HZero,
    DiagonalEnter,
    DiagonalExit,
    OriginHit,
    MaxRadius,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::VZero => "VZero",
            EventKind::HZero => "HZero",
            EventKind::DiagonalEnter => "DiagonalEnter",
            EventKind::DiagonalExit => "DiagonalExit",
            EventKind::OriginHit => "OriginHit",
            EventKind::MaxRadius => "MaxRadius",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    pub kind: EventKind,
    pub r: f64,
    pub state: PlaneState,
}

/// How the integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Terminal {
    /// The trajectory reached the origin at radius `r`; it is zero beyond.
    HitOrigin { r: f64 },
    /// Horizon reached with negative energy.
    EnergyNegativeHorizon,
    /// Horizon reached with nonnegative energy.
    HorizonReached,
    /// Too many diagonal crossings.
    CrossingLimit,
}

/// Which representation produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Zone {
    /// Away from the diagonal; `(du, dv)` are the exact derivatives.
    Regular,
    /// Near the diagonal, outside the Hamiltonian tube.
    Band,
    /// Inside the Hamiltonian tube.
    Tube,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub r: f64,
    pub u: f64,
    pub v: f64,
    pub h: f64,
    /// `sgn(v² − u²)|v² − u²|^p`, exact in the band.
    pub w: f64,
    /// `u'` and `v'` in `r` (Regular zone only; NaN elsewhere).
    pub du: f64,
    pub dv: f64,
    pub zone: Zone,
}

impl Sample {
    pub fn state(&self) -> PlaneState {
        PlaneState::new(self.r, self.u, self.v)
    }
}

/// One passage through the diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossingRecord {
    pub r: f64,
    /// Energy entering and leaving the Hamiltonian tube (equal to the
    /// energy at `w = 0` outside DiagonalSwitch mode).
    pub h_entry: f64,
    pub h_exit: f64,
    /// `w = sgn(v² − u²)|v² − u²|^p` on either side; `v² − u²` itself
    /// underflows at the tube edges.
    pub w_before: f64,
    pub w_after: f64,
}

/// A sampled solution with its events.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub x: f64,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub crossings: Vec<CrossingRecord>,
    pub terminal: Terminal,
    pub params: ModelParams,
    pub controls: IntegratorControls,
    /// Smallest `√(u²+v²)` reached, including analytic vertex passes.
    pub min_radius: f64,
    /// Radii where a vertex was passed analytically.
    pub vertex_radii: Vec<f64>,
}

impl Trajectory {
    pub fn states(&self) -> impl Iterator<Item = PlaneState> + '_ {
        self.samples.iter().map(Sample::state)
    }

    /// Number of zeros of `v`.
    pub fn winding(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::VZero).count()
    }

    pub fn node_radii(&self) -> Vec<f64> {
        self.events.iter().filter(|e| e.kind == EventKind::VZero).map(|e| e.r).collect()
    }

    pub fn hit_radius(&self) -> Option<f64> {
        match self.terminal {
            Terminal::HitOrigin { r } => Some(r),
            _ => None,
        }
    }

    pub fn r_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.r)
    }

    pub fn terminal_energy(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.h)
    }

    /// First radius where the energy is negative.
    pub fn first_negative_energy(&self) -> Option<f64> {
        self.events.iter().find(|e| e.kind == EventKind::HZero).map(|e| e.r)
    }

    /// The state at radius `r`, cubic Hermite between Regular samples and
    /// linear elsewhere; zero beyond an origin hit.
    pub fn state_at(&self, r: f64) -> Result<PlaneState> {
        let first = self.samples.first().ok_or_else(|| Error::Range("empty trajectory".into()))?;
        if let Some(rh) = self.hit_radius() {
            if r >= rh {
                return Ok(PlaneState::new(r, 0.0, 0.0));
            }
        }
        if r < 0.0 || r > self.r_end() {
            return Err(Error::Range(format!("r = {r} outside [0, {}]", self.r_end())));
        }
        if r <= first.r {
            // Launch segment: the Taylor polynomial.
            let st = taylor_start(self.x, r.max(0.0), &self.params);
            return Ok(st);
        }
        let i = self.samples.partition_point(|s| s.r < r).clamp(1, self.samples.len() - 1);
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let h = b.r - a.r;
        if h <= 0.0 {
            return Ok(b.state());
        }
        let t = (r - a.r) / h;
        if a.zone == Zone::Regular && b.zone == Zone::Regular {
            let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
            let h10 = t * (1.0 - t) * (1.0 - t);
            let h01 = t * t * (3.0 - 2.0 * t);
            let h11 = t * t * (t - 1.0);
            let u = h00 * a.u + h10 * h * a.du + h01 * b.u + h11 * h * b.du;
            let v = h00 * a.v + h10 * h * a.dv + h01 * b.v + h11 * h * b.dv;
            Ok(PlaneState::new(r, u, v))
        } else {
            Ok(PlaneState::new(r, a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)))
        }
    }
}

/// Right-hand side `(u', v')` of the radial system in the given mode.
pub fn rhs(state: PlaneState, params: &ModelParams, mode: Mode) -> Result<(f64, f64)> {
    let PlaneState { r, u, v } = state;
    let s = state.s();
    let f = nonlinearity_f(s, params.p)?;
    let base_u = v * (params.om() - f);
    let dv = -u * (f + params.op());
    let du = match mode {
        Mode::Original | Mode::Regularized { .. } if s == 0.0 => return Err(Error::Singularity { r }),
        Mode::Original => base_u - 2.0 * u / r,
        Mode::Regularized { eps } => {
            let pr = ModelParams { eps, ..*params };
            base_u - 2.0 * u * phi_eps(u, v, &pr)? / r
        }
        Mode::DiagonalSwitch => {
            if s == 0.0 {
                return Err(Error::domain("F is not evaluated on the diagonal"));
            }
            base_u
        }
    };
    Ok((du, dv))
}

/// Series launch: the state at radius `h` of the solution with `(u, v)(0) = (0, x)`.
pub fn taylor_start(x: f64, h: f64, params: &ModelParams) -> PlaneState {
    if x == 0.0 {
        return PlaneState::new(h, 0.0, 0.0);
    }
    let f = nonlinearity_f(x * x, params.p).unwrap_or(0.0);
    let a = x * (params.om() - f) / 3.0;
    let b = a * (-f - params.op()) / 2.0;
    PlaneState::new(h, a * h, x + b * h * h)
}

/// Scale used for the origin-energy threshold.
pub(crate) fn energy_scale(x: f64, params: &ModelParams) -> f64 {
    0.5 * crate::math::pow(x * x, params.p) + 0.5 * params.om() * x * x
}

pub(crate) fn plane_radius(u: f64, v: f64) -> f64 {
    hypot(u, v)
}

pub(crate) fn energy(u: f64, v: f64, params: &ModelParams) -> f64 {
    energy_h(u, v, params)
}
