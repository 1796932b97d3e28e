//! Classification of initial data and the nodal bisection.

use crate::constants::{shooting_constants, ShootingConstants};
use crate::integrator::{diagnostics, integrate, IntegratorControls, Terminal, Trajectory, Zone};
use crate::math::{abs, pow};
use crate::model::ModelParams;
use crate::{Error, Result};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Verdict on an initial datum.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Tag {
    /// Negative energy after `k` zeros of `v`.
    InA(usize),
    /// Reached the origin after `k` zeros of `v`.
    NearI(usize),
    Unresolved(String),
}

impl Tag {
    pub fn label(&self) -> String {
        match self {
            Tag::InA(k) => format!("A{k}"),
            Tag::NearI(k) => format!("I{k}"),
            Tag::Unresolved(_) => "unresolved".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Classification {
    pub x: f64,
    pub tag: Tag,
    pub winding: usize,
    pub h_terminal: f64,
    /// `ρ(0)`: first radius with negative energy, the hit radius, or the
    /// last radius reached.
    pub rho0: f64,
    pub min_radius: f64,
}

/// A nodal solution refined by bisection.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShotResult {
    pub k: usize,
    pub x_k: f64,
    pub bracket: (f64, f64),
    pub support_radius: f64,
    /// `(k + 1)π/Θ + r₀`.
    pub support_bound: f64,
    pub node_radii: Vec<f64>,
    /// Smallest plane radius and energy at the hit of the kept trajectory.
    pub min_radius: f64,
    pub h_terminal: f64,
    pub iterations: usize,
    /// `(x, tag label, winding)` of every datum tried.
    pub log: Vec<(f64, String, usize)>,
    pub trajectory: Trajectory,
}

/// Accepted closest approach to the origin, relative to `x`, when no
/// iterate hits it.
pub const NEAR_HIT: f64 = 1e-4;

/// Shared setup for repeated classification at fixed parameters.
#[derive(Debug, Clone)]
pub struct Shooter {
    pub params: ModelParams,
    pub controls: IntegratorControls,
    pub constants: Option<ShootingConstants>,
    /// Angular-speed floor used for the negative-energy margin.
    pub theta_lb: f64,
}

impl Shooter {
    /// Fills in the negative-energy margin (`5π/Θ`) unless already set, and
    /// extends the horizon by it: `r_max` bounds where the energy must turn
    /// negative, the margin is integrated on top.
    pub fn new(params: &ModelParams, controls: &IntegratorControls) -> Result<Self> {
        params.validate()?;
        controls.validate(params)?;
        let constants = shooting_constants(params.p, None, params).ok();
        let theta_lb = match &constants {
            Some(c) => c.theta_lb,
            None => (1.0 - params.p) * (params.omega - params.mass),
        };
        let mut controls = *controls;
        if controls.negative_energy_margin.is_none() {
            controls.negative_energy_margin = Some(5.0 * PI / theta_lb);
        }
        controls.r_max += controls.negative_energy_margin.unwrap_or(0.0);
        Ok(Shooter { params: *params, controls, constants, theta_lb })
    }

    pub fn classify(&self, x: f64) -> Classification {
        self.classify_full(x).0
    }

    pub fn classify_full(&self, x: f64) -> (Classification, Option<Trajectory>) {
        match integrate(x, &self.params, &self.controls) {
            Ok(tr) => (classify_trajectory(&tr, self.controls.negative_energy_margin.unwrap_or(0.0)), Some(tr)),
            Err(e) => (
                Classification {
                    x,
                    tag: Tag::Unresolved(e.to_string()),
                    winding: 0,
                    h_terminal: f64::NAN,
                    rho0: f64::NAN,
                    min_radius: f64::NAN,
                },
                None,
            ),
        }
    }

    /// Brackets and bisects for a solution with `k` nodes, stopping when the
    /// bracket is narrower than `x_tol_rel` times its upper end.
    pub fn find_nodal(&self, k: usize, x_tol_rel: f64) -> Result<ShotResult> {
        self.search(k, None, 1.5, x_tol_rel)
    }

    /// Same search with the scan started at `guess / 1.2` and grown by 1.2.
    pub fn find_nodal_from(&self, k: usize, guess: f64, x_tol_rel: f64) -> Result<ShotResult> {
        if !(guess > 0.0) {
            return Err(Error::domain("guess must be positive"));
        }
        self.search(k, Some(guess / 1.2), 1.2, x_tol_rel)
    }

    fn search(&self, k: usize, start: Option<f64>, factor: f64, x_tol_rel: f64) -> Result<ShotResult> {
        if !(x_tol_rel > 0.0 && x_tol_rel < 1.0) {
            return Err(Error::domain("x_tol_rel must lie in (0, 1)"));
        }
        let sc = self.constants.ok_or_else(|| {
            Error::precondition(format!(
                "parameters (p = {}, omega = {}) are outside the admissible region",
                self.params.p, self.params.omega
            ))
        })?;
        let e0 = sc.e0;
        let mut log = Vec::new();
        let with_k = |c: &Classification| c.winding == k && matches!(c.tag, Tag::NearI(_) | Tag::InA(_));
        // Trajectory at the current lower end when it has k nodes.
        let mut lo_shot: Option<(Classification, Trajectory)> = None;
        // Upward scan.
        let mut lo = None;
        let mut hi = None;
        let mut x = start.unwrap_or(e0);
        for _ in 0..60 {
            let (c, tr) = self.classify_full(x);
            log.push((x, c.tag.label(), c.winding));
            match c.tag {
                Tag::InA(j) if j <= k => {
                    lo = Some(x);
                    lo_shot = if with_k(&c) { tr.map(|tr| (c, tr)) } else { None };
                }
                Tag::InA(_) | Tag::NearI(_) if c.winding > k => {
                    hi = Some(x);
                    break;
                }
                _ => {}
            }
            x *= factor;
        }
        let (Some(mut lo), Some(mut hi)) = (lo, hi) else {
            return Err(Error::SearchFailed(format!("no bracket for k = {k}; scan: {log:?}")));
        };
        let mut iterations = 0;
        while hi - lo > x_tol_rel * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            iterations += 1;
            let (c, tr) = self.classify_full(mid);
            log.push((mid, c.tag.label(), c.winding));
            let upper = match &c.tag {
                Tag::InA(j) => *j > k,
                Tag::NearI(j) if *j == k => c.h_terminal >= 0.0,
                Tag::NearI(j) => *j > k,
                Tag::Unresolved(_) => true,
            };
            if upper {
                hi = mid;
            } else {
                lo = mid;
                lo_shot = if with_k(&c) { tr.map(|tr| (c, tr)) } else { None };
            }
        }
        // The midpoint of the final bracket or its lower end, origin hits
        // first, then the smaller min_radius.
        let x_mid = 0.5 * (lo + hi);
        let (c, tr) = self.classify_full(x_mid);
        log.push((x_mid, c.tag.label(), c.winding));
        let mid_shot = if with_k(&c) { tr.map(|tr| (c, tr)) } else { None };
        let rank = |c: &Classification| (!matches!(c.tag, Tag::NearI(_)), c.min_radius);
        let best = match (mid_shot, lo_shot) {
            (Some(m), Some(l)) => Some(if rank(&l.0) < rank(&m.0) { l } else { m }),
            (m, l) => m.or(l),
        };
        let Some((c, tr)) = best.filter(|(c, _)| matches!(c.tag, Tag::NearI(_)) || c.min_radius <= NEAR_HIT * c.x) else {
            return Err(Error::SearchFailed(format!(
                "bracket [{lo}, {hi}] closed without a {k}-node iterate within {NEAR_HIT}·x of the origin"
            )));
        };
        let support_radius = tr.hit_radius().unwrap_or(c.rho0);
        let support_bound = (k as f64 + 1.0) * PI / sc.theta_lb + sc.r0;
        if support_radius > support_bound {
            return Err(Error::Structure(format!(
                "support radius {support_radius} exceeds the bound {support_bound}"
            )));
        }
        Ok(ShotResult {
            k,
            x_k: c.x,
            bracket: (lo, hi),
            support_radius,
            support_bound,
            node_radii: tr.node_radii(),
            min_radius: c.min_radius,
            h_terminal: c.h_terminal,
            iterations,
            log,
            trajectory: tr,
        })
    }
}

/// Tags a finished trajectory. `margin` is the radius that must be covered
/// after the energy first turns negative.
pub fn classify_trajectory(tr: &Trajectory, margin: f64) -> Classification {
    let winding = tr.winding();
    let h_terminal = tr.terminal_energy();
    let neg = tr.first_negative_energy().or_else(|| (tr.samples.first().map_or(false, |s| s.h < 0.0)).then_some(0.0));
    let rho0 = tr.hit_radius().or(neg).unwrap_or(tr.r_end());
    let tag = match tr.terminal {
        Terminal::HitOrigin { .. } => Tag::NearI(winding),
        Terminal::EnergyNegativeHorizon => match neg {
            Some(r1) if tr.r_end() >= r1 + margin * (1.0 - 1e-12) => Tag::InA(winding),
            _ => Tag::Unresolved(format!("horizon {} reached before the negative-energy margin", tr.r_end())),
        },
        Terminal::HorizonReached => Tag::Unresolved(format!("horizon {} reached with nonnegative energy", tr.r_end())),
        Terminal::CrossingLimit => Tag::Unresolved("diagonal crossing cap reached".to_string()),
    };
    // Minimum over the part of the path before the energy turns negative.
    let cut = rho0 * (1.0 + 1e-9);
    let mut min_radius = tr
        .samples
        .iter()
        .filter(|s| s.r <= cut)
        .map(|s| crate::math::hypot(s.u, s.v))
        .fold(f64::INFINITY, f64::min);
    for (&r, &m) in tr.vertex_radii.iter().zip(vertex_minima(tr).iter()) {
        if r <= cut {
            min_radius = min_radius.min(m);
        }
    }
    if tr.hit_radius().is_some() {
        min_radius = min_radius.min(tr.min_radius);
    }
    Classification { x: tr.x, tag, winding, h_terminal, rho0, min_radius }
}

/// Plane radius at each analytic vertex pass, `√|v² − u²|` there.
fn vertex_minima(tr: &Trajectory) -> Vec<f64> {
    tr.vertex_radii
        .iter()
        .map(|&r| {
            let i = tr.samples.partition_point(|s| s.r < r).min(tr.samples.len() - 1);
            let w = tr.samples[i].w;
            crate::math::sqrt(pow(abs(w), 1.0 / tr.params.p))
        })
        .collect()
}

pub fn classify(x: f64, params: &ModelParams, controls: &IntegratorControls) -> Result<Classification> {
    Ok(Shooter::new(params, controls)?.classify(x))
}

pub fn find_nodal(k: usize, params: &ModelParams, controls: &IntegratorControls, x_tol_rel: f64) -> Result<ShotResult> {
    Shooter::new(params, controls)?.find_nodal(k, x_tol_rel)
}

/// Residuals of the radial equations along a trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialResidual {
    pub max: f64,
    pub l2: f64,
    /// `max(|u'|, |v'|)` over the samples used.
    pub scale: f64,
    pub segments: usize,
    /// Radii where the solution is continued across the diagonal or the origin.
    pub non_c1_radii: Vec<f64>,
}

/// Compares `(u_{i+1} − u_i)/h` with the Simpson mean of the right-hand side
/// on every pair of Regular samples. `nonlinear = false` uses `F ≡ 0`.
pub fn verify_radial_with(tr: &Trajectory, params: &ModelParams, nonlinear: bool) -> RadialResidual {
    let f = |r: f64, u: f64, v: f64| -> (f64, f64) {
        let s = (v - u) * (v + u);
        let fv = if nonlinear && s != 0.0 { params.p * pow(abs(s), params.p - 1.0) } else { 0.0 };
        let cent = if r > 0.0 { 2.0 * u / r } else { 0.0 };
        (v * (params.om() - fv) - cent, -u * (fv + params.op()))
    };
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut scale = 0.0f64;
    for w in tr.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.zone != Zone::Regular || b.zone != Zone::Regular || a.r <= 0.0 {
            continue;
        }
        let h = b.r - a.r;
        if h <= 0.0 {
            continue;
        }
        let Ok(m) = tr.state_at(0.5 * (a.r + b.r)) else { continue };
        let (ua, va) = f(a.r, a.u, a.v);
        let (um, vm) = f(m.r, m.u, m.v);
        let (ub, vb) = f(b.r, b.u, b.v);
        scale = scale.max(abs(ua)).max(abs(va)).max(abs(ub)).max(abs(vb));
        let ru = (b.u - a.u) / h - (ua + 4.0 * um + ub) / 6.0;
        let rv = (b.v - a.v) / h - (va + 4.0 * vm + vb) / 6.0;
        let e = abs(ru).max(abs(rv));
        max = max.max(e);
        sum += e * e;
        n += 1;
    }
    let mut non_c1: Vec<f64> = tr.crossings.iter().map(|c| c.r).chain(tr.vertex_radii.iter().copied()).collect();
    if let Some(r) = tr.hit_radius() {
        non_c1.push(r);
    }
    non_c1.sort_by(f64::total_cmp);
    non_c1.dedup();
    RadialResidual {
        max,
        l2: if n > 0 { crate::math::sqrt(sum / n as f64) } else { 0.0 },
        scale,
        segments: n,
        non_c1_radii: non_c1,
    }
}

pub fn verify_radial(tr: &Trajectory, params: &ModelParams) -> RadialResidual {
    verify_radial_with(tr, params, true)
}

/// The winding of the trajectory over the tail where the energy is negative.
pub fn tail_windings(tr: &Trajectory) -> Result<usize> {
    let d = diagnostics(tr)?;
    let Some(r1) = tr.first_negative_energy() else {
        return Ok(0);
    };
    d.node_count(r1, d.r_end)
}
