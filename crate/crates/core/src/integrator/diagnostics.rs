//! Derived series along a trajectory: energy, angle, winding, decay residual.

use super::{EventKind, Trajectory, Zone};
use crate::math::{abs, atan2, pow};
use crate::model::ModelParams;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Finite-difference slope of `H` on one Regular segment against the
/// closed-form decay rate `−(2u²φ/r)(F + m + Ω)` averaged by Simpson's rule.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayResidual {
    pub r: f64,
    pub finite_difference: f64,
    pub closed_form: f64,
    /// Rounding floor of the finite difference.
    pub noise: f64,
    /// `|rate(b) − rate(a)| / |closed_form|`; large on stiff segments where
    /// Simpson's rule does not resolve the rate.
    pub variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    /// Cumulative angle of `(v, u)`, unwrapped.
    pub theta: Vec<f64>,
    /// `θ' = ((Ω−m)v² + (Ω+m)u² − p·w − 2uvφ/r)/(u² + v²)`.
    pub theta_rate: Vec<f64>,
    pub node_radii: Vec<f64>,
    pub decay: Vec<DecayResidual>,
    pub r_end: f64,
    pub hit: Option<f64>,
}

pub const SMOOTH_VARIATION: f64 = 0.1;

/// Closed-form `dH/dr` with `φ = 1`.
pub(crate) fn decay_rate(r: f64, u: f64, v: f64, params: &ModelParams) -> f64 {
    let s = (v - u) * (v + u);
    let f = if s == 0.0 { f64::INFINITY } else { params.p * pow(abs(s), params.p - 1.0) };
    -(2.0 * u * u / r) * (f + params.op())
}

pub fn diagnostics(traj: &Trajectory) -> Result<Diagnostics> {
    let n = traj.samples.len();
    if n == 0 {
        return Err(Error::Range("empty trajectory".into()));
    }
    let pr = &traj.params;
    let mut r = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    let mut rate = Vec::with_capacity(n);
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (i, s) in traj.samples.iter().enumerate() {
        let a = atan2(s.u, s.v);
        if i == 0 {
            acc = a;
        } else {
            let mut d = a - prev;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            acc += d;
        }
        prev = a;
        r.push(s.r);
        h.push(s.h);
        theta.push(acc);
        let rho2 = s.u * s.u + s.v * s.v;
        let rot = pr.om() * s.v * s.v + pr.op() * s.u * s.u - pr.p * s.w;
        let phi = if s.zone == Zone::Tube { 0.0 } else { 1.0 };
        let centrifugal = if s.r > 0.0 { 2.0 * s.u * s.v * phi / s.r } else { 0.0 };
        rate.push(if rho2 > 0.0 { (rot - centrifugal) / rho2 } else { 0.0 });
    }
    let mut decay = Vec::new();
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.zone != Zone::Regular || b.zone != Zone::Regular || a.r <= 0.0 {
            continue;
        }
        let dr = b.r - a.r;
        if dr <= 0.0 {
            continue;
        }
        let mid = traj.state_at(0.5 * (a.r + b.r))?;
        let (ra, rb) = (decay_rate(a.r, a.u, a.v, pr), decay_rate(b.r, b.u, b.v, pr));
        let closed = (ra + 4.0 * decay_rate(mid.r, mid.u, mid.v, pr) + rb) / 6.0;
        decay.push(DecayResidual {
            r: mid.r,
            finite_difference: (b.h - a.h) / dr,
            closed_form: closed,
            noise: 4.0 * f64::EPSILON * (abs(a.h) + abs(b.h) + 0.5 * pr.om() * (a.v * a.v + b.v * b.v) + 0.5 * pr.op() * (a.u * a.u + b.u * b.u) + 0.5 * (abs(a.w) + abs(b.w))) / dr,
            variation: if closed != 0.0 { abs(rb - ra) / abs(closed) } else { f64::INFINITY },
        });
    }
    Ok(Diagnostics {
        r,
        h,
        theta,
        theta_rate: rate,
        node_radii: traj.events.iter().filter(|e| e.kind == EventKind::VZero).map(|e| e.r).collect(),
        decay,
        r_end: traj.r_end(),
        hit: traj.hit_radius(),
    })
}

impl Diagnostics {
    /// `N(a, b)`: zeros of `v` in `(a, b)`.
    pub fn node_count(&self, a: f64, b: f64) -> Result<usize> {
        let covered = self.hit.map_or(self.r_end, |_| f64::INFINITY);
        if a < 0.0 || b > covered || a > b {
            return Err(Error::Range(format!("window ({a}, {b}) outside [0, {}]", self.r_end)));
        }
        Ok(self.node_radii.iter().filter(|&&r| r > a && r < b).count())
    }

    /// `ρ(γ)`: the last sampled radius where `H ≥ γ`, interpolated to the crossing.
    pub fn rho(&self, gamma: f64) -> f64 {
        let n = self.h.len();
        let Some(i) = (0..n).rev().find(|&i| self.h[i] >= gamma) else {
            return 0.0;
        };
        if i + 1 == n {
            return self.hit.unwrap_or(self.r[i]);
        }
        let (h0, h1) = (self.h[i], self.h[i + 1]);
        let t = if h0 != h1 { (h0 - gamma) / (h0 - h1) } else { 0.0 };
        self.r[i] + t.clamp(0.0, 1.0) * (self.r[i + 1] - self.r[i])
    }

    /// Largest relative decay residual over smooth segments (rate varying by
    /// at most `SMOOTH_VARIATION` across the segment) whose energy change is
    /// resolvable above `1e3` times the rounding floor.
    pub fn max_decay_residual(&self) -> f64 {
        self.decay
            .iter()
            .filter(|d| d.variation <= SMOOTH_VARIATION && abs(d.closed_form) > 1e3 * d.noise)
            .map(|d| (abs(d.finite_difference - d.closed_form) - d.noise).max(0.0) / abs(d.closed_form))
            .fold(0.0, f64::max)
    }

    /// Maximal windows `[a, b]` of samples with `H ≥ 0`.
    pub fn nonnegative_windows(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for i in 0..self.h.len() {
            match (self.h[i] >= 0.0, start) {
                (true, None) => start = Some(i),
                (false, Some(j)) => {
                    out.push((self.r[j], self.r[i - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(j) = start {
            out.push((self.r[j], *self.r.last().unwrap_or(&0.0)));
        }
        out
    }
}
