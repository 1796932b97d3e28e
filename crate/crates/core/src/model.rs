//! Parameters, energies and level-set geometry of the radial system.

use crate::math::{abs, atan, pow, signed_pow, sqrt};
use crate::roots::{bisect, golden_max};
use crate::{Error, Result};
use alloc::format;

/// Physical and regularization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub p: f64,
    pub omega: f64,
    pub mass: f64,
    /// Regularization strength ε.
    pub eps: f64,
    /// Tube width E₁.
    pub e1: f64,
}

impl ModelParams {
    /// Unregularized parameters (ε = 0, E₁ = 0).
    pub fn new(p: f64, omega: f64, mass: f64) -> Result<Self> {
        let params = ModelParams { p, omega, mass, eps: 0.0, e1: 0.0 };
        params.validate()?;
        Ok(params)
    }

    pub fn with_regularization(mut self, eps: f64, e1: f64) -> Result<Self> {
        self.eps = eps;
        self.e1 = e1;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let ModelParams { p, omega, mass, eps, e1 } = *self;
        if !(p.is_finite() && omega.is_finite() && mass.is_finite() && eps.is_finite() && e1.is_finite()) {
            return Err(Error::domain("parameters must be finite"));
        }
        if mass <= 0.0 {
            return Err(Error::domain(format!("mass must be positive, got {mass}")));
        }
        if omega <= mass {
            return Err(Error::domain(format!("omega must exceed mass, got omega = {omega}, mass = {mass}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
        }
        if !(eps >= 0.0 && eps < mass) {
            return Err(Error::domain(format!("eps must lie in [0, mass), got {eps}")));
        }
        if e1 < 0.0 {
            return Err(Error::domain(format!("e1 must be nonnegative, got {e1}")));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn om(&self) -> f64 {
        self.omega - self.mass
    }

    #[inline]
    pub(crate) fn op(&self) -> f64 {
        self.omega + self.mass
    }
}

/// A point `(r, u, v)` of the radial phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlaneState {
    pub r: f64,
    pub u: f64,
    pub v: f64,
}

impl PlaneState {
    pub fn new(r: f64, u: f64, v: f64) -> Self {
        PlaneState { r, u, v }
    }

    pub fn radius(&self) -> f64 {
        crate::math::hypot(self.u, self.v)
    }

    /// `v² − u²`, evaluated as a product to keep precision near the diagonal.
    pub fn s(&self) -> f64 {
        (self.v - self.u) * (self.v + self.u)
    }
}

/// Level-set constants at energy γ.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelConstants {
    pub gamma: f64,
    pub c_gamma: f64,
    pub d_gamma: f64,
}

/// Angular threshold θ̄ and the matching amplitude v̄.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AngularThreshold {
    pub theta_bar: f64,
    pub v_bar: f64,
}

/// `F(s) = p|s|^(p−1)`, `F(0) = 0`.
pub fn nonlinearity_f(s: f64, p: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::domain(format!("F evaluated at non-finite s = {s}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(p * pow(abs(s), p - 1.0))
}

/// `H` written in terms of `s = v² − u²` and `w = sgn(s)|s|^p`.
#[inline]
pub(crate) fn energy_from_parts(u: f64, v: f64, w: f64, params: &ModelParams) -> f64 {
    -0.5 * w + 0.5 * params.om() * v * v + 0.5 * params.op() * u * u
}

/// The energy `H(u, v)`.
pub fn energy_h(u: f64, v: f64, params: &ModelParams) -> f64 {
    let s = (v - u) * (v + u);
    energy_from_parts(u, v, signed_pow(s, params.p), params)
}

/// The tilted energy `H_ε(u, v) = H(u, v) − (Ω − ε)v²`.
pub fn energy_h_eps(u: f64, v: f64, params: &ModelParams) -> f64 {
    // Expanded so that H_ε(u, u) = εu² holds without cancellation.
    let s = (v - u) * (v + u);
    -0.5 * signed_pow(s, params.p) - 0.5 * params.op() * s + params.eps * v * v
}

/// `E₀`, the largest `v` on the zero level set: `H(0, E₀) = 0`.
pub fn e0(params: &ModelParams) -> f64 {
    pow(params.om(), -1.0 / (2.0 * (1.0 - params.p)))
}

/// `u ≥ 0` with `H(u, 0) = γ`.
fn u_axis_level(gamma: f64, params: &ModelParams) -> Result<f64> {
    let p = params.p;
    let h = |u: f64| 0.5 * (pow(u, 2.0 * p) + params.op() * u * u) - gamma;
    let mut hi = 1.0;
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    bisect(h, 0.0, hi, 0.0, 1e-15)
}

/// `v ≥ 0` with `H(0, v) = γ` (γ > 0).
fn v_axis_level(gamma: f64, params: &ModelParams) -> Result<f64> {
    let h = |v: f64| energy_h(0.0, v, params) - gamma;
    let mut hi = e0(params).max(1.0);
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    bisect(h, e0(params), hi, 0.0, 1e-15)
}

/// Radius of the level set `{H = γ}` along the direction `(cos φ, sin φ)`.
/// Along each ray `H` crosses the level γ > 0 exactly once.
pub(crate) fn level_radius(gamma: f64, angle: f64, params: &ModelParams) -> Result<f64> {
    let (su, cu) = (crate::math::sin(angle), crate::math::cos(angle));
    let h = |rho: f64| energy_h(rho * cu, rho * su, params) - gamma;
    let mut hi = 1.0;
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    bisect(h, 0.0, hi, 0.0, 1e-13)
}

/// `C_γ` and `D_γ`.
pub fn level_constants(gamma: f64, params: &ModelParams) -> Result<LevelConstants> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
    }
    let p = params.p;
    let u0 = u_axis_level(gamma, params)?;
    let c0 = u0 * u0 / gamma;
    // Interior maximum of u on the level set sits on s = S₁.
    let s1 = pow(params.om() / p, 1.0 / (p - 1.0));
    let u1_sq = (gamma + 0.5 * (1.0 - p) * pow(s1, p)) / params.omega;
    let v1 = sqrt(u1_sq + s1);
    let e_gamma = v_axis_level(gamma, params)?;
    let mut c_bar = c0;
    if v1 < e_gamma {
        c_bar = c_bar.max(u1_sq / gamma);
    }
    let c_gamma = c_bar.max(2.0 / params.op());
    let d_gamma = largest_disk(gamma, params)?;
    Ok(LevelConstants { gamma, c_gamma, d_gamma })
}

/// Squared radius of the largest centred disk inside `{H < γ}`.
fn largest_disk(gamma: f64, params: &ModelParams) -> Result<f64> {
    // H is even in u and in v, so a quarter turn suffices.
    const N: usize = 2048;
    let quarter = core::f64::consts::FRAC_PI_2;
    let step = quarter / N as f64;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..=N {
        let rho = level_radius(gamma, i as f64 * step, params)?;
        if rho < best.0 {
            best = (rho, i);
        }
    }
    let lo = (best.1 as f64 - 1.0).max(0.0) * step;
    let hi = ((best.1 as f64 + 1.0) * step).min(quarter);
    let (_, neg) = golden_max(
        |a| level_radius(gamma, a, params).map(|r| -r).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        1e-12,
    );
    let rho = best.0.min(-neg);
    Ok(rho * rho)
}

/// `u ≥ 0` with `H(u, v) = 0` and `u < v`, for `0 < v < E₀`.
pub(crate) fn zero_level_u(v: f64, params: &ModelParams) -> Result<f64> {
    bisect(|u| energy_h(u, v, params), 0.0, v, 0.0, 1e-15)
}

/// θ̄ and v̄ of the zero level set.
pub fn angular_threshold(params: &ModelParams) -> AngularThreshold {
    let p = params.p;
    let ratio = p / params.om();
    let s1 = pow(ratio, 1.0 / (1.0 - p));
    let v_bar = sqrt(s1 + (1.0 - p) / (2.0 * params.omega) * pow(ratio, p / (1.0 - p)));
    // On {H = 0} at s = S₁ the energy fixes u² in closed form.
    let u_sq = 0.5 * (1.0 - p) * pow(s1, p) / params.omega;
    let u_bar = match zero_level_u(v_bar, params) {
        Ok(u) if abs(u * u - u_sq) <= 1e-8 * u_sq => u,
        _ => sqrt(u_sq),
    };
    AngularThreshold { theta_bar: atan(u_bar / v_bar), v_bar }
}

/// Region `R²_ε`-to-`R¹_ε` ramp coordinate `λ*` at `(U, V) = (|u|, |v|)`.
///
/// `R¹_ε = {λ* ≤ 1}` and `R²_ε = {λ* ≤ 1/2}`.
fn ramp_coordinate(u: f64, v: f64, params: &ModelParams) -> f64 {
    let (uu, vv) = (abs(u), abs(v));
    let s = (vv - uu) * (vv + uu);
    let b = 0.5 * signed_pow(s, params.p) + 0.5 * params.op() * s;
    let tube = if params.e1 > 0.0 { abs(vv - uu) / params.e1 } else if vv == uu { 0.0 } else { f64::INFINITY };
    let eps = params.eps;
    let a1 = if vv > 0.0 { b / (eps * vv * vv) } else if b > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    let a2 = if uu > 0.0 { -b / (eps * uu * uu) } else if b < 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    tube.max(a1).max(a2)
}

/// The cutoff `φ_ε`: 0 on `R²_ε`, 1 off `R¹_ε`, a cubic ramp between.
pub fn phi_eps(u: f64, v: f64, params: &ModelParams) -> Result<f64> {
    if u == 0.0 && v == 0.0 {
        return Err(Error::domain("phi_eps is undefined at the origin"));
    }
    if !(params.eps > 0.0) {
        return Err(Error::domain("phi_eps requires eps > 0"));
    }
    let t = (2.0 * ramp_coordinate(u, v, params) - 1.0).clamp(0.0, 1.0);
    Ok(t * t * (3.0 - 2.0 * t))
}

/// Membership of `R¹_ε` (`|v−u| ≤ E₁`, `H_ε(u,v) ≥ 0`, `H_ε(v,u) ≥ 0`, on `(|u|,|v|)`).
pub fn in_r1(u: f64, v: f64, params: &ModelParams) -> bool {
    let (uu, vv) = (abs(u), abs(v));
    abs(vv - uu) <= params.e1 && energy_h_eps(uu, vv, params) >= 0.0 && energy_h_eps(vv, uu, params) >= 0.0
}

/// Membership of `R²_ε` (the same with `E₁/2` and `ε/2`).
pub fn in_r2(u: f64, v: f64, params: &ModelParams) -> bool {
    let half = ModelParams { eps: 0.5 * params.eps, e1: 0.5 * params.e1, ..*params };
    in_r1(u, v, &half)
}
