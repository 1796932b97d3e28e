//! Admissibility thresholds and the constants used by the shooting argument.

use crate::math::{exp, ln, pow, sqrt};
use crate::model::{angular_threshold, e0, energy_h_eps, level_constants, ModelParams};
use crate::roots::bisect;
use crate::{Error, Result};
use alloc::format;

/// Constants entering the existence argument at fixed `(p, Ω, m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShootingConstants {
    pub p_bar: f64,
    /// `Ω_q` at the cone exponent `q_cone`.
    pub omega_p: f64,
    pub q_cone: f64,
    pub r0: f64,
    pub alpha: f64,
    pub theta_lb: f64,
    pub gamma: f64,
    pub c_gamma: f64,
    pub q_exp: f64,
    pub e0: f64,
    pub e1: f64,
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("p must lie in (0, 1), got {p}")))
    }
}

/// `f(p) = e^(−4/(1−p))(1+p) − p`.
pub fn f_barrier(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(exp(-4.0 / (1.0 - p)) * (1.0 + p) - p)
}

/// The unique root `p̄` of `f` in (0, 1).
pub fn p_bar() -> f64 {
    let f = |p: f64| exp(-4.0 / (1.0 - p)) * (1.0 + p) - p;
    // f(0) = e⁻⁴ > 0 and f(1/2) < 0.
    bisect(f, 0.0, 0.5, 1e-17, 0.0).unwrap_or(f64::NAN)
}

/// `g(Ω, p)` for mass `m`.
pub fn g_barrier(omega: f64, p: f64, mass: f64) -> Result<f64> {
    check_p(p)?;
    if !(mass > 0.0) {
        return Err(Error::domain(format!("mass must be positive, got {mass}")));
    }
    if !(omega > mass) {
        return Err(Error::domain(format!("omega must exceed mass, got omega = {omega}, mass = {mass}")));
    }
    let c = (p * omega + (1.0 - p) * mass) / omega;
    Ok(exp(-4.0 * omega / ((omega - mass) * (1.0 - p))) * (1.0 + c) - c)
}

/// `Ω_p`: the root of `g(·, p)`; `g(Ω, p) > 0` for every `Ω > Ω_p`.
pub fn omega_threshold(p: f64, mass: f64) -> Result<f64> {
    check_p(p)?;
    if !(mass > 0.0) {
        return Err(Error::domain(format!("mass must be positive, got {mass}")));
    }
    let pb = p_bar();
    if p >= pb {
        return Err(Error::NoRoot(format!("p = {p} is not below p_bar = {pb}")));
    }
    // Bisect in log(Ω/m − 1), which spreads the bracket evenly.
    let g = |t: f64| g_barrier(mass * (1.0 + exp(t)), p, mass).unwrap_or(f64::NAN);
    let (lo, hi) = (ln(1e-12), ln(1e6 - 1.0));
    if !(g(hi) > 0.0) {
        return Err(Error::NoRoot(format!("g(., {p}) stays negative up to 1e6 * mass")));
    }
    let t = bisect(g, lo, hi, 1e-14, 0.0)?;
    Ok(mass * (1.0 + exp(t)))
}

/// Largest `q` with `g(Ω, q) > 0`, capped at `p̄`.
pub fn cone_exponent_limit(omega: f64, mass: f64) -> Result<f64> {
    let pb = p_bar();
    let g = |q: f64| g_barrier(omega, q, mass).unwrap_or(f64::NAN);
    if !(g(1e-300) > 0.0) {
        return Err(Error::precondition(format!(
            "omega = {omega} is below every threshold (g(omega, 0) <= 0)"
        )));
    }
    if g(pb) > 0.0 {
        return Ok(pb);
    }
    bisect(g, 1e-300, pb, 1e-16, 0.0)
}

/// Default cone exponent: `min(2p, (p + q_max)/2)`.
pub fn default_q_cone(p: f64, params: &ModelParams) -> Result<f64> {
    let q_max = cone_exponent_limit(params.omega, params.mass)?;
    if !(p < q_max) {
        return Err(Error::precondition(format!(
            "omega = {} admits cone exponents only below {q_max}, but p = {p}",
            params.omega
        )));
    }
    Ok((2.0 * p).min(0.5 * (p + q_max)))
}

/// Every constant the shooting argument needs at `(p, Ω, m)`.
///
/// `q_cone = None` selects [`default_q_cone`].
pub fn shooting_constants(p: f64, q_cone: Option<f64>, params: &ModelParams) -> Result<ShootingConstants> {
    params.validate()?;
    check_p(p)?;
    let q = match q_cone {
        Some(q) => q,
        None => default_q_cone(p, params)?,
    };
    let pb = p_bar();
    if !(p < q && q < pb) {
        return Err(Error::precondition(format!("need 0 < p < q_cone < p_bar, got p = {p}, q_cone = {q}, p_bar = {pb}")));
    }
    let omega_q = omega_threshold(q, params.mass)?;
    let alpha = g_barrier(params.omega, q, params.mass)?;
    if !(params.omega > omega_q) || !(alpha > 0.0) {
        return Err(Error::precondition(format!(
            "omega = {} does not exceed the threshold {omega_q} for q_cone = {q}",
            params.omega
        )));
    }
    let om = params.om();
    let r0 = 1.0 / (om * (1.0 - q));
    let theta_lb = (1.0 - p) * om - 1.0 / r0;
    let (gamma, c_gamma, q_exp) = choose_gamma(p, params)?;
    let e0v = e0(params);
    Ok(ShootingConstants {
        p_bar: pb,
        omega_p: omega_q,
        q_cone: q,
        r0,
        alpha,
        theta_lb,
        gamma,
        c_gamma,
        q_exp,
        e0: e0v,
        e1: e0v * e0v * alpha,
    })
}

/// Smallest γ on a log grid over `[1e−6, 1e3]·(Ω − m)` with `q > 0.1`.
fn choose_gamma(p: f64, params: &ModelParams) -> Result<(f64, f64, f64)> {
    const N: usize = 91;
    let om = params.om();
    for i in 0..N {
        let gamma = om * pow(10.0, -6.0 + 9.0 * i as f64 / (N - 1) as f64);
        let lc = level_constants(gamma, params)?;
        let q = 2.0 * (1.0 - p) * params.op() * lc.c_gamma - 1.0;
        if q > 0.1 {
            return Ok((gamma, lc.c_gamma, q));
        }
    }
    Err(Error::precondition("no energy level gives q > 0.1"))
}

/// Upper bound for the trapping radius σ at node count `k`, using the
/// regularization in `params` (ε > 0 and E₁ > 0 are required).
pub fn trapping_radius(k: usize, sc: &ShootingConstants, params: &ModelParams) -> Result<f64> {
    if !(params.eps > 0.0 && params.e1 > 0.0) {
        return Err(Error::precondition("trapping radius needs eps > 0 and e1 > 0"));
    }
    let at = angular_threshold(params);
    let m2 = at.v_bar;
    let m1 = m2 * libm::tan(at.theta_bar);
    let u1 = 0.5 * m1;
    // v₁: where the vertical u = M₁/2 leaves R¹_ε above the diagonal.
    let hi = u1 + params.e1;
    let level_k = if energy_h_eps(u1, hi, params) >= 0.0 {
        crate::model::energy_h(u1, hi, params)
    } else {
        // On {H_ε = 0}, H = (Ω − ε)v²; the root itself may sit below rounding of v − u.
        let v1 = bisect(|v| energy_h_eps(u1, v, params), u1, hi, 0.0, 1e-14)?;
        (params.omega - params.eps) * v1 * v1
    };
    let d_k = if level_k > 0.0 { level_constants(level_k, params)?.d_gamma } else { 0.0 };
    let bound = (m1 * m1 * m1 / (4.0 * m2 * (core::f64::consts::PI * (k as f64 + 2.0) / sc.theta_lb + sc.r0)))
        .min(sqrt(sc.alpha) * sc.e0)
        .min(sqrt(d_k))
        .min(u1);
    Ok(bound)
}
