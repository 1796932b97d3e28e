//! Near-diagonal coordinates.
//!
//! With `σ = sgn(uv)`, `e = v + σu`, `E = e²`, `s = v² − u² = (v − σu)e` and
//! `w = sgn(s)|s|^p`, the energy reads
//! `H = −w/2 − (m/2)s + (Ω/4)(E + s²/E)`, so `(w, H)` fix `E` up to the
//! choice of root; the near-diagonal branch is the larger one. Along the
//! flow `ds/dr = E·q` with
//! `q = (1 − κ)((1 − κ)φ/r − σΩ(1 + κ))`, `κ = s/E`, which gives
//! `dr/dw = g/(E q)` and `dH/dw = −(2φ/r)((1 − κ)²/4)(1 + (Ω + m)g)/q`
//! where `g = 1/F = |s|^(1−p)/p`.

use super::stepper::{adaptive_step, PiControl};
use super::{IntegratorControls, Sample, Zone};
use crate::math::{abs, pow, signed_pow, signum, sqrt};
use crate::model::{energy_h, phi_eps, ModelParams, PlaneState};
use crate::{Error, Result};
use alloc::vec::Vec;

/// Branch labels of the near-diagonal chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Frame {
    pub sigma: f64,
    pub esign: f64,
}

impl Frame {
    pub fn of(u: f64, v: f64) -> Self {
        let sigma = if u * v >= 0.0 { 1.0 } else { -1.0 };
        let e = v + sigma * u;
        Frame { sigma, esign: if e >= 0.0 { 1.0 } else { -1.0 } }
    }
}

/// How `φ` is chosen in the band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BandPhi {
    One,
    Zero,
    Regularized(ModelParams),
}

/// Reconstruction of the plane point from `(w, H)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Chart {
    pub s: f64,
    /// `R − Ω|s|/2 ≥ 0`, the margin to the vertex of the level set.
    pub gap: f64,
    pub e_sq: f64,
    pub kappa: f64,
    pub u: f64,
    pub v: f64,
}

pub(crate) fn chart(w: f64, h: f64, frame: Frame, params: &ModelParams) -> Chart {
    let s = signed_pow(w, 1.0 / params.p);
    let gap = h + 0.5 * w - 0.5 * params.omega * abs(s) + 0.5 * params.mass * s;
    let g = gap.max(0.0);
    let e_sq = (2.0 * g + params.omega * abs(s) + 2.0 * sqrt(g * (g + params.omega * abs(s)))) / params.omega;
    let kappa = if e_sq > 0.0 { s / e_sq } else { 0.0 };
    let e = frame.esign * sqrt(e_sq);
    Chart {
        s,
        gap,
        e_sq,
        kappa,
        u: frame.sigma * e * (1.0 - kappa) * 0.5,
        v: e * (1.0 + kappa) * 0.5,
    }
}

/// Scale against which the vertex gap is compared.
pub(crate) fn gap_floor(w: f64, h: f64, s: f64, params: &ModelParams) -> f64 {
    1e-12 * (abs(h) + 0.5 * abs(w) + 0.5 * params.omega * abs(s)) + 1e-300
}

pub(crate) fn phi_value(c: &Chart, phi: BandPhi) -> Result<f64> {
    match phi {
        BandPhi::One => Ok(1.0),
        BandPhi::Zero => Ok(0.0),
        BandPhi::Regularized(pr) => phi_eps(c.u, c.v, &pr),
    }
}

/// `q`, whose sign is that of `ds/dr`.
pub(crate) fn q_value(c: &Chart, r: f64, phi: f64, frame: Frame, params: &ModelParams) -> f64 {
    let k = c.kappa;
    (1.0 - k) * ((1.0 - k) * phi / r - frame.sigma * params.omega * (1.0 + k))
}

/// `(dr/dw, dH/dw)`.
pub(crate) fn band_rhs(w: f64, y: &[f64; 2], frame: Frame, phi: BandPhi, params: &ModelParams) -> Result<[f64; 2]> {
    let (r, h) = (y[0], y[1]);
    if !(r > 0.0) || !h.is_finite() {
        return Err(Error::NonFinite { r, what: "band state".into() });
    }
    let c = chart(w, h, frame, params);
    if !(c.gap > 0.0) || !(c.e_sq > 0.0) {
        return Err(Error::domain("level set has no near-diagonal branch here"));
    }
    let ph = phi_value(&c, phi)?;
    let q = q_value(&c, r, ph, frame, params);
    if q == 0.0 || !q.is_finite() {
        return Err(Error::domain("band chart degenerates (ds/dr = 0)"));
    }
    let g = pow(abs(w), (1.0 - params.p) / params.p) / params.p;
    let dr = g / (c.e_sq * q);
    let dh = if ph == 0.0 {
        0.0
    } else {
        let om = 1.0 - c.kappa;
        -(2.0 * ph / r) * (0.25 * om * om) * (1.0 + params.op() * g) / q
    };
    Ok([dr, dh])
}

/// Crosses the diagonal along the Hamiltonian flow (the `2u/r` term
/// switched off), from `entry` to the mirror value of `|v² − u²|^p`.
///
/// Returns the exit state and the samples along the arc.
pub fn diagonal_crossing(
    entry: PlaneState,
    params: &ModelParams,
    controls: &IntegratorControls,
) -> Result<(PlaneState, Vec<Sample>)> {
    params.validate()?;
    let h0 = energy_h(entry.u, entry.v, params);
    if !(h0 > 0.0) {
        return Err(Error::precondition("diagonal crossing needs positive energy"));
    }
    if !(entry.r > 0.0) {
        return Err(Error::precondition("diagonal crossing needs r > 0"));
    }
    let s0 = entry.s();
    if s0 == 0.0 {
        return Err(Error::precondition("entry lies on the diagonal"));
    }
    let frame = Frame::of(entry.u, entry.v);
    let w0 = signed_pow(s0, params.p);
    // With φ = 0, q = −σΩ(1 − κ²): s decreases when σ = +1.
    let dir = -frame.sigma;
    if signum(-w0) != dir {
        return Err(Error::precondition("entry is moving away from the diagonal"));
    }
    let w_end = -w0;
    let mut f = |w: f64, y: &[f64; 2]| band_rhs(w, y, frame, BandPhi::Zero, params);
    let norm = |a: &[f64; 2], b: &[f64; 2], e: &[f64; 2]| {
        let sc = controls.tol_abs + controls.tol_rel * abs(a[0]).max(abs(b[0]));
        abs(e[0]) / sc
    };
    let mut pi = PiControl::default();
    let mut t = w0;
    let mut y = [entry.r, h0];
    let mut k = f(t, &y)?;
    let mut h = dir * 0.01 * abs(w0);
    let mut arc = Vec::new();
    let push = |arc: &mut Vec<Sample>, w: f64, y: &[f64; 2]| {
        let c = chart(w, y[1], frame, params);
        arc.push(Sample { r: y[0], u: c.u, v: c.v, h: y[1], w, du: f64::NAN, dv: f64::NAN, zone: Zone::Tube });
    };
    push(&mut arc, t, &y);
    let floor = |w: f64, y: &[f64; 2]| {
        let c = chart(w, y[1], frame, params);
        c.gap - gap_floor(w, y[1], c.s, params)
    };
    for _ in 0..controls.max_steps {
        let remaining = abs(w_end - t);
        if remaining <= 1e-15 * abs(w0) {
            let c = chart(w_end, y[1], frame, params);
            return Ok((PlaneState::new(y[0], c.u, c.v), arc));
        }
        let acc = adaptive_step(&mut f, &norm, &mut pi, t, &y, &k, h, remaining, 1e-16 * abs(w0))?
            .ok_or(Error::StepUnderflow { r: y[0], u: entry.u, v: entry.v })?;
        if floor(acc.t, &acc.y) <= 0.0 {
            return Err(Error::precondition("level set turns at a vertex before reaching the mirror point"));
        }
        t = if abs(w_end - acc.t) <= 1e-15 * abs(w0) { w_end } else { acc.t };
        y = acc.y;
        k = acc.k;
        h = acc.h_next;
        push(&mut arc, t, &y);
    }
    Err(Error::StepBudget(controls.max_steps))
}
