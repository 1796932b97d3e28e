//! The four-component spinor built from a radial solution and the residual
//! of the stationary Dirac operator on a Cartesian grid.

use crate::integrator::{Trajectory, Zone};
use crate::math::{abs, pow, sqrt};
use crate::model::ModelParams;
use crate::{Error, Result};
use alloc::format;
use num_complex::Complex64 as C;

/// Cube `[−half_width, half_width]³` sampled with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpinorGrid {
    pub n: usize,
    pub half_width: f64,
    /// Finite-difference step.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpinorResidual {
    /// Max-norm residual relative to `Ω·max|χ|`.
    pub max_relative: f64,
    pub max_abs: f64,
    /// Largest `|χ̄χ − (v² − u²)|` seen.
    pub density_mismatch: f64,
    pub points: usize,
    pub skipped: usize,
}

/// `χ = (v, 0, iu·z/r, iu·(x + iy)/r)`.
pub fn spinor(u: f64, v: f64, pos: [f64; 3]) -> [C; 4] {
    let r = sqrt(pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]);
    if r == 0.0 {
        return [C::new(v, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)];
    }
    let iu = C::new(0.0, u / r);
    [C::new(v, 0.0), C::new(0.0, 0.0), iu * pos[2], iu * C::new(pos[0], pos[1])]
}

/// `χ̄χ = |χ₁|² + |χ₂|² − |χ₃|² − |χ₄|²`.
pub fn density(chi: &[C; 4]) -> f64 {
    chi[0].norm_sqr() + chi[1].norm_sqr() - chi[2].norm_sqr() - chi[3].norm_sqr()
}

/// `Σ_k i γ^k ∂_k χ` from the three partial derivatives, Pauli–Dirac basis.
fn dirac_kinetic(d: &[[C; 4]; 3]) -> [C; 4] {
    let i = C::new(0.0, 1.0);
    // σ¹ = [[0,1],[1,0]], σ² = [[0,−i],[i,0]], σ³ = [[1,0],[0,−1]].
    let sigma = |k: usize, a: C, b: C| -> (C, C) {
        match k {
            0 => (b, a),
            1 => (-i * b, i * a),
            _ => (a, -b),
        }
    };
    let mut out = [C::new(0.0, 0.0); 4];
    for (k, dk) in d.iter().enumerate() {
        let (t0, t1) = sigma(k, dk[2], dk[3]);
        let (b0, b1) = sigma(k, dk[0], dk[1]);
        out[0] += i * t0;
        out[1] += i * t1;
        out[2] -= i * b0;
        out[3] -= i * b1;
    }
    out
}

/// Residual of `iγ^k∂_kχ + Ωγ⁰χ − mχ − F(χ̄χ)χ` on the grid.
pub fn verify_spinor(tr: &Trajectory, params: &ModelParams, grid: &SpinorGrid) -> Result<SpinorResidual> {
    if grid.n < 2 || !(grid.half_width > 0.0) || !(grid.step > 0.0) {
        return Err(Error::precondition("grid needs n >= 2, positive width and step"));
    }
    let reach = sqrt(3.0) * grid.half_width + grid.step;
    if tr.hit_radius().is_none() && reach > tr.r_end() {
        return Err(Error::Range(format!("grid reaches r = {reach} beyond the trajectory end {}", tr.r_end())));
    }
    // Radii near which the radial profile is not smooth.
    let mut rough: alloc::vec::Vec<(f64, f64)> = alloc::vec::Vec::new();
    let mut open: Option<f64> = None;
    for s in &tr.samples {
        match (s.zone != Zone::Regular, open) {
            (true, None) => open = Some(s.r),
            (false, Some(a)) => {
                rough.push((a, s.r));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        rough.push((a, f64::INFINITY));
    }
    if let Some(rh) = tr.hit_radius() {
        rough.push((rh, rh));
    }
    let first_r = tr.samples.get(1).map_or(0.0, |s| s.r);
    let chi_at = |pos: [f64; 3]| -> Result<[C; 4]> {
        let r = sqrt(pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]);
        let st = tr.state_at(r)?;
        Ok(spinor(st.u, st.v, pos))
    };
    let dx = 2.0 * grid.half_width / (grid.n - 1) as f64;
    let h = grid.step;
    let mut max_abs = 0.0f64;
    let mut chi_max = 0.0f64;
    let mut mismatch = 0.0f64;
    let (mut points, mut skipped) = (0usize, 0usize);
    for ix in 0..grid.n {
        for iy in 0..grid.n {
            for iz in 0..grid.n {
                let pos = [
                    -grid.half_width + ix as f64 * dx,
                    -grid.half_width + iy as f64 * dx,
                    -grid.half_width + iz as f64 * dx,
                ];
                let r = sqrt(pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]);
                let pad = 2.0 * h;
                if r <= first_r + pad || rough.iter().any(|&(a, b)| r >= a - pad && r <= b + pad) {
                    skipped += 1;
                    continue;
                }
                let chi = chi_at(pos)?;
                let st = tr.state_at(r)?;
                mismatch = mismatch.max(abs(density(&chi) - st.s()));
                let mut d = [[C::new(0.0, 0.0); 4]; 3];
                for (k, dk) in d.iter_mut().enumerate() {
                    let mut p1 = pos;
                    let mut p0 = pos;
                    p1[k] += h;
                    p0[k] -= h;
                    let (c1, c0) = (chi_at(p1)?, chi_at(p0)?);
                    for c in 0..4 {
                        dk[c] = (c1[c] - c0[c]) / (2.0 * h);
                    }
                }
                let kin = dirac_kinetic(&d);
                let rho = density(&chi);
                let f = if rho == 0.0 { 0.0 } else { params.p * pow(abs(rho), params.p - 1.0) };
                let signs = [1.0, 1.0, -1.0, -1.0];
                for c in 0..4 {
                    let res = kin[c] + chi[c] * (params.omega * signs[c] - params.mass - f);
                    max_abs = max_abs.max(res.norm());
                    chi_max = chi_max.max(chi[c].norm());
                }
                points += 1;
            }
        }
    }
    let max_relative = if chi_max > 0.0 { max_abs / (params.omega * chi_max) } else { max_abs };
    Ok(SpinorResidual { max_relative, max_abs, density_mismatch: mismatch, points, skipped })
}
