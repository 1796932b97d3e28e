//! Classical fixed-step RK4 on the radial system in `r`, for reference runs
//! on segments that stay off the diagonal.

use super::{rhs, taylor_start, Mode};
use crate::model::{ModelParams, PlaneState};
use crate::Result;
use alloc::vec::Vec;

/// One RK4 step of size `h` in `r`.
pub fn rk4_step(st: PlaneState, h: f64, params: &ModelParams, mode: Mode) -> Result<PlaneState> {
    let f = |r: f64, u: f64, v: f64| rhs(PlaneState::new(r, u, v), params, mode);
    let (r, u, v) = (st.r, st.u, st.v);
    let (a1, b1) = f(r, u, v)?;
    let (a2, b2) = f(r + 0.5 * h, u + 0.5 * h * a1, v + 0.5 * h * b1)?;
    let (a3, b3) = f(r + 0.5 * h, u + 0.5 * h * a2, v + 0.5 * h * b2)?;
    let (a4, b4) = f(r + h, u + h * a3, v + h * b3)?;
    Ok(PlaneState::new(
        r + h,
        u + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0,
        v + h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0,
    ))
}

/// Fixed-step run from the Taylor launch at `r_start` to `r_end` with `n` steps.
/// Returns every state, launch included.
pub fn rk4_path(x: f64, params: &ModelParams, r_start: f64, r_end: f64, n: usize) -> Result<Vec<PlaneState>> {
    let h = (r_end - r_start) / n as f64;
    let mut st = taylor_start(x, r_start, params);
    let mut out = Vec::with_capacity(n + 1);
    out.push(st);
    for i in 0..n {
        st = rk4_step(st, h, params, Mode::Original)?;
        st.r = r_start + (i + 1) as f64 * h;
        out.push(st);
    }
    Ok(out)
}
