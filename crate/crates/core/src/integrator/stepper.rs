//! Dormand–Prince 5(4) with PI step control and event location.

use crate::math::{abs, pow};
use crate::Result;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub(crate) struct Trial<const N: usize> {
    pub y: [f64; N],
    pub err: [f64; N],
    /// Derivative at the new point (first stage of the next step).
    pub k_end: [f64; N],
}

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One Dormand–Prince step from `(t, y)` with first stage `k1`.
pub(crate) fn dp5<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Result<Trial<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k2 = f(t + C2 * h, &comb(y, h, &[(A21, k1)]))?;
    let k3 = f(t + C3 * h, &comb(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(t + C4 * h, &comb(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(t + C5 * h, &comb(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(t + h, &comb(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y_new = comb(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new)?;
    let mut err = [0.0; N];
    for (i, e) in err.iter_mut().enumerate() {
        *e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(Trial { y: y_new, err, k_end: k7 })
}

/// Proportional-integral step-size controller.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PiControl {
    err_prev: f64,
}

impl Default for PiControl {
    fn default() -> Self {
        PiControl { err_prev: 1e-4 }
    }
}

impl PiControl {
    /// Factor for the next step after an accepted step with scaled error `err`.
    pub fn accept(&mut self, err: f64) -> f64 {
        let err = err.max(1e-10);
        let fac = 0.9 * pow(err, -0.14) * pow(self.err_prev, 0.08);
        self.err_prev = err;
        fac.clamp(0.2, 5.0)
    }

    pub fn reject(&self, err: f64) -> f64 {
        if err.is_finite() {
            (0.9 * pow(err, -0.2)).clamp(0.1, 0.9)
        } else {
            0.1
        }
    }
}

pub(crate) struct Accepted<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub k: [f64; N],
    pub h_used: f64,
    pub h_next: f64,
}

/// Takes one accepted step, shrinking `h` on rejection. `norm` maps
/// `(y_old, y_new, err)` to an error already scaled by its tolerance.
/// `h_limit` caps |h| (e.g. to land on an endpoint).
pub(crate) fn adaptive_step<const N: usize, F, G>(
    f: &mut F,
    norm: &G,
    pi: &mut PiControl,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    mut h: f64,
    h_limit: f64,
    h_min: f64,
) -> Result<Option<Accepted<N>>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: Fn(&[f64; N], &[f64; N], &[f64; N]) -> f64,
{
    if abs(h) > h_limit {
        h = h_limit * h.signum();
    }
    loop {
        if abs(h) < h_min {
            return Ok(None);
        }
        match dp5(f, t, y, k1, h) {
            Ok(trial) => {
                let e = norm(y, &trial.y, &trial.err);
                if e <= 1.0 {
                    let fac = pi.accept(e);
                    return Ok(Some(Accepted { t: t + h, y: trial.y, k: trial.k_end, h_used: h, h_next: h * fac }));
                }
                h *= pi.reject(e);
            }
            // A stage left the domain of the vector field: shrink.
            Err(_) => h *= 0.25,
        }
    }
}

/// Locates the first zero of `g` on a step of length `h` from `(t, y)`.
/// `g(y)` has the old sign at `y` and the new sign at the end of the step.
/// Returns the fraction `θ ∈ (0, 1]` and the state on the new-sign side.
pub(crate) fn locate<const N: usize, F, G>(
    f: &mut F,
    g: &G,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    y_end: &[f64; N],
) -> Result<(f64, [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: Fn(&[f64; N]) -> f64,
{
    let g0 = g(y);
    let old_pos = g0 > 0.0;
    let mut a = 0.0;
    let mut ga = g0;
    let mut b = 1.0;
    let mut yb = *y_end;
    let mut gb = g(y_end);
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a <= 1e-13 || gb == 0.0 {
            break;
        }
        let mut c = if ga != gb { a + (b - a) * ga / (ga - gb) } else { 0.5 * (a + b) };
        let margin = 1e-3 * (b - a);
        if !(c > a + margin && c < b - margin) {
            c = 0.5 * (a + b);
        }
        let yc = dp5(f, t, y, k1, c * h)?.y;
        let gc = g(&yc);
        if gc == 0.0 || (gc > 0.0) != old_pos {
            b = c;
            yb = yc;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    Ok((b, yb))
}
