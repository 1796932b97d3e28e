use approx::assert_relative_eq;
use fracbag_core::constants::{omega_threshold, shooting_constants};
use fracbag_core::integrator::fixed::rk4_step;
use fracbag_core::integrator::*;
use fracbag_core::model::*;

fn weak() -> ModelParams {
    ModelParams::new(0.1, 2.0, 1.0).unwrap()
}

/// p = 0.01 at 1.1 times its own threshold.
fn near_threshold() -> ModelParams {
    ModelParams::new(0.01, 1.1 * omega_threshold(0.01, 1.0).unwrap(), 1.0).unwrap()
}

fn f_ref(s: f64, p: f64) -> f64 {
    p * s.abs().powf(p - 1.0)
}

fn rhs_ref(r: f64, u: f64, v: f64, pr: &ModelParams) -> (f64, f64) {
    let f = f_ref(v * v - u * u, pr.p);
    (v * (pr.omega - pr.mass - f) - 2.0 * u / r, -u * (f + pr.mass + pr.omega))
}

fn rk4_ref(r: f64, y: (f64, f64), h: f64, pr: &ModelParams) -> (f64, f64) {
    let k1 = rhs_ref(r, y.0, y.1, pr);
    let k2 = rhs_ref(r + 0.5 * h, y.0 + 0.5 * h * k1.0, y.1 + 0.5 * h * k1.1, pr);
    let k3 = rhs_ref(r + 0.5 * h, y.0 + 0.5 * h * k2.0, y.1 + 0.5 * h * k2.1, pr);
    let k4 = rhs_ref(r + h, y.0 + h * k3.0, y.1 + h * k3.1, pr);
    (
        y.0 + h * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) / 6.0,
        y.1 + h * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) / 6.0,
    )
}

#[test]
fn rhs_examples() {
    let pr = weak();
    let x = 0.7;
    let (du, dv) = rhs(PlaneState::new(0.3, 0.0, x), &pr, Mode::Original).unwrap();
    assert_relative_eq!(du, x * (1.0 - f_ref(x * x, 0.1)), max_relative = 1e-15);
    assert_eq!(dv, 0.0);
    // Far from the diagonal φ_ε = 1.
    let reg = pr.with_regularization(0.2, 0.05).unwrap();
    let st = PlaneState::new(0.4, 0.1, 1.3);
    assert_eq!(phi_eps(0.1, 1.3, &reg).unwrap(), 1.0);
    assert_eq!(rhs(st, &reg, Mode::Regularized { eps: 0.2 }).unwrap(), rhs(st, &pr, Mode::Original).unwrap());
    // The autonomous field drops 2u/r only.
    let st = PlaneState::new(0.4, 0.999, 1.0);
    let (a, b) = rhs(st, &pr, Mode::Original).unwrap();
    let (c, d) = rhs(st, &pr, Mode::DiagonalSwitch).unwrap();
    assert_relative_eq!(c - a, 2.0 * 0.999 / 0.4, max_relative = 1e-12);
    assert_eq!(b, d);
    assert!(matches!(rhs(PlaneState::new(1.0, 0.5, 0.5), &pr, Mode::Original), Err(fracbag_core::Error::Singularity { .. })));
}

#[test]
fn taylor_launch_against_fine_rk4() {
    let pr = weak();
    let (x, h) = (1.0, 1e-4);
    let st = taylor_start(x, h, &pr);
    let a = x * (1.0 - f_ref(1.0, 0.1)) / 3.0;
    let (mut r, mut y) = (1e-10, (a * 1e-10, x));
    let step = 1e-8f64;
    while r < h {
        let dr = step.min(h - r);
        y = rk4_ref(r, y, dr, &pr);
        r += dr;
    }
    assert!((st.u - y.0).abs() <= 1e-10, "{} {}", st.u, y.0);
    assert!((st.v - y.1).abs() <= 1e-10, "{} {}", st.v, y.1);
    // v'(0) = 0: the v correction is second order.
    let st2 = taylor_start(x, 0.5 * h, &pr);
    assert_relative_eq!((st.v - x) / (st2.v - x), 4.0, max_relative = 1e-6);
    assert_eq!(taylor_start(0.0, h, &pr), PlaneState::new(h, 0.0, 0.0));
}

#[test]
fn band_entry_against_fixed_step_rk4() {
    let pr = near_threshold();
    let sc = shooting_constants(0.01, None, &pr).unwrap();
    let x = 3.0 * sc.e0;
    let ctl = IntegratorControls::default();
    let tr = integrate(x, &pr, &ctl).unwrap();
    let first = tr.events.iter().find(|e| e.kind == EventKind::DiagonalEnter).unwrap();
    assert!(tr.events.iter().take_while(|e| e.r < first.r).all(|e| e.kind != EventKind::VZero && e.kind != EventKind::HZero));
    // Fixed step 1e−6 in r with sign-change detection of the same band test.
    let g = |u: f64, v: f64| (v * v - u * u).abs() - ctl.band_width * (u.abs() + v.abs()).powi(2);
    let h = 1e-6;
    let st = taylor_start(x, h, &pr);
    let (mut r, mut y) = (h, (st.u, st.v));
    let mut g0 = g(y.0, y.1);
    let mut hit = None;
    let mut saw_vzero = false;
    while r < 0.05 {
        let y1 = rk4_ref(r, y, h, &pr);
        saw_vzero |= y1.1.signum() != y.1.signum();
        let g1 = g(y1.0, y1.1);
        if g0 > 0.0 && g1 <= 0.0 {
            hit = Some(r + h * g0 / (g0 - g1));
            break;
        }
        (r, y, g0) = (r + h, y1, g1);
    }
    let oracle = hit.unwrap();
    assert!(!saw_vzero);
    assert!((first.r - oracle).abs() <= 1e-5, "{} vs {oracle}", first.r);
    assert_relative_eq!(first.r, BAND_ENTRY_FROZEN, max_relative = 1e-8);
    // The terminal of this path.
    assert_eq!(tr.terminal, Terminal::EnergyNegativeHorizon);
    assert_eq!(tr.winding(), 1);
}

#[test]
fn crate_rk4_matches_reference() {
    let pr = weak();
    let st = PlaneState::new(0.5, 0.2, 0.9);
    let a = rk4_step(st, 1e-3, &pr, Mode::Original).unwrap();
    let b = rk4_ref(0.5, (0.2, 0.9), 1e-3, &pr);
    assert_relative_eq!(a.u, b.0, max_relative = 1e-14);
    assert_relative_eq!(a.v, b.1, max_relative = 1e-14);
}

/// Pseudo-arclength continuation of {H = H₀}: a unit tangent predictor along
/// the autonomous field, then bisection back onto the level set along the
/// anti-diagonal. `r` accumulates `dℓ/|field|` by the trapezoid rule.
fn trace_level_set(entry: PlaneState, pr: &ModelParams, ds: f64) -> PlaneState {
    let field = |u: f64, v: f64| {
        let f = f_ref(v * v - u * u, pr.p);
        (v * (pr.omega - pr.mass - f), -u * (f + pr.mass + pr.omega))
    };
    let h = |u: f64, v: f64| {
        let s = v * v - u * u;
        -0.5 * s.signum() * s.abs().powf(pr.p) + 0.5 * (pr.omega - pr.mass) * v * v + 0.5 * (pr.omega + pr.mass) * u * u
    };
    let w = |u: f64, v: f64| {
        let s = v * v - u * u;
        s.signum() * s.abs().powf(pr.p)
    };
    let h0 = h(entry.u, entry.v);
    let w_target = -w(entry.u, entry.v);
    let (mut u, mut v, mut r) = (entry.u, entry.v, entry.r);
    for _ in 0..10_000_000 {
        let (a, b) = field(u, v);
        let n = a.hypot(b);
        let (pu, pv) = (u + ds * a / n, v + ds * b / n);
        // H grows toward the diagonal from below; bisect along (−1, 1).
        let g = |t: f64| h(pu - t, pv + t) - h0;
        let (mut lo, mut hi) = (-4.0 * ds, 4.0 * ds);
        assert!(g(lo).signum() != g(hi).signum(), "corrector lost the level set at ({pu}, {pv})");
        let glo = g(lo);
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            if g(m).signum() == glo.signum() {
                lo = m;
            } else {
                hi = m;
            }
        }
        let t = 0.5 * (lo + hi);
        let (un, vn) = (pu - t, pv + t);
        let (c, d) = field(un, vn);
        let dl = (un - u).hypot(vn - v);
        let rn = r + 0.5 * dl * (1.0 / n + 1.0 / c.hypot(d));
        let (w0, w1) = (w(u, v) - w_target, w(un, vn) - w_target);
        if w0 > 0.0 && w1 <= 0.0 {
            // Locate w = −w₀ on the chord; the level set is resolved to ds.
            let t = w0 / (w0 - w1);
            return PlaneState::new(r + t * (rn - r), u + t * (un - u), v + t * (vn - v));
        }
        (u, v, r) = (un, vn, rn);
    }
    panic!("trace did not reach the far side: u = {u}, v = {v}, w = {}", w(u, v));
}

#[test]
fn diagonal_crossing_against_level_set_trace() {
    let pr = weak();
    let entry = PlaneState::new(1.0, 0.9, 1.0);
    let h0 = energy_h(entry.u, entry.v, &pr);
    let (exit, arc) = diagonal_crossing(entry, &pr, &IntegratorControls::default()).unwrap();
    assert!(!arc.is_empty());
    assert!((energy_h(exit.u, exit.v, &pr) - h0).abs() <= 1e-12 * h0);
    assert!(exit.s() < 0.0 && exit.u > exit.v && exit.v > 0.0);
    let oracle = trace_level_set(entry, &pr, 1e-6);
    for (a, b) in [(exit.u, oracle.u), (exit.v, oracle.v), (exit.r, oracle.r)] {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
    assert_relative_eq!(exit.u, CROSSING_FROZEN[0], max_relative = 1e-10);
    assert_relative_eq!(exit.v, CROSSING_FROZEN[1], max_relative = 1e-10);
    assert_relative_eq!(exit.r, CROSSING_FROZEN[2], max_relative = 1e-10);
}

#[test]
fn diagonal_crossing_preconditions() {
    let pr = weak();
    let c = IntegratorControls::default();
    // moving away from the diagonal
    assert!(diagonal_crossing(PlaneState::new(1.0, -0.9, 1.0), &pr, &c).is_err());
    assert!(diagonal_crossing(PlaneState::new(1.0, 0.5, 0.5), &pr, &c).is_err());
    assert!(diagonal_crossing(PlaneState::new(1.0, 0.0, 0.1), &pr, &c).is_err());
}

fn target() -> (ModelParams, fracbag_core::constants::ShootingConstants) {
    let pr = ModelParams::new(0.01, 1.1 * omega_threshold(0.017, 1.0).unwrap(), 1.0).unwrap();
    let sc = shooting_constants(0.01, None, &pr).unwrap();
    (pr, sc)
}

#[test]
fn energy_decay_and_crossings() {
    let (pr, sc) = target();
    let tr = integrate(10.0 * sc.e0, &pr, &IntegratorControls::default()).unwrap();
    assert!(!tr.crossings.is_empty());
    for c in &tr.crossings {
        assert!((c.h_exit - c.h_entry).abs() <= 1e-12 * c.h_entry.abs().max(1e-300), "{c:?}");
        assert!(c.w_before * c.w_after < 0.0);
    }
    for w in tr.samples.windows(2) {
        if w[0].zone != Zone::Tube && w[1].zone != Zone::Tube {
            assert!(w[1].h <= w[0].h + 1e-8 * (1.0 + w[0].h.abs()), "{:?} {:?}", w[0], w[1]);
        }
        assert!(w[1].r > w[0].r);
    }
    let d = diagnostics(&tr).unwrap();
    // adjacent-sample slopes carry the local step error, so only a loose bound here
    assert!(d.max_decay_residual() <= 1e-2, "{}", d.max_decay_residual());
    assert_eq!(d.node_radii.len(), tr.winding());
}

fn h_ref(u: f64, v: f64, pr: &ModelParams) -> f64 {
    let s = v * v - u * u;
    -0.5 * s.signum() * s.abs().powf(pr.p) + 0.5 * (pr.omega - pr.mass) * v * v + 0.5 * (pr.omega + pr.mass) * u * u
}

/// Central difference of H over ±h, each side by 64 reference RK4 substeps.
fn fd_slope(r: f64, u: f64, v: f64, h: f64, pr: &ModelParams) -> (f64, f64) {
    let side = |dir: f64| {
        let (mut rr, mut y) = (r, (u, v));
        let dr = dir * h / 64.0;
        for _ in 0..64 {
            y = rk4_ref(rr, y, dr, pr);
            rr += dr;
        }
        h_ref(y.0, y.1, pr)
    };
    let (hp, hm) = (side(1.0), side(-1.0));
    ((hp - hm) / (2.0 * h), 4.0 * f64::EPSILON * (hp.abs() + hm.abs() + pr.omega * (u * u + v * v)) / (2.0 * h))
}

#[test]
fn decay_rate_against_finite_differences() {
    let (pr, sc) = target();
    let tr = integrate(10.0 * sc.e0, &pr, &IntegratorControls::default()).unwrap();
    let h = 1e-6;
    let pts: Vec<&Sample> = tr
        .samples
        .iter()
        .filter(|s| {
            let q = v_sq_minus_u_sq(s);
            s.zone == Zone::Regular && s.r > 10.0 * h && s.r < 1.0 && q.abs() >= 0.05 * (s.u.abs() + s.v.abs()).powi(2)
        })
        .collect();
    let mut checked = 0;
    for s in pts.iter().step_by((pts.len() / 1500).max(1)) {
        let q = v_sq_minus_u_sq(s);
        let closed = -(2.0 * s.u * s.u / s.r) * (f_ref(q, pr.p) + pr.mass + pr.omega);
        let (fd, noise) = fd_slope(s.r, s.u, s.v, h, &pr);
        let (fd2, _) = fd_slope(s.r, s.u, s.v, 0.5 * h, &pr);
        // Richardson removes the h² term, which at rotation rate ~Ω is ~1e−5 on its own.
        let rich = (4.0 * fd2 - fd) / 3.0;
        if (fd - fd2).abs() > 1e-4 * closed.abs() || noise > 1e-7 * closed.abs() {
            continue;
        }
        assert!((rich - closed).abs() <= 1e-5 * closed.abs(), "r={} fd={rich} closed={closed}", s.r);
        checked += 1;
    }
    assert!(checked >= 100, "{checked}");
}

fn v_sq_minus_u_sq(s: &Sample) -> f64 {
    (s.v - s.u) * (s.v + s.u)
}

#[test]
fn cone_and_winding_floor_below_e0() {
    let (pr, sc) = target();
    for f in [0.25, 0.5, 0.9, 1.0] {
        let x = f * sc.e0;
        let tr = integrate(x, &pr, &IntegratorControls::default()).unwrap();
        assert_eq!(tr.terminal, Terminal::EnergyNegativeHorizon);
        assert_eq!(tr.winding(), 0);
        for s in tr.samples.iter().filter(|s| s.r <= sc.r0) {
            assert!(s.v * s.v - s.u * s.u >= sc.alpha * x * x * (1.0 - 1e-6));
        }
    }
}

#[test]
fn controls_validation() {
    let pr = weak();
    let mut c = IntegratorControls::default();
    assert!(c.validate(&pr).is_ok());
    c.tol_rel = 0.0;
    assert!(c.validate(&pr).is_err());
    let mut c = IntegratorControls::default();
    c.mode = Mode::Regularized { eps: 2.0 };
    assert!(c.validate(&pr).is_err());
    assert!(integrate(-1.0, &pr, &IntegratorControls::default()).is_err());
}

// Fixed-step oracle, x = 3·E₀, p = 0.01, Ω = 1.1·Ω_{0.01}.
const BAND_ENTRY_FROZEN: f64 = 1.32044604255627997e-2;
// Continuation oracle exit (u, v, r) for entry (r, u, v) = (1, 0.9, 1), p = 0.1, Ω = 2, m = 1.
const CROSSING_FROZEN: [f64; 3] = [6.93907666820699487e-1, 5.39914669250186385e-1, 1.08376072841992932e0];
