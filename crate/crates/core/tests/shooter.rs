use approx::assert_relative_eq;
use fracbag_core::constants::{omega_threshold, shooting_constants, ShootingConstants};
use fracbag_core::integrator::*;
use fracbag_core::model::*;
use fracbag_core::shooter::*;
use fracbag_core::spinor::{density, spinor, verify_spinor, SpinorGrid};
use proptest::prelude::*;
use std::sync::OnceLock;

fn target() -> (ModelParams, ShootingConstants) {
    let pr = ModelParams::new(0.01, 1.1 * omega_threshold(0.017, 1.0).unwrap(), 1.0).unwrap();
    let sc = shooting_constants(0.01, None, &pr).unwrap();
    (pr, sc)
}

fn shooter() -> Shooter {
    Shooter::new(&target().0, &IntegratorControls::default()).unwrap()
}

fn ground() -> &'static ShotResult {
    static G: OnceLock<ShotResult> = OnceLock::new();
    G.get_or_init(|| shooter().find_nodal(0, 1e-12).unwrap())
}

fn energy_ref(u: f64, v: f64, pr: &ModelParams) -> f64 {
    let s = v * v - u * u;
    -0.5 * s.signum() * s.abs().powf(pr.p) + 0.5 * (pr.omega - pr.mass) * v * v + 0.5 * (pr.omega + pr.mass) * u * u
}

#[test]
fn first_basin_is_a0() {
    let (_, sc) = target();
    let sh = shooter();
    for f in [0.1, 0.5, 0.99, 1.0] {
        let c = sh.classify(f * sc.e0);
        assert_eq!(c.tag, Tag::InA(0), "{f}");
        assert!(c.h_terminal < 0.0);
    }
    // winding grows with x
    let n2 = sh.classify(2.0 * sc.e0).winding;
    let n10 = sh.classify(10.0 * sc.e0).winding;
    assert!(n10 > n2, "{n2} {n10}");
}

/// Step-doubling RK4 in the rescaled time τ (dr/dτ = 1/(F + Ω + m)) on the raw
/// system, run until the orbit collapses onto the origin or reaches `r_end`.
/// Returns the zeros of v, the first radius with H < 0 and the collapse radius.
fn tau_oracle(x: f64, pr: &ModelParams, r_end: f64) -> (Vec<f64>, Option<f64>, Option<f64>) {
    let c = pr.omega + pr.mass;
    let f = |y: [f64; 3]| {
        let s = (y[2] - y[1]) * (y[2] + y[1]);
        let g = if s == 0.0 { 0.0 } else { s.abs().powf(1.0 - pr.p) / pr.p };
        let inv = g / (1.0 + c * g);
        [inv, y[2] * ((pr.omega - pr.mass) * inv - 1.0 / (1.0 + c * g)) - 2.0 * y[1] * inv / y[0], -y[1]]
    };
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let rk4 = |y: [f64; 3], h: f64| {
        let k1 = f(y);
        let k2 = f(add(y, k1, 0.5 * h));
        let k3 = f(add(y, k2, 0.5 * h));
        let k4 = f(add(y, k3, h));
        [0, 1, 2].map(|i| y[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
    };
    let r0 = 1e-6;
    let a = x * (pr.omega - pr.mass - pr.p * x.powf(2.0 * pr.p - 2.0)) / 3.0;
    let mut y = [r0, a * r0, x];
    let (mut zeros, mut negative) = (Vec::new(), None);
    let mut h = 1e-4;
    let tol = 1e-12;
    while y[0] < r_end {
        let full = rk4(y, h);
        let half = rk4(rk4(y, 0.5 * h), 0.5 * h);
        let err = ((full[1] - half[1]).abs() + (full[2] - half[2]).abs()) / (y[1].abs() + y[2].abs()) + (full[0] - half[0]).abs() / y[0];
        if !(err <= tol) {
            h *= if err.is_finite() { (0.9 * (tol / err).powf(0.2)).max(0.2) } else { 0.2 };
            continue;
        }
        if half[2] * y[2] < 0.0 {
            zeros.push(half[0]);
        }
        if negative.is_none() && energy_ref(half[1], half[2], pr) < 0.0 {
            negative = Some(half[0]);
        }
        y = half;
        if y[1].abs() + y[2].abs() < 1e-30 * x {
            return (zeros, negative, Some(y[0]));
        }
        h *= (0.9 * (tol / err.max(1e-300)).powf(0.2)).min(4.0);
    }
    (zeros, negative, None)
}

#[test]
fn classify_against_independent_integration() {
    // p = 0.01 at 1.1 times its own threshold, x = 2·E₀.
    let pr = ModelParams::new(0.01, 1.1 * omega_threshold(0.01, 1.0).unwrap(), 1.0).unwrap();
    let sc = shooting_constants(0.01, None, &pr).unwrap();
    let x = 2.0 * sc.e0;
    let (c, tr) = Shooter::new(&pr, &IntegratorControls::default()).unwrap().classify_full(x);
    let tr = tr.unwrap();
    let (zeros, negative, collapse) = tau_oracle(x, &pr, 0.05);
    // The oracle follows the slide onto the origin and cannot continue past it;
    // up to there the two agree on every event.
    let rc = collapse.expect("no collapse");
    assert!(zeros.is_empty(), "{zeros:?}");
    assert!(negative.map_or(true, |r| r >= rc * (1.0 - 1e-9)));
    assert_eq!(c.tag, Tag::InA(0));
    assert_eq!(c.winding, zeros.len());
    let r1 = tr.first_negative_energy().unwrap();
    assert!((r1 - rc).abs() <= 1e-8 * rc, "{r1} {rc}");
    assert!((c.rho0 - rc).abs() <= 1e-8 * rc);
    assert_relative_eq!(rc, COLLAPSE_FROZEN, max_relative = 1e-9);
}

#[test]
fn ground_state() {
    let (pr, sc) = target();
    let g = ground();
    assert_eq!(g.k, 0);
    assert!(g.node_radii.is_empty());
    assert!(g.min_radius <= NEAR_HIT * g.x_k, "{}", g.min_radius);
    assert!(g.support_radius <= std::f64::consts::PI / sc.theta_lb + sc.r0);
    assert_eq!(g.support_bound, std::f64::consts::PI / sc.theta_lb + sc.r0);
    let (lo, hi) = g.bracket;
    assert!(hi - lo <= 1e-12 * hi);
    assert!(lo <= g.x_k && g.x_k < hi);
    // the zero extension beyond the support
    let tr = &g.trajectory;
    let rh = tr.hit_radius().unwrap_or(g.support_radius);
    for f in [1.0, 1.5, 10.0] {
        let st = tr.state_at(f * rh).unwrap();
        if tr.hit_radius().is_some() {
            assert_eq!((st.u, st.v), (0.0, 0.0));
        }
    }
    let _ = pr;
}

#[test]
fn ground_state_bracket_invariants() {
    let sh = shooter();
    let g = ground();
    let (lo, hi) = g.bracket;
    assert_eq!(sh.classify(lo).tag, Tag::InA(0));
    assert_eq!(sh.classify(hi).tag, Tag::InA(1));
    // both ends stay put when moved away from the boundary
    assert_eq!(sh.classify(lo * (1.0 - 1e-9)).tag, Tag::InA(0));
    assert_eq!(sh.classify(hi * (1.0 + 1e-9)).tag, Tag::InA(1));
    // the bracket halves at every bisection step; the last entry is the final midpoint
    let scan = g.log.len() - 1 - g.iterations;
    let (lo0, hi0) = (g.log[scan - 2].0, g.log[scan - 1].0);
    assert!(g.log[scan - 1].2 >= 1);
    let expect = (hi0 - lo0) / 2f64.powi(g.iterations as i32);
    assert!(((hi - lo) - expect).abs() <= 1e-6 * expect + 8.0 * f64::EPSILON * hi, "{} {expect}", hi - lo);
    let mut a = lo0;
    let mut b = hi0;
    for &(x, ref tag, w) in &g.log[scan..g.log.len() - 1] {
        assert!(x > a && x < b);
        assert_eq!(x, 0.5 * (a + b));
        if tag == "A0" && w == 0 {
            a = x;
        } else {
            b = x;
        }
    }
    assert_eq!((a, b), (lo, hi));
}

#[test]
fn ground_state_against_grid_scan() {
    // The first A₀ → A₁ transition on 10⁴ log-spaced points in (E₀, 10²E₀),
    // visited every 100th point first and then inside the transition cell.
    let (_, sc) = target();
    let sh = shooter();
    let grid = |i: usize| sc.e0 * 100f64.powf(i as f64 / 1e4);
    let is_a0 = |i: usize| sh.classify(grid(i)).tag == Tag::InA(0);
    let mut cell = None;
    for j in 1..=100 {
        if !is_a0(100 * j) {
            cell = Some(100 * (j - 1));
            break;
        }
    }
    let start = cell.expect("no transition below 100·E₀");
    let (mut lo, mut hi) = (start, start + 100);
    for i in start + 1..start + 100 {
        if is_a0(i) {
            lo = i;
        } else {
            hi = i;
            break;
        }
    }
    assert_eq!(hi, lo + 1);
    let x0 = ground().x_k;
    assert!(grid(lo) <= x0 && x0 <= grid(hi), "{} {x0} {}", grid(lo), grid(hi));
}

#[test]
fn ground_state_residuals() {
    let (pr, _) = target();
    let tr = &ground().trajectory;
    let res = verify_radial(tr, &pr);
    assert!(res.segments > 100);
    assert!(res.max <= 1e-6 * res.scale, "{} {}", res.max, res.scale);
    let rs = ground().support_radius;
    // the cube sits inside the support ball
    let grid = SpinorGrid { n: 20, half_width: rs / 3f64.sqrt(), step: 1e-3 * rs };
    let sp = verify_spinor(tr, &pr, &grid).unwrap();
    assert!(sp.points > 1000);
    assert!(sp.max_relative <= 1e-5, "{sp:?}");
    assert!(sp.density_mismatch <= 1e-12);
}

#[test]
fn excited_states_increase() {
    let sh = shooter();
    let x0 = ground().x_k;
    let s1 = sh.find_nodal(1, 1e-12).unwrap();
    let s2 = sh.find_nodal(2, 1e-12).unwrap();
    assert_eq!(s1.node_radii.len(), 1);
    assert_eq!(s2.node_radii.len(), 2);
    assert_eq!(s1.trajectory.winding(), 1);
    assert_eq!(s2.trajectory.winding(), 2);
    assert!(x0 < s1.x_k && s1.x_k < s2.x_k);
    for s in [&s1, &s2] {
        assert!(s.min_radius <= NEAR_HIT * s.x_k);
        assert!(s.support_radius <= s.support_bound);
    }
}

#[test]
fn zero_trajectory() {
    let (pr, _) = target();
    let zero = |r: f64| Sample { r, u: 0.0, v: 0.0, h: 0.0, w: 0.0, du: 0.0, dv: 0.0, zone: Zone::Regular };
    let tr = Trajectory {
        x: 0.0,
        samples: (0..=200).map(|i| zero(i as f64 / 200.0)).collect(),
        events: vec![],
        crossings: vec![],
        terminal: Terminal::HorizonReached,
        params: pr,
        controls: IntegratorControls::default(),
        min_radius: 0.0,
        vertex_radii: vec![],
    };
    assert_eq!(verify_radial(&tr, &pr).max, 0.0);
    let sp = verify_spinor(&tr, &pr, &SpinorGrid { n: 4, half_width: 0.1, step: 1e-4 }).unwrap();
    assert_eq!(sp.max_abs, 0.0);
}

#[test]
fn search_preconditions() {
    let w = omega_threshold(0.017, 1.0).unwrap();
    // below every admissible threshold for p = 0.016
    let pr = ModelParams::new(0.016, 0.99 * omega_threshold(0.016, 1.0).unwrap(), 1.0).unwrap();
    let sh = Shooter::new(&pr, &IntegratorControls::default()).unwrap();
    assert!(matches!(sh.find_nodal(0, 1e-6), Err(fracbag_core::Error::Precondition(_))));
    let sh = shooter();
    assert!(sh.find_nodal(0, 0.0).is_err());
    assert!(sh.find_nodal(0, 1.0).is_err());
    assert!(sh.find_nodal_from(0, -1.0, 1e-6).is_err());
    let _ = w;
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dichotomy_and_trapping(f in 0.3f64..8.0) {
        let (pr, sc) = target();
        let sh = shooter();
        let (c, tr) = sh.classify_full(f * sc.e0);
        let tr = tr.unwrap();
        match c.tag {
            Tag::InA(k) => {
                prop_assert_eq!(k, c.winding);
                prop_assert!(c.h_terminal < 0.0);
                prop_assert_eq!(tail_windings(&tr).unwrap(), 0);
                // v vanishes only where H ≥ 0
                for e in tr.events.iter().filter(|e| e.kind == EventKind::VZero) {
                    prop_assert!(energy_h(e.state.u, e.state.v, &pr) >= -1e-12 * sc.e0 * sc.e0 * pr.omega);
                }
                let r1 = tr.first_negative_energy().unwrap_or(0.0);
                prop_assert!(tr.r_end() >= r1 + 5.0 * std::f64::consts::PI / sc.theta_lb * (1.0 - 1e-12));
                // A_k is open
                for d in [-1e-9, 1e-9] {
                    prop_assert_eq!(sh.classify(f * sc.e0 * (1.0 + d)).tag, Tag::InA(k));
                }
            }
            Tag::NearI(k) => {
                prop_assert_eq!(k, c.winding);
                prop_assert!(tr.hit_radius().unwrap() <= (k as f64 + 1.0) * std::f64::consts::PI / sc.theta_lb + sc.r0);
            }
            Tag::Unresolved(why) => prop_assert!(false, "{}", why),
        }
    }

    #[test]
    fn spinor_density_is_v2_minus_u2(u in -3.0f64..3.0, v in -3.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        prop_assume!(x * x + y * y + z * z > 1e-6);
        let d = density(&spinor(u, v, [x, y, z]));
        prop_assert!((d - (v * v - u * u)).abs() <= 1e-13 * (u * u + v * v).max(1.0));
    }
}

// τ-oracle collapse radius, x = 2·E₀, p = 0.01, Ω = 1.1·Ω_{0.01}.
const COLLAPSE_FROZEN: f64 = 1.39157585791799716e-2;
