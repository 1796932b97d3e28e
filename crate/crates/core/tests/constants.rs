use approx::assert_relative_eq;
use fracbag_core::constants::*;
use fracbag_core::model::{level_constants, ModelParams};
use proptest::prelude::*;

fn g_alt(omega: f64, p: f64, m: f64) -> f64 {
    // e^{−a} − c(1 − e^{−a}), rearranged from the appendix form.
    let a = 4.0 * omega / ((omega - m) * (1.0 - p));
    let c = p + (1.0 - p) * m / omega;
    (-a).exp() + c * (-a).exp_m1()
}

#[test]
fn critical_exponent() {
    let pb = p_bar();
    assert!((pb - 0.0173622).abs() <= 1e-6, "{pb}");
    assert!(f_barrier(pb).unwrap().abs() < 1e-15);
    assert_relative_eq!(pb, P_BAR_FROZEN, max_relative = 1e-14);
}

#[test]
fn g_limits() {
    for p in [0.001, 0.01, 0.017] {
        assert!((g_barrier(1.0 + 1e-6, p, 1.0).unwrap() + 1.0).abs() <= 1e-3);
        // g − f ≈ −(1−p)(1 + 3e^{−4/(1−p)})·m/Ω, just above 1e−6 at Ω = 1e6 for p < p̄.
        let d = g_barrier(1e6, p, 1.0).unwrap() - f_barrier(p).unwrap();
        let lead = (1.0 - p) * (1.0 + 3.0 * (-4.0 / (1.0 - p)).exp()) * 1e-6;
        assert!((d + lead).abs() <= 0.05 * lead, "{d}");
        assert!((g_barrier(1e9, p, 1.0).unwrap() - f_barrier(p).unwrap()).abs() <= 1.1e-9);
    }
    assert!(g_barrier(1.0, 0.01, 1.0).is_err());
    assert!(g_barrier(0.5, 0.01, 1.0).is_err());
}

#[test]
fn g_at_two() {
    let g = g_barrier(2.0, 0.01, 1.0).unwrap();
    assert_relative_eq!(g, g_alt(2.0, 0.01, 1.0), max_relative = 1e-13);
    assert_relative_eq!(g, G_TWO_FROZEN, max_relative = 1e-13);
}

#[test]
fn thresholds() {
    let w = omega_threshold(0.01, 1.0).unwrap();
    assert!(g_barrier(w, 0.01, 1.0).unwrap().abs() <= 1e-10);
    assert!(g_barrier(w * (1.0 - 1e-6), 0.01, 1.0).unwrap() < 0.0);
    assert!(g_barrier(w * (1.0 + 1e-6), 0.01, 1.0).unwrap() > 0.0);
    assert_relative_eq!(w, OMEGA_001_FROZEN, max_relative = 1e-10);
    assert!(omega_threshold(0.001, 1.0).unwrap() < omega_threshold(0.017, 1.0).unwrap());
    // mass scales the threshold
    assert_relative_eq!(omega_threshold(0.01, 3.0).unwrap(), 3.0 * w, max_relative = 1e-10);
    assert!(omega_threshold(p_bar(), 1.0).is_err());
    assert!(omega_threshold(0.02, 1.0).is_err());
}

fn target() -> ModelParams {
    ModelParams::new(0.01, 1.1 * omega_threshold(0.017, 1.0).unwrap(), 1.0).unwrap()
}

#[test]
fn full_record() {
    let pr = target();
    let sc = shooting_constants(0.01, Some(0.017), &pr).unwrap();
    let om = pr.omega - pr.mass;
    assert_relative_eq!(sc.r0 * om * (1.0 - 0.017), 1.0, max_relative = 1e-15);
    assert_relative_eq!(sc.theta_lb, om * (0.017 - 0.01), max_relative = 1e-10);
    assert_relative_eq!(sc.alpha, g_alt(pr.omega, 0.017, 1.0), max_relative = 1e-12);
    assert!(sc.alpha > 0.0);
    assert_relative_eq!(sc.e1, sc.e0 * sc.e0 * sc.alpha, max_relative = 1e-15);
    assert_relative_eq!(sc.omega_p, omega_threshold(0.017, 1.0).unwrap(), max_relative = 1e-15);
    assert!(sc.q_exp > 0.1);
    assert_eq!(sc.c_gamma, level_constants(sc.gamma, &pr).unwrap().c_gamma);
    assert_relative_eq!(sc.q_exp, 2.0 * 0.99 * (pr.omega + 1.0) * sc.c_gamma - 1.0, max_relative = 1e-15);
    for (got, want) in [
        (sc.r0, RECORD_FROZEN[0]),
        (sc.alpha, RECORD_FROZEN[1]),
        (sc.theta_lb, RECORD_FROZEN[2]),
        (sc.gamma, RECORD_FROZEN[3]),
        (sc.c_gamma, RECORD_FROZEN[4]),
        (sc.e0, RECORD_FROZEN[5]),
        (sc.e1, RECORD_FROZEN[6]),
    ] {
        assert_relative_eq!(got, want, max_relative = 1e-9);
    }
}

#[test]
fn default_cone_exponent() {
    // At Ω = 1.1·Ω_p with p = 0.01 the rule min(2p, (p+p̄)/2) would not be admissible.
    let p = 0.01;
    let pr = ModelParams::new(p, 1.1 * omega_threshold(p, 1.0).unwrap(), 1.0).unwrap();
    let q = default_q_cone(p, &pr).unwrap();
    assert!(q > p && q < p_bar());
    assert!(g_barrier(pr.omega, q, 1.0).unwrap() > 0.0);
    let sc = shooting_constants(p, None, &pr).unwrap();
    assert!(sc.theta_lb > 0.0 && sc.alpha > 0.0);
    // Far above every threshold the rule reduces to 2p.
    let pr = target();
    assert_eq!(default_q_cone(0.005, &pr).unwrap(), 0.01);
}

#[test]
fn inadmissible_omega_is_reported() {
    let w = omega_threshold(0.017, 1.0).unwrap();
    let pr = ModelParams::new(0.01, 0.9 * w, 1.0).unwrap();
    let err = shooting_constants(0.01, Some(0.017), &pr).unwrap_err().to_string();
    assert!(err.contains(&format!("{w}")), "{err}");
}

#[test]
fn trapping_radius_is_positive() {
    let pr = target();
    let sc = shooting_constants(0.01, None, &pr).unwrap();
    let reg = pr.with_regularization(0.1, sc.e1).unwrap();
    let s0 = trapping_radius(0, &sc, &reg).unwrap();
    let s3 = trapping_radius(3, &sc, &reg).unwrap();
    // {H ≥ K} reaches to |v² − u²| ~ (2K)^{1/p} of the origin, so σ is tiny at p = 0.01.
    assert!(s0 > 0.0 && s3 > 0.0 && s3 <= s0);
    assert!(s0 < 1e-30);
    assert!(trapping_radius(0, &sc, &pr).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn admissible_region(p in 1e-4f64..0.016, t in 0.05f64..0.95, lw in 0.0f64..3.0) {
        let q = p + t * (p_bar() - p);
        let w = omega_threshold(q, 1.0).unwrap() * 10f64.powf(lw) * 1.0001;
        let pr = ModelParams::new(p, w, 1.0).unwrap();
        let sc = shooting_constants(p, Some(q), &pr).unwrap();
        prop_assert!(sc.theta_lb > 0.0);
        prop_assert!(sc.alpha > 0.0);
        prop_assert!(sc.q_exp > 0.0);
    }

    #[test]
    fn g_increasing_in_omega(p in 1e-4f64..0.5, a in 1e-6f64..1e4, b in 1e-6f64..1e4) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo * (1.0 + 1e-9));
        prop_assert!(g_barrier(1.0 + lo, p, 1.0).unwrap() <= g_barrier(1.0 + hi, p, 1.0).unwrap());
    }

    #[test]
    fn f_decreasing(a in 1e-6f64..0.99, b in 1e-6f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo);
        prop_assert!(f_barrier(lo).unwrap() > f_barrier(hi).unwrap());
    }
}

const P_BAR_FROZEN: f64 = 1.73621532547227342e-2;
const G_TWO_FROZEN: f64 = -5.04534321549597209e-1;
const OMEGA_001_FROZEN: f64 = 1.34471528335127829e2;
// r₀, α, Θ, γ, C_γ, E₀, E₁ at p = 0.01, q_cone = 0.017, Ω = 1.1·Ω_{0.017}.
const RECORD_FROZEN: [f64; 7] = [
    3.40830264646930104e-4,
    3.47291398023891196e-5,
    2.08932677769525981e1,
    2.98475253956463713e-3,
    4.92385378206366756e-2,
    1.75790658399919315e-2,
    1.07321222718447546e-8,
];
