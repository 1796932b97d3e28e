//! Spherical Bessel functions of orders 0 and 1.

use crate::math::{abs, cos, sin};

/// `j₀(x) = sin x / x`.
pub fn j0(x: f64) -> f64 {
    if abs(x) < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        sin(x) / x
    }
}

/// `j₁(x) = sin x / x² − cos x / x`.
pub fn j1(x: f64) -> f64 {
    if abs(x) < 0.5 {
        // Series avoids the cancellation of the closed form.
        let x2 = x * x;
        let mut term = x / 3.0;
        let mut sum = term;
        for k in 1..12 {
            let k = k as f64;
            term *= -x2 / (2.0 * k * (2.0 * k + 3.0));
            sum += term;
        }
        sum
    } else {
        sin(x) / (x * x) - cos(x) / x
    }
}

/// `y₀(x) = −cos x / x`.
pub fn y0(x: f64) -> f64 {
    -cos(x) / x
}

/// `y₁(x) = −cos x / x² − sin x / x`.
pub fn y1(x: f64) -> f64 {
    -cos(x) / (x * x) - sin(x) / x
}
