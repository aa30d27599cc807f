//! Standard normal helpers with a tail-safe log-CDF.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `½ log(2π)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the asymptotic series replaces `erfc`.
const ASYMPTOTIC_CUTOFF: f64 = -30.0;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `log Φ(z)`, finite for every finite `z`.
pub fn ln_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z > 5.0 {
        // Φ(z) = 1 - Φ(-z), with Φ(-z) tiny
        (-0.5 * erfc(z * FRAC_1_SQRT_2)).ln_1p()
    } else if z > ASYMPTOTIC_CUTOFF {
        (0.5 * erfc(-z * FRAC_1_SQRT_2)).ln()
    } else {
        // Mills-ratio expansion: Φ(z) ≈ φ(z)/|z| · Σ (-1)^k (2k-1)!! / z^{2k}
        -0.5 * z * z - HALF_LN_2PI - (-z).ln() + mills_series(z).ln()
    }
}

/// `log Φ(z) + z²/2`, evaluated without cancellation in the lower tail.
pub fn ln_cdf_plus_half_square(z: f64) -> f64 {
    if z > ASYMPTOTIC_CUTOFF {
        ln_cdf(z) + 0.5 * z * z
    } else {
        -HALF_LN_2PI - (-z).ln() + mills_series(z).ln()
    }
}

fn mills_series(z: f64) -> f64 {
    let w = 1.0 / (z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=8 {
        term *= -((2 * k - 1) as f64) * w;
        sum += term;
    }
    sum
}
