//! Gaussian tail function.

use std::f64::consts::FRAC_1_SQRT_2;

/// `Q(x) = P(N(0,1) > x) = erfc(x/√2)/2`.
///
/// Accurate to a few ulp wherever the result is a normal double; beyond
/// `x ≈ 37.5` the value is subnormal and it reaches zero near `x ≈ 38.5`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}
