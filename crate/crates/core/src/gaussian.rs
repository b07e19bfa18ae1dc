//! Standard normal distribution helpers built on the complementary error
//! function.
//!
//! Every probability is routed through `erfc` on the side of the distribution
//! where the result is small, so interval probabilities far in either tail keep
//! full relative precision instead of cancelling against 1.

use crate::scalar::Scalar;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF Φ(x).
#[inline]
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    T::lit(cdf64(x.as_f64()))
}

/// Upper tail 1 − Φ(x).
#[inline]
pub fn normal_sf<T: Scalar>(x: T) -> T {
    T::lit(cdf64(-x.as_f64()))
}

/// P(lo ≤ Z ≤ hi) for Z ~ N(0, 1). Returns 0 when `hi <= lo`.
#[inline]
pub fn normal_interval_prob<T: Scalar>(lo: T, hi: T) -> T {
    T::lit(interval64(lo.as_f64(), hi.as_f64()))
}

#[inline]
pub(crate) fn cdf64(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn interval64(lo: f64, hi: f64) -> f64 {
    if hi <= lo || lo.is_nan() || hi.is_nan() {
        return 0.0;
    }
    let p = if lo >= 0.0 {
        0.5 * (libm::erfc(lo * FRAC_1_SQRT_2) - libm::erfc(hi * FRAC_1_SQRT_2))
    } else if hi <= 0.0 {
        0.5 * (libm::erfc(-hi * FRAC_1_SQRT_2) - libm::erfc(-lo * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * libm::erfc(-lo * FRAC_1_SQRT_2) - 0.5 * libm::erfc(hi * FRAC_1_SQRT_2)
    };
    p.clamp(0.0, 1.0)
}
