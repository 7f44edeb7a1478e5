//! Standard normal distribution helpers built on `erf`/`erfc`.
//!
//! The unchecked functions (`cdf`, `sf`, `pdf`, `log_sf`, ...) are the hot-path
//! versions used throughout the crate; the `std_normal_cdf` and
//! `denotational_prob_from_norm` entry points validate their input.

use super::NumericsError;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// ln(sqrt(2 pi))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Phi(x), the lower tail.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// 1 - Phi(x), computed without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// ln(1 - Phi(x)), accurate far into the upper tail.
pub fn log_sf(x: f64) -> f64 {
    if x < 35.0 {
        sf(x).ln()
    } else {
        // Asymptotic Mills-ratio expansion; the truncation error is far below
        // f64 resolution for x >= 35.
        let z = 1.0 / (x * x);
        let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
        -0.5 * x * x - x.ln() - LN_SQRT_2PI + series.ln()
    }
}

/// Inverse Mills ratio phi(x) / (1 - Phi(x)).
#[inline]
pub fn inv_mills(x: f64) -> f64 {
    (log_pdf(x) - log_sf(x)).exp()
}

/// Checked Phi(x).
pub fn std_normal_cdf(x: f64) -> Result<f64, NumericsError> {
    if !x.is_finite() {
        return Err(NumericsError::NonFinite("x"));
    }
    Ok(cdf(x))
}

/// Gaussian measure of the half-space `{y : (y - x)^T x > 0}` for `|x| = r`,
/// i.e. `(1 - erf(r / sqrt 2)) / 2`.
pub fn denotational_prob_from_norm(r: f64) -> Result<f64, NumericsError> {
    if !r.is_finite() {
        return Err(NumericsError::NonFinite("r"));
    }
    if r < 0.0 {
        return Err(NumericsError::NegativeNorm(r));
    }
    Ok(sf(r))
}

/// Bivariate standard normal density with correlation `rho`.
pub fn bivariate_pdf(x: f64, y: f64, rho: f64) -> f64 {
    let s2 = (1.0 - rho) * (1.0 + rho);
    let q = (x * x - 2.0 * rho * x * y + y * y) / (2.0 * s2);
    (-q).exp() / (2.0 * PI * s2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::oracle;

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
    }

    #[test]
    fn cdf_saturates() {
        assert!((std_normal_cdf(40.0).unwrap() - 1.0).abs() <= 1e-12);
        assert!(std_normal_cdf(-40.0).unwrap() <= 1e-12);
    }

    #[test]
    fn cdf_rejects_non_finite() {
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn cdf_matches_quadrature() {
        // Frozen from oracle::quad_norm_cdf(1.0) (adaptive Gauss-Kronrod of the
        // density on [-40, 1]); the live oracle is rechecked below.
        const PHI_1: f64 = 0.841_344_746_068_542_9;
        assert!((std_normal_cdf(1.0).unwrap() - PHI_1).abs() <= 1e-12);
        for &x in &[-5.0, -2.5, -1.0, -0.3, 0.0, 0.7, 1.0, 2.2, 4.0, 6.5] {
            let q = oracle::quad_norm_cdf(x);
            assert!((cdf(x) - q).abs() <= 1e-12, "x={x}: {} vs {q}", cdf(x));
        }
    }

    #[test]
    fn denotational_prob_values() {
        assert_eq!(denotational_prob_from_norm(0.0).unwrap(), 0.5);
        const SF_1: f64 = 0.158_655_253_931_457_05;
        assert!((denotational_prob_from_norm(1.0).unwrap() - SF_1).abs() <= 1e-12);
        for &r in &[0.1, 0.5, 2.0] {
            let closed = 0.5 * (1.0 - erf(r / std::f64::consts::SQRT_2));
            assert!((denotational_prob_from_norm(r).unwrap() - closed).abs() <= 1e-15);
        }
        assert!(denotational_prob_from_norm(-0.1).is_err());
        assert!(denotational_prob_from_norm(f64::NAN).is_err());
    }

    #[test]
    fn log_sf_is_continuous_across_branch() {
        let below = log_sf(35.0 - 1e-9);
        let above = log_sf(35.0);
        assert!((below - above).abs() < 1e-8 * below.abs());
        for &x in &[-3.0, 0.0, 2.0, 10.0, 20.0, 30.0] {
            assert!((log_sf(x) - sf(x).ln()).abs() <= 1e-12 * sf(x).ln().abs().max(1.0));
        }
    }

    #[test]
    fn inv_mills_large_argument() {
        // lambda(x) -> x + 1/x for large x
        let x = 50.0;
        assert!((inv_mills(x) - (x + 1.0 / x)).abs() < 1e-4);
        assert!((inv_mills(0.0) - 2.0 * pdf(0.0)).abs() < 1e-15);
    }
}
