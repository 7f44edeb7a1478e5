//! Upper orthant probabilities of the standard bivariate normal.
//!
//! `P(X >= h, Y >= k)` with `corr(X, Y) = rho` is the Gaussian measure of the
//! intersection of two half-spaces once the problem is projected onto the
//! plane spanned by their normals. Evaluation follows the Drezner-Wesolowsky
//! single-integral form with Genz's large-|rho| expansion, using 20-point
//! Gauss-Legendre nodes throughout.
//!
//! Every evaluation is carried out relative to a caller-chosen log scale, so
//! that `P / (1 - Phi(h))` (a conditional probability) keeps full absolute
//! accuracy even when both numerator and denominator underflow.
#![allow(clippy::excessive_precision)]

use super::normal::{log_pdf, log_sf};
use super::NumericsError;
use std::f64::consts::PI;

/// Correlations with `|rho| >= 1 - RHO_LIMIT_BAND` use the collinear limits.
pub const RHO_LIMIT_BAND: f64 = 1e-7;
/// Allowed excess of `|rho|` over one before inputs are rejected.
pub const RHO_TOLERANCE: f64 = 1e-9;

const LARGE_RHO: f64 = 0.925;
const TWO_PI: f64 = 2.0 * PI;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Gauss-Legendre N = 20, (weight, node) for the negative half of [-1, 1].
const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

/// Reduced 2-D parameters of a two-half-space intersection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthantInputs {
    pub h: f64,
    pub k: f64,
    pub rho: f64,
}

impl OrthantInputs {
    /// Validates the inputs, clamping `rho` into `[-1, 1]` when it is outside
    /// by no more than [`RHO_TOLERANCE`].
    pub fn new(h: f64, k: f64, rho: f64) -> Result<Self, NumericsError> {
        if !h.is_finite() {
            return Err(NumericsError::NonFinite("h"));
        }
        if !k.is_finite() {
            return Err(NumericsError::NonFinite("k"));
        }
        if !rho.is_finite() || rho.abs() > 1.0 + RHO_TOLERANCE {
            return Err(NumericsError::CorrelationOutOfRange(rho));
        }
        Ok(Self { h, k, rho: rho.clamp(-1.0, 1.0) })
    }

    pub(crate) fn unchecked(h: f64, k: f64, rho: f64) -> Self {
        Self { h, k, rho: rho.clamp(-1.0, 1.0) }
    }

    pub fn is_collinear(&self) -> bool {
        self.rho.abs() >= 1.0 - RHO_LIMIT_BAND
    }

    pub fn swapped(&self) -> Self {
        Self { h: self.k, k: self.h, rho: self.rho }
    }
}

/// Partial derivatives of an orthant quantity with respect to `(h, k, rho)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OrthantGrad {
    pub dh: f64,
    pub dk: f64,
    pub drho: f64,
}

/// `P(X >= h, Y >= k)` for a standard bivariate normal with correlation `rho`.
pub fn orthant_upper(inputs: OrthantInputs) -> f64 {
    scaled_upper(inputs.h, inputs.k, inputs.rho, 0.0).clamp(0.0, 1.0)
}

/// `P(Y >= k | X >= h)`, i.e. `orthant_upper / (1 - Phi(h))`, evaluated without
/// forming either factor explicitly.
pub fn orthant_conditional(inputs: OrthantInputs) -> f64 {
    scaled_upper(inputs.h, inputs.k, inputs.rho, log_sf(inputs.h)).clamp(0.0, 1.0)
}

/// Analytic gradient of [`orthant_upper`].
///
/// Errors when `rho` is inside the collinear band; use
/// [`orthant_upper_subgrad`] there.
pub fn orthant_upper_grad(inputs: OrthantInputs) -> Result<OrthantGrad, NumericsError> {
    if inputs.is_collinear() {
        return Err(NumericsError::CollinearGradient(inputs.rho));
    }
    Ok(scaled_grad(inputs.h, inputs.k, inputs.rho, 0.0))
}

/// Gradient of [`orthant_upper`] that is defined everywhere: inside the
/// collinear band the one-sided value at `rho = +-(1 - 1e-7)` is returned.
pub fn orthant_upper_subgrad(inputs: OrthantInputs) -> OrthantGrad {
    let rho = clamp_rho_for_grad(inputs.rho);
    scaled_grad(inputs.h, inputs.k, rho, 0.0)
}

/// Gradient of [`orthant_conditional`], with the same collinear-band rule as
/// [`orthant_upper_subgrad`].
pub fn orthant_conditional_grad(inputs: OrthantInputs) -> OrthantGrad {
    let OrthantInputs { h, k, .. } = inputs;
    let rho = clamp_rho_for_grad(inputs.rho);
    let ls = log_sf(h);
    let joint = scaled_grad(h, k, rho, ls);
    // d/dh [P / sf(h)] = (P_h + lambda(h) P) / sf(h)
    let lambda = (log_pdf(h) - ls).exp();
    let cond = scaled_upper(h, k, rho, ls);
    OrthantGrad { dh: joint.dh + lambda * cond, dk: joint.dk, drho: joint.drho }
}

fn clamp_rho_for_grad(rho: f64) -> f64 {
    rho.clamp(-1.0 + RHO_LIMIT_BAND, 1.0 - RHO_LIMIT_BAND)
}

/// Partials of `P(h, k, rho) * exp(-ls)`.
fn scaled_grad(h: f64, k: f64, rho: f64, ls: f64) -> OrthantGrad {
    let s2 = (1.0 - rho) * (1.0 + rho);
    let s = s2.sqrt();
    let dh = -(log_pdf(h) + log_sf((k - rho * h) / s) - ls).exp();
    let dk = -(log_pdf(k) + log_sf((h - rho * k) / s) - ls).exp();
    let q = (h * h - 2.0 * rho * h * k + k * k) / (2.0 * s2);
    let drho = (-q - TWO_PI.ln() - s.ln() - ls).exp();
    OrthantGrad { dh, dk, drho }
}

/// `P(X >= h, Y >= k; rho) * exp(-ls)`.
fn scaled_upper(h: f64, k: f64, rho: f64, ls: f64) -> f64 {
    if rho >= 1.0 - RHO_LIMIT_BAND {
        return (log_sf(h.max(k)) - ls).exp();
    }
    if rho <= -1.0 + RHO_LIMIT_BAND {
        // P(X >= h, X <= -k)
        let v = (log_sf(h) - ls).exp() - (log_sf(-k) - ls).exp();
        return v.max(0.0);
    }
    if rho.abs() < LARGE_RHO {
        return moderate_rho(h, k, rho, ls);
    }
    if rho > 0.0 {
        large_positive_rho(h, k, rho, ls)
    } else {
        // P(X >= h, Y >= k; rho) = P(X >= h) - P(X >= h, -Y >= -k; -rho)
        ((log_sf(h) - ls).exp() - large_positive_rho(h, -k, -rho, ls)).max(0.0)
    }
}

fn moderate_rho(h: f64, k: f64, rho: f64, ls: f64) -> f64 {
    let independent = (log_sf(h) + log_sf(k) - ls).exp();
    if rho == 0.0 {
        return independent;
    }
    let hk = h * k;
    let hs = 0.5 * (h * h + k * k);
    let half_angle = 0.5 * rho.asin();
    let mut acc = 0.0;
    for &(w, x) in GL20.iter() {
        for sign in [-1.0, 1.0] {
            let sn = (half_angle * (sign * x + 1.0)).sin();
            let e = (sn * hk - hs) / (1.0 - sn * sn) - ls;
            acc += w * e.exp();
        }
    }
    independent + acc * half_angle / TWO_PI
}

fn large_positive_rho(h: f64, k: f64, rho: f64, ls: f64) -> f64 {
    let hk = h * k;
    let a_s = (1.0 - rho) * (1.0 + rho);
    let mut a = a_s.sqrt();
    let b_s = (h - k) * (h - k);
    let b = (h - k).abs();
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;

    let mut bvn = 0.0;
    let e0 = -0.5 * (b_s / a_s + hk) - ls;
    if e0 > -100.0 {
        bvn = a
            * e0.exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
    }
    let poly = 1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0;
    if b > 0.0 {
        let e1 = -0.5 * hk + log_sf(b / a) - ls;
        if e1 > -100.0 {
            bvn -= e1.exp() * SQRT_2PI * b * poly;
        }
    }
    a *= 0.5;
    for &(w, x) in GL20.iter() {
        for sign in [-1.0, 1.0] {
            let xv = a * (sign * x + 1.0);
            let x_s = xv * xv;
            let r_s = (1.0 - x_s).sqrt();
            let e = -0.5 * (b_s / x_s + hk) - ls;
            if e > -100.0 {
                bvn += a
                    * w
                    * e.exp()
                    * ((-hk * (1.0 - r_s) / (2.0 * (1.0 + r_s))).exp() / r_s
                        - (1.0 + c * x_s * (1.0 + d * x_s)));
            }
        }
    }
    -bvn / TWO_PI + (log_sf(h.max(k)) - ls).exp()
}

/// `P(X <= h, Y <= k; rho)`, the lower-orthant form.
pub fn orthant_lower(inputs: OrthantInputs) -> f64 {
    orthant_upper(OrthantInputs { h: -inputs.h, k: -inputs.k, rho: inputs.rho })
}
