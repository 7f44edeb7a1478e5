//! Gaussian measures of half-spaces and of their pairwise intersections.

mod normal;
pub mod oracle;
mod orthant;

pub use normal::{
    bivariate_pdf, cdf, denotational_prob_from_norm, erf, erfc, inv_mills, log_pdf, log_sf, pdf,
    sf, std_normal_cdf,
};
pub use oracle::{mc_orthant_oracle, McEstimate};
pub use orthant::{
    orthant_conditional, orthant_conditional_grad, orthant_lower, orthant_upper,
    orthant_upper_grad, orthant_upper_subgrad, OrthantGrad, OrthantInputs, RHO_LIMIT_BAND,
    RHO_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),
    #[error("norm must be non-negative, got {0}")]
    NegativeNorm(f64),
    #[error("correlation {0} outside [-1, 1]")]
    CorrelationOutOfRange(f64),
    #[error("correlation {0} is inside the collinear band; use the subgradient")]
    CollinearGradient(f64),
}
