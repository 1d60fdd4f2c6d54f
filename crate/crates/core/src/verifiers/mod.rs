//! Harness-side scoring of candidate solutions.
//!
//! Every score the harness records comes from one of these functions; what a
//! candidate program claims about its own result is ignored.

mod circles;
mod hermite;
mod kissing;
mod points;
mod registry;

pub use circles::{check_circles, score_circles, verify_circles, Circle, CirclePacking, CircleViolation};
pub use hermite::{
    basis_conversion_factor, evaluate_series, score_uncertainty, uncertainty_details, values_at_zero, HermiteBasis,
    HermiteCandidate, HermiteError, UncertaintyDetails, REPAIR_TOLERANCE,
};
pub use kissing::{score_kissing, KissingConfiguration, KISSING_DIMENSION};
pub use points::{score_heilbronn, score_max_min_ratio, PointSet2D, HEILBRONN_TRIANGLE};
pub use registry::{ScoreFn, SolutionSchema, VerifierRegistry};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifierError {
    /// The payload parsed but describes an invalid solution.
    #[error("invalid: {0}")]
    Invalid(String),
    /// The payload does not match the solution schema.
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("unknown verifier `{0}`")]
    UnknownVerifier(String),
    #[error("verifier `{0}` is already registered")]
    DuplicateVerifier(String),
    #[error("solution schema `{0}` is already registered with a different definition")]
    DuplicateSchema(String),
}

impl VerifierError {
    pub fn invalid(reason: impl Into<String>) -> Self {
        VerifierError::Invalid(reason.into())
    }
}
