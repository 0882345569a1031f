//! Shared error type. Variants are grouped loosely by the way callers react:
//! malformed input, a point outside the domain, or a certified mathematical
//! impossibility (no separating functional, no fit, no isometric extension).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable count mismatch: expected {expected}, got {got}")]
    DimsMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("similarity matrix is too ill-conditioned (rcond {rcond:.3e}, minimum {min:.3e})")]
    IllConditioned { rcond: f64, min: f64 },

    #[error("linear solve hit a singular system")]
    SingularSystem,

    #[error("point lies outside the polyhedron (norm {norm})")]
    OutsidePolyhedron { norm: f64 },

    #[error("resolvent is singular at this point")]
    SingularResolvent,

    #[error("witness lies in the algebra (distance {distance:.3e}); nothing separates it")]
    NotSeparable { distance: f64 },

    #[error("separation certificate failed verification: {0}")]
    CertificateInconsistent(String),

    #[error("scaling search exhausted the ratio cap {cap:.3e}")]
    ScalingSearchFailed { cap: f64 },

    #[error("data violates the model Gram identity (mismatch {mismatch:.3e})")]
    GramMismatch { mismatch: f64 },

    #[error("no isometric extension exists at any model dimension up to {max_m}")]
    PaddingOverflow { max_m: usize },

    #[error("sampler produced no valid point after {attempts} attempts")]
    SamplerExhausted { attempts: usize },

    #[error("no polynomial of degree <= {degree_bound} fits (residual {residual:.3e}, algebra saturated: {saturated})")]
    FitInfeasible {
        degree_bound: usize,
        residual: f64,
        saturated: bool,
    },

    #[error("block matrix is not an isometry (residual {residual:.3e})")]
    NotIsometric { residual: f64 },

    #[error("synthesized function missed a node (residual {residual:.3e})")]
    AgreementFailed { residual: f64 },
}

impl Error {
    /// Process exit code for the CLI: 2 malformed input, 3 domain violation,
    /// 4 mathematical infeasibility or failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimsMismatch { .. }
            | Error::Shape(_)
            | Error::Invalid(_)
            | Error::NonFinite => 2,
            Error::OutsidePolyhedron { .. } | Error::IllConditioned { .. } => 3,
            Error::SingularSystem
            | Error::SingularResolvent
            | Error::NotSeparable { .. }
            | Error::CertificateInconsistent(_)
            | Error::ScalingSearchFailed { .. }
            | Error::GramMismatch { .. }
            | Error::PaddingOverflow { .. }
            | Error::SamplerExhausted { .. }
            | Error::FitInfeasible { .. }
            | Error::NotIsometric { .. }
            | Error::AgreementFailed { .. } => 4,
        }
    }
}
