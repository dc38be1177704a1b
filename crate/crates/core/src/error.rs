use num_complex::Complex64;
use thiserror::Error;

/// Every failure the pipeline can report. Variant names double as the
/// machine-readable error kinds emitted by the command-line front end.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("polynomial has degree {degree}, need at least {required}")]
    DegreeTooLow { degree: usize, required: usize },
    #[error("leading coefficient is zero")]
    ZeroLeadingCoefficient,
    #[error("critical point {point} is degenerate: |F''| = {hessian_norm:e}")]
    NonMorse { point: Complex64, hessian_norm: f64 },
    #[error("critical values {i} and {j} coincide within {distance:e}")]
    DegenerateValues { i: usize, j: usize, distance: f64 },
    #[error("root finding failed: {0}")]
    RootFindingFailed(String),
    #[error("critical value {index} lies on the ray at angle {alpha}")]
    ValueOnRay { index: usize, alpha: f64 },
    #[error("critical value {index} is zero; translate F so that 0 is a regular value")]
    ValueAtOrigin { index: usize },
    #[error("critical values {i} and {j} have the same clockwise angle")]
    AmbiguousOrder { i: usize, j: usize },
    #[error("Poisson bracket {value:e} is not positive at {point}")]
    NonPositiveBracket { point: Complex64, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("conserved quantity drifted by {drift:e} (tolerance {tolerance:e})")]
    DriftExceeded { drift: f64, tolerance: f64 },
    #[error("integrator step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("critical value {index} lies on the open segment between {source_index} and {target}")]
    InteriorCriticalValue {
        source_index: usize,
        target: usize,
        index: usize,
    },
    #[error("separatrix fate is ambiguous: {0}")]
    Inconclusive(String),
    #[error("flowline invariant violated: {0}")]
    FlowlineRejected(String),
    #[error("transport matrix condition number {condition:e} exceeds {bound:e}")]
    IllConditioned { condition: f64, bound: f64 },
    #[error("transported lines differ by {angle:e} rad: neither equal nor transverse")]
    AngularResolutionExceeded { angle: f64 },
    #[error("Lagrangian pair is tangent at an endpoint")]
    EndpointTangency,
    #[error("field shape {got:?} does not match grid {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("Gauss-Newton did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("field left the ball of radius {r_max}")]
    DivergedField { r_max: f64 },
    #[error("nonzero morphism supplied from {from} to {to} against the order")]
    DirectednessViolation { from: usize, to: usize },
    #[error("A-infinity relation fails: {witness}")]
    RelationFailure { witness: crate::category::Witness },
    #[error("{count} crossings detected along the family")]
    MultipleCrossings { count: usize },
    #[error("connection count undefined at t = {t}: {reason}")]
    CountUndefined { t: f64, reason: String },
}

impl Error {
    /// Stable identifier of the variant, used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegreeTooLow { .. } => "DegreeTooLow",
            Error::ZeroLeadingCoefficient => "ZeroLeadingCoefficient",
            Error::NonMorse { .. } => "NonMorse",
            Error::DegenerateValues { .. } => "DegenerateValues",
            Error::RootFindingFailed(_) => "RootFindingFailed",
            Error::ValueOnRay { .. } => "ValueOnRay",
            Error::ValueAtOrigin { .. } => "ValueAtOrigin",
            Error::AmbiguousOrder { .. } => "AmbiguousOrder",
            Error::NonPositiveBracket { .. } => "NonPositiveBracket",
            Error::Precondition(_) => "Precondition",
            Error::DriftExceeded { .. } => "DriftExceeded",
            Error::StepFailure { .. } => "StepFailure",
            Error::InteriorCriticalValue { .. } => "InteriorCriticalValue",
            Error::Inconclusive(_) => "Inconclusive",
            Error::FlowlineRejected(_) => "FlowlineRejected",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::AngularResolutionExceeded { .. } => "AngularResolutionExceeded",
            Error::EndpointTangency => "EndpointTangency",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DivergedField { .. } => "DivergedField",
            Error::DirectednessViolation { .. } => "DirectednessViolation",
            Error::RelationFailure { .. } => "RelationFailure",
            Error::MultipleCrossings { .. } => "MultipleCrossings",
            Error::CountUndefined { .. } => "CountUndefined",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
