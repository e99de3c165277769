use thiserror::Error;

pub type Result<T> = std::result::Result<T, GeomError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("syntax error at offset {offset}: expected one of {expected:?}")]
    Syntax { offset: usize, expected: Vec<String> },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("coordinate names must be distinct identifiers, got `{0}` twice")]
    DuplicateCoordinate(String),

    #[error("domain error: {what} at point {point:?}")]
    Domain { what: String, point: Vec<f64> },

    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    SingularMetric { point: Vec<f64>, min_eigenvalue: f64 },

    #[error("chart mismatch: expected dimension {expected}, got {found}")]
    ChartMismatch { expected: usize, found: usize },

    #[error("degree overflow: degree {degree} on a chart of dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },

    #[error("preferred frame vectors are linearly dependent")]
    DependentPreferredVectors,

    #[error("could not complete an orthonormal frame ({found} of {dim} vectors)")]
    IncompleteFrame { found: usize, dim: usize },

    #[error("ill-conditioned least-squares fit (singular value ratio {ratio:e})")]
    IllConditionedFit { ratio: f64 },

    #[error("vector field is not a section of the contact distribution (|eta(U)| = {residual:e})")]
    NotASectionOfD { residual: f64 },

    #[error("unknown built-in model `{0}`")]
    UnknownModel(String),

    #[error("b must be non-zero")]
    ZeroB,

    #[error("factor `{name}` failed validation: {reason}")]
    UnvalidatedFactor { name: String, reason: String },

    #[error("almost complex structure is not integrable (Nijenhuis residual {residual:e})")]
    NotIntegrable { residual: f64 },

    #[error("invalid chart: {0}")]
    InvalidChart(String),
}
