use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector is not unit-norm (norm = {norm})")]
    NotUnit { norm: f64 },

    #[error("vector is not tangent to its base point (|v.mu| = {residual:e})")]
    NotTangent { residual: f64 },

    /// The antipode of the base point was hit, or a tangent vector reached
    /// the injectivity radius.
    #[error("cut locus: {0}")]
    CutLocus(String),

    #[error("eigenvalue iteration did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("rank deficient: tangent eigenvalue {eigenvalue:e} <= tolerance {tolerance:e}")]
    RankDeficient { eigenvalue: f64, tolerance: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("normalising constant could not be computed: {0}")]
    NormalizationFailure(String),

    #[error("rejection sampler stalled after {0} consecutive rejections")]
    SamplerStall(usize),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("too few points: need at least {needed}, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("longitude undefined for a point at the pole")]
    PoleDegenerate,

    #[error("quartile covariance is singular: {0}")]
    SingularCovariance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported dimension {found}: {what} requires d = {required}")]
    UnsupportedDimension {
        what: &'static str,
        required: usize,
        found: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("point {index}: {source}")]
    AtIndex { index: usize, source: Box<Error> },

    #[error("replication {replication}: {source}")]
    InReplication {
        replication: usize,
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub fn at(self, index: usize) -> Self {
        Error::AtIndex {
            index,
            source: Box::new(self),
        }
    }

    pub fn in_replication(self, replication: usize) -> Self {
        Error::InReplication {
            replication,
            source: Box::new(self),
        }
    }

    /// Innermost error, with index wrappers peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIndex { source, .. } | Error::InReplication { source, .. } => source.root(),
            other => other,
        }
    }
}
