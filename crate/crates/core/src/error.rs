use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at trait {row}, index {col}")]
    NonFinite { row: usize, col: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("direction set is not row-normalized")]
    NotNormalized,

    #[error("at least two traits are required, got {0}")]
    TooFewTraits(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("missing contrast cell: {0}")]
    MissingCell(String),

    #[error("judge score {0} outside the 1-5 scale")]
    ScaleViolation(f64),

    #[error("no fluency data in the supplied records")]
    NoFluencyData,

    #[error("bad trait correlation matrix: {0}")]
    BadCorrelation(String),

    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),

    #[error("unparseable verdict: {0:?}")]
    UnparseableVerdict(String),
}

impl Error {
    /// Stable short name of the error kind, used on diagnostic output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::Io { .. } => "IoError",
            Error::ZeroVector(_) => "ZeroVector",
            Error::RankDeficient(_) => "RankDeficient",
            Error::NotSymmetric(_) => "NotSymmetric",
            Error::MissingParameter(_) => "MissingParameter",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NotNormalized => "NotNormalized",
            Error::TooFewTraits(_) => "TooFewTraits",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::MissingCell(_) => "MissingCell",
            Error::ScaleViolation(_) => "ScaleViolation",
            Error::NoFluencyData => "NoFluencyData",
            Error::BadCorrelation(_) => "BadCorrelation",
            Error::JudgeUnavailable(_) => "JudgeUnavailable",
            Error::UnparseableVerdict(_) => "UnparseableVerdict",
        }
    }

    /// True for failures of the numerics rather than of the inputs' format.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_) | Error::NotSymmetric(_) | Error::ZeroVector(_)
        )
    }

    pub fn is_external(&self) -> bool {
        matches!(self, Error::JudgeUnavailable(_) | Error::UnparseableVerdict(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
