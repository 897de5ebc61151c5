use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("window covers [{have_lo}, {have_hi}] but [{need_lo}, {need_hi}] is required")]
    WindowUnderflow {
        need_lo: i64,
        need_hi: i64,
        have_lo: i64,
        have_hi: i64,
    },
    #[error("operation requires {expected} flavor")]
    WrongFlavor { expected: &'static str },
    #[error("spectral parameter is too close to an eigenvalue (condition estimate {condition:.3e})")]
    NearEigenvalue { condition: f64 },
    #[error("solution magnitude exceeded 1e300")]
    ScaleOverflow,
    #[error("tolerance {tol:e} is below the attainable accuracy {floor:e}")]
    ToleranceUnreachable { tol: f64, floor: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),
    #[error("support has a single point")]
    TrivialSupport,
    #[error("eigenbasis has {found} vectors, expected {expected}")]
    IncompleteBasis { found: usize, expected: usize },
    #[error("Verblunsky coefficient {0} lies outside the open unit disk")]
    InvalidCoefficient(String),
    #[error("found {found} roots on the circle, expected {expected}")]
    RootCountMismatch { found: usize, expected: usize },
}

impl Error {
    /// Short machine-readable kind, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::WindowUnderflow { .. } => "WindowUnderflow",
            Error::WrongFlavor { .. } => "WrongFlavor",
            Error::NearEigenvalue { .. } => "NearEigenvalue",
            Error::ScaleOverflow => "ScaleOverflow",
            Error::ToleranceUnreachable { .. } => "ToleranceUnreachable",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::InsufficientSignal(_) => "InsufficientSignal",
            Error::TrivialSupport => "TrivialSupport",
            Error::IncompleteBasis { .. } => "IncompleteBasis",
            Error::InvalidCoefficient(_) => "InvalidCoefficient",
            Error::RootCountMismatch { .. } => "RootCountMismatch",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
