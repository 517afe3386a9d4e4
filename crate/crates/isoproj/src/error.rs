use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV row at line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("predictor out of [0,1] at line {line}: x = {value}")]
    PredictorOutOfRange { line: usize, value: f64 },
    #[error("bin count J must be at least 1")]
    ZeroBins,
    #[error("need at least {needed} distinct interior design values, found {found}")]
    TooFewKnotCandidates { needed: usize, found: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("all marginal weights over J underflowed; check J_max and sigma")]
    JPosteriorUnderflow,
    #[error("operation requires sigma mode {expected}, prior has {got}")]
    WrongSigmaMode {
        expected: &'static str,
        got: &'static str,
    },
    #[error("operation requires a {expected} prior")]
    WrongPriorType { expected: &'static str },
    #[error("reference function must be monotone nondecreasing")]
    NonMonotoneReference,
    #[error("Hellinger distance is undefined under an empirical-weights measure")]
    HellingerEmpiricalMeasure,
}

pub type Result<T> = std::result::Result<T, Error>;
