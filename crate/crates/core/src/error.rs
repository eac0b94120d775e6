use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter {name} = {value} out of range (expected {expected})")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("argument {0} outside the unit interval")]
    DomainError(f64),
    #[error("distortion is not concave: {0}")]
    NotConcave(String),
    #[error("distortion must vanish at 1, found h(1) = {0}")]
    NotLocationInvariant(f64),
    #[error("quantile representation does not apply: {0}")]
    HypothesisUnmet(String),
    #[error("grids of size {left} and {right} cannot be compared")]
    IncompatibleGrids { left: usize, right: usize },
    #[error(
        "weighted values at 1 differ ({values:?}); the comonotonic inf-convolution is -infinity"
    )]
    UnboundedProblem { values: Vec<f64> },
    #[error("grid of {n} states cannot realise {detail}{}", suggestion(.suggested))]
    GridIncompatible {
        n: usize,
        suggested: Option<usize>,
        detail: String,
    },
    #[error("c = {c} lies outside the median interval [{lo}, {hi}]")]
    MedianOutOfRange { c: f64, lo: f64, hi: f64 },
    #[error("random variable has tied values on charged states")]
    DensityViolated,
    #[error("belief charges state {0}, which the reference measure does not")]
    AbsContViolated(usize),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn suggestion(s: &Option<usize>) -> String {
    match s {
        Some(n) => format!("; refine to N = {n}"),
        None => String::new(),
    }
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ParamOutOfRange { .. } => "ParamOutOfRange",
            Error::DomainError(_) => "DomainError",
            Error::NotConcave(_) => "NotConcave",
            Error::NotLocationInvariant(_) => "NotLocationInvariant",
            Error::HypothesisUnmet(_) => "HypothesisUnmet",
            Error::IncompatibleGrids { .. } => "IncompatibleGrids",
            Error::UnboundedProblem { .. } => "UnboundedProblem",
            Error::GridIncompatible { .. } => "GridIncompatible",
            Error::MedianOutOfRange { .. } => "MedianOutOfRange",
            Error::DensityViolated => "DensityViolated",
            Error::AbsContViolated(_) => "AbsContViolated",
            Error::TooLarge(_) => "TooLarge",
            Error::UnsupportedRegime(_) => "UnsupportedRegime",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
