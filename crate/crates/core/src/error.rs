use thiserror::Error;

use crate::flow::ExitRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate metric at {at:?}: {reason}")]
    DegenerateMetric { at: Vec<f64>, reason: String },

    #[error("domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("possible trapping: no exit before t_max = {t_max}")]
    Trapping { t_max: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("geodesic leaves the domain at t = {}", .0.t_exit)]
    OutOfDomain(Box<ExitRecord>),

    #[error("usage: {0}")]
    Usage(String),

    #[error("corrupt data: {0}")]
    CorruptData(String),

    #[error("insufficient data: {reason} (achieved {achieved})")]
    InsufficientData { reason: String, achieved: f64 },

    #[error("unknown source id `{0}`")]
    IdNotFound(String),

    #[error("ambiguous localization between {0:?}")]
    Ambiguous(Vec<String>),

    #[error("incompatible boundaries: lengths {0} vs {1}")]
    IncompatibleBoundary(f64, f64),

    #[error("chart failure: {0}")]
    ChartFailure(String),

    #[error("exponential map is not injective near {0:?}")]
    NotInjective(Vec<f64>),

    #[error("singular chart: {0}")]
    SingularChart(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("unsupported dimension {0}: only n = 2 is implemented for boundary-parametrized operations")]
    UnsupportedDimension(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used as the prefix of CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateMetric { .. } => "E_DEGENERATE_METRIC",
            Error::Domain(_) => "E_DOMAIN",
            Error::Precondition(_) => "E_PRECONDITION",
            Error::Trapping { .. } => "E_TRAPPING",
            Error::Stiffness { .. } => "E_STIFFNESS",
            Error::OutOfDomain(_) => "E_OUT_OF_DOMAIN",
            Error::Usage(_) => "E_USAGE",
            Error::CorruptData(_) => "E_CORRUPT_DATA",
            Error::InsufficientData { .. } => "E_INSUFFICIENT_DATA",
            Error::IdNotFound(_) => "E_ID_NOT_FOUND",
            Error::Ambiguous(_) => "E_AMBIGUOUS",
            Error::IncompatibleBoundary(..) => "E_INCOMPATIBLE_BOUNDARY",
            Error::ChartFailure(_) => "E_CHART_FAILURE",
            Error::NotInjective(_) => "E_NOT_INJECTIVE",
            Error::SingularChart(_) => "E_SINGULAR_CHART",
            Error::Inconclusive(_) => "E_INCONCLUSIVE",
            Error::UnsupportedDimension(_) => "E_UNSUPPORTED_DIM",
            Error::Parse { .. } => "E_PARSE",
            Error::Io(_) => "E_IO",
        }
    }
}
