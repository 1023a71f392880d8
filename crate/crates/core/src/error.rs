use thiserror::Error;

pub type Result<T, E = SscError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SscError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("step of {dt} from t = {t} would overshoot below zero")]
    Overshoot { t: f64, dt: f64 },
    #[error("direction {0:?} has a zero aggregate and cannot be normalized")]
    DegenerateDirection(String),
    #[error("direction {label:?} is not unit norm (norm = {norm})")]
    NonUnit { label: String, norm: f64 },
    #[error("style {label:?} not found; available: {}", available.join(", "))]
    NotFound {
        label: String,
        available: Vec<String>,
    },
    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("coverage undefined: page has no measurable text boxes")]
    UndefinedCoverage,
    #[error("cosine undefined: {0}")]
    UndefinedCosine(String),
    #[error("empty trajectory record")]
    EmptyRecord,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SscError {
    pub(crate) fn parse(err: serde_json::Error) -> Self {
        SscError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(SscError::DimMismatch {
            what,
            expected,
            found,
        })
    }
}
