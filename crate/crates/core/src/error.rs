use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Input(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate bilinear form: {0}")]
    DegenerateForm(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("missing variable `{0}` in assignment")]
    MissingVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("unsupported operator order {order} (maximum is 2)")]
    UnsupportedOrder { order: usize },
    #[error("trajectory left the evaluation domain at t = {time}")]
    DomainExit { time: f64 },
    #[error("operator is not first order: {0}")]
    NotFirstOrder(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("singular measure: {0}")]
    SingularMeasure(String),
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
