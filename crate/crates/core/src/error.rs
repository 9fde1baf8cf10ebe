use thiserror::Error;

/// Errors produced by the library. The CLI maps each variant onto an exit code
/// through [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("element index {index} out of range for a group of order {order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("element {element} does not belong to the group {group}")]
    ElementMismatch { element: String, group: String },

    #[error("laws live on different groups")]
    GroupMismatch,

    #[error("invalid group: {0}")]
    InvalidGroup(String),

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("evaluation point {point} escapes the window {window}")]
    WindowExceeded { point: String, window: String },

    #[error("exponent {exponent:.3} exceeds the overflow guard of 700")]
    Overflow { exponent: f64 },

    #[error("degenerate support: {witness}")]
    DegenerateSupport { witness: String },

    #[error("walk is not irreducible: {witness}")]
    NotIrreducible { witness: String },

    #[error("exponential and R do not normalize the law: R * sum(phi v) = {total}")]
    NotNormalized { total: f64 },

    #[error("horizon {horizon} exceeds the limit {limit} for this group")]
    HorizonTooLarge { horizon: usize, limit: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("R = {r} exceeds 1/rho_hat = {inverse_rho_hat} (series diverges geometrically)")]
    RMismatch { r: f64, inverse_rho_hat: f64 },

    #[error("{0}")]
    Parse(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// 1 for parse/usage problems, 2 for mathematical precondition failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Usage(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
