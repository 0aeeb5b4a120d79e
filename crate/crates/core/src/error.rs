use thiserror::Error;

/// Errors raised by parameter validation, the solvers and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("liquidation impossible: market volume is zero on the post-maturity window and q = {q}")]
    LiquidationImpossible { q: f64 },

    #[error("non-finite value at t = {t}, q = {q}, S = {s} ({stage})")]
    NonFinite {
        stage: &'static str,
        t: f64,
        q: f64,
        s: f64,
    },

    #[error("query (t = {t}, q = {q}, S = {s}) lies outside the solved grid")]
    OutOfHull { t: f64, q: f64, s: f64 },

    #[error("inventory {q} is not a node of the inventory grid")]
    OffGrid { q: f64 },

    #[error("no feasible control at t = {t}, q = {q}, S = {s}")]
    NoFeasibleControl { t: f64, q: f64, s: f64 },

    #[error("path error: {0}")]
    Path(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
