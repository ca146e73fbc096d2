use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible target: enrollment {rho} is never reached with capacity {capacity}")]
    InfeasibleTarget { rho: f64, capacity: u32 },

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("tied priorities at school {school}")]
    Tie { school: usize },

    #[error("infeasible assignment: {0}")]
    InfeasibleAssignment(String),

    #[error("instance too large to enumerate: {students} students, {schools} schools")]
    TooLarge { students: usize, schools: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("no root bracketed: {0}")]
    NoRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
