//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors surfaced by ordering, weight, operator and certificate operations.
///
/// `HorizonExceeded` is the honest answer whenever a query depends on data
/// (a future `b`, a not-yet-committed stage) that the model does not hold.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("horizon exceeded: {0}")]
    HorizonExceeded(String),
    #[error("rank {0} is outside the alpha domain")]
    RankOutsideAlphaDomain(String),
    #[error("polynomial has a constant term")]
    ConstantTermPresent,
    #[error("weight evaluation budget exceeded: j = {j}, cap = {cap}")]
    WeightBudgetExceeded { j: String, cap: u64 },
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("search budget exhausted while choosing {what}: {detail}")]
    SearchBudgetExhausted { what: String, detail: String },
    #[error("vector has support outside the head H_{0}")]
    NotInHead(u32),
    #[error("vector has support outside the tail space T_{0}")]
    NotInTail(u32),
    #[error("vector does not qualify for K_{0} at any integer scale")]
    NotQualifying(u32),
    #[error("zero vector")]
    ZeroVector,
    #[error("unresolved within the constructed horizon: {0}")]
    Unresolved(String),
    #[error("residual {value} exceeds the bound {bound}")]
    ResidualTooLarge { value: String, bound: String },
    #[error("sample failure during D estimation: {0}")]
    SampleFailure(String),
    #[error("certificate bound violated: {0}")]
    BoundViolated(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
