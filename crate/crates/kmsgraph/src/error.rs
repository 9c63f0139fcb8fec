use thiserror::Error;

use crate::enclosure::Enc;

#[derive(Error, Debug)]
pub enum Error {
    #[error("unknown vertex id {0}")]
    UnknownVertex(u32),
    #[error("vertex set {0:?} is not hereditary: edge leaves the set")]
    NotHereditary(Vec<u32>),
    #[error("series touches an infinite family without a usable tail bound")]
    UncertifiedFamily,
    #[error("series budget exhausted; partial enclosure [{}, {}]", .0.lo, .0.hi)]
    BudgetExhausted(Enc),
    #[error("certificate failed: {0}")]
    CertificateFailed(String),
    #[error("input vector is not super-harmonic at vertex {0}")]
    NotSuperHarmonic(u32),
    #[error("input vector is not harmonic: {0}")]
    NotHarmonic(String),
    #[error("vector not materialized on required support (vertex {0})")]
    InsufficientSupport(u32),
    #[error("interval is empty")]
    EmptyInterval,
    #[error("slack exhausted: sum(a_n D^n) cannot be certified < 1 - D")]
    SlackExhausted,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid recipe: {0}")]
    RecipeInvalid(String),
    #[error("truncation requires multiplicities beyond u64 range")]
    TruncationTooDeep,
    #[error("exit data incomplete for enumeration on an infinite transient graph")]
    IncompleteExitData,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
