//! Crate-wide error type. Variant names follow the failure vocabulary used
//! throughout the operation contracts.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("group order {order} exceeds cap {cap}")]
    OrderCapExceeded { order: u64, cap: u64 },

    #[error("malformed Cayley table: {0}")]
    CayleyFileMalformed(String),

    #[error("malformed subset source: {0}")]
    SubsetMalformed(String),

    #[error("subset is empty where a nonempty one is required")]
    EmptySubset,

    #[error("operands belong to different groups: {0}")]
    GroupMismatch(String),

    #[error("character table does not match the group: {0}")]
    TableMismatch(String),

    #[error("operation needs {needed} more ops ({used} used, cap {cap})")]
    BudgetExceeded { needed: u64, used: u64, cap: u64 },

    #[error("eigenvalue splitting failed after {attempts} attempts: {detail}")]
    EigenSplitFailure { attempts: u32, detail: String },

    #[error("tolerance violation in {context}: residual {residual:.3e} exceeds {tolerance:.3e}")]
    ToleranceViolation { context: String, residual: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("imaginary residue {residual:.3e} on a quantity that must be real ({context})")]
    ImaginaryResidue { context: String, residual: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("triangular solve failed at entry ({row},{col}): {detail}")]
    SolveFailed { row: usize, col: usize, detail: String },

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("unsupported field size {0}")]
    UnsupportedField(u32),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("witness verification failed: {0}")]
    VerifyFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
