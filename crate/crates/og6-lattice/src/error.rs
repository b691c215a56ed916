use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("gram matrix is not square")]
    NotSquare,
    #[error("gram matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("gram matrix is degenerate")]
    Degenerate,
    #[error("odd diagonal entry {value} at index {index}; only even lattices are supported")]
    OddDiagonal { index: usize, value: i64 },
    #[error("empty lattice")]
    Empty,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("vector length {got} does not match rank {rank}")]
    WrongLength { got: usize, rank: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("lattice is not negative definite")]
    NotNegativeDefinite,
    #[error("lattice is not definite")]
    NotDefinite,
    #[error("sublattice generators are linearly dependent")]
    Dependent,
    #[error("sublattice is not primitive")]
    NotPrimitive,
    #[error("restricted form is degenerate (isotropic sublattice)")]
    DegenerateSublattice,
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("invalid gluing data: {0}")]
    Gluing(String),
    #[error("invalid map of finite quadratic forms: {0}")]
    BadMap(String),
    #[error("order exceeds cap {0}")]
    OrderCap(u64),
    #[error("not an isometry")]
    NotIsometry,
    #[error("inconsistent classification: {0}")]
    Inconsistent(String),
}

impl LatticeError {
    pub fn is_budget(&self) -> bool {
        matches!(self, LatticeError::Budget(_) | LatticeError::OrderCap(_))
    }
}

pub type Result<T> = std::result::Result<T, LatticeError>;
