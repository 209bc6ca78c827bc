use thiserror::Error;

/// Errors shared across the engine.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("scalar does not lie in the declared coefficient ring: {0}")]
    NotInRing(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("linear system has no solution (rank {rank}, inconsistent row {witness})")]
    NoSolution { rank: usize, witness: usize },
    #[error("u-exponent {exp} fell below the Laurent floor {floor}")]
    ULaurentUnderflow { exp: i32, floor: i32 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("scalar is not an element of R (polynomial in the equivariant parameters): {0}")]
    ScalarNotInR(String),
    #[error("fiber basis is singular")]
    SingularFiberBasis,
    #[error("structure is not framed: matrix in direction `{0}` depends on u")]
    NotFramed(String),
    #[error("generation condition failed while solving for the deformation matrix: {0}")]
    GCFailed(String),
    #[error("unfolding preconditions not met: {0}")]
    ConditionsNotMet(String),
    #[error("no complement with unit determinant; best determinant {best}")]
    NoUnitComplement { best: String },
    #[error("unfoldings are not comparable: {0}")]
    NotComparable(String),
    #[error("equivariant pair mismatch: {0}")]
    LiftMismatch(String),
    #[error("reduction needs z-exponent {needed} outside the window [{lo}, {hi}]")]
    ReductionWindowExceeded { needed: i64, lo: i64, hi: i64 },
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("u-direction with the equivariant Euler term is not supported here: {0}")]
    LambdaEulerUnsupported(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
