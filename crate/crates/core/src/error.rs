use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("words over different generator sets (rank {left} vs rank {right})")]
    GeneratorMismatch { left: usize, right: usize },

    #[error("invalid word {word:?}: {reason}")]
    InvalidWord { word: String, reason: String },

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("signature mismatch: {left:?} vs {right:?}")]
    SignatureMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is {rows}x{cols}, expected {expected}x{expected}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("determinant {det} is not positive")]
    NonPositiveDeterminant { det: f64 },

    #[error("relative gap {gap:.3e} at index {index} is below tolerance {tol:.1e}")]
    GapTooSmall { index: usize, gap: f64, tol: f64 },

    #[error("numerically singular: {0}")]
    Singular(String),

    #[error("flag is not transverse to the base flag (smallest angle {angle:.3e} rad)")]
    NotTransverse { angle: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("support cap of {cap} atoms exceeded")]
    SupportCap { cap: usize },

    #[error("exhaustive oracle limited to d <= {max}, got d = {d}")]
    OracleTooLarge { d: usize, max: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("insufficient scale range: {0}")]
    InsufficientScales(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("representation is not observably Anosov at p = {p}: fitted slope {slope:.4}")]
    NotAnosov { p: usize, slope: f64 },

    #[error("ray of length {len} too short to reach the stopping index")]
    RayTooShort { len: usize },

    #[error("numerical overflow: {0}")]
    Overflow(String),
}
