use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("level {level} out of range for depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("level-0 coefficient must be {expected}, found {found}")]
    LevelZero { expected: f64, found: f64 },
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("word of combined length {len} exceeds depth {depth}")]
    WordTooLong { len: usize, depth: usize },
    #[error("letter {letter} outside 1..={dim}")]
    BadLetter { letter: usize, dim: usize },
    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("consecutive segments {index} and {next} are not orthogonal", next = .index + 1)]
    NotOrthogonal { index: usize },
    #[error("truncation {depth} exceeds the feasible coefficient budget for dimension {dim}")]
    DepthTooLarge { dim: usize, depth: usize },
    #[error("integrator did not converge: {0}")]
    NonConvergence(String),
    #[error("empty dataset")]
    EmptyDataset,
}
