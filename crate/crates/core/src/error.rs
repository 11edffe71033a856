use thiserror::Error;

#[derive(Debug, Error)]
pub enum QrbmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("line {line}: {msg}")]
    FileFormat { line: usize, msg: String },

    #[error("{what} exceeds capacity ({got} > {limit})")]
    Capacity {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("post-selection impossible: success probability {0:e}")]
    PostselectImpossible(f64),

    #[error("singular evaluation point: {0}")]
    Singular(String),

    #[error("spectral partition: {0}")]
    Partition(String),

    #[error("term {term} acts on {locality} qubits, cap is {cap}")]
    UnsupportedLocality {
        term: String,
        locality: usize,
        cap: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QrbmError {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            QrbmError::Config(_)
            | QrbmError::Parse { .. }
            | QrbmError::FileFormat { .. }
            | QrbmError::Input(_)
            | QrbmError::Io(_) => 2,
            QrbmError::Capacity { .. } | QrbmError::UnsupportedLocality { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, QrbmError>;
