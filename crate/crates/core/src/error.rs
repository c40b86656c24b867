use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("system is not stable: max Re(eig) = {abscissa:e}, required < -{margin:e}")]
    UnstableSystem { abscissa: f64, margin: f64 },

    #[error("Lyapunov solve failed: residual {residual:e} exceeds bound {bound:e}")]
    SolveFailure { residual: f64, bound: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("Gramian is numerically singular")]
    SingularGramian,

    #[error("weight matrix must have full row rank (rank {rank}, rows {rows})")]
    RankDeficientWeight { rank: usize, rows: usize },

    #[error("candidate index {index} out of range ({len} candidates)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{count} subsets exceed the exhaustive search cap of {cap}")]
    CombinationCapExceeded { count: u128, cap: u128 },

    #[error("{algorithm} does not support metric {metric}")]
    UnsupportedMetric {
        metric: String,
        algorithm: &'static str,
    },

    #[error("candidate {index}: {source}")]
    Candidate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::UnstableSystem { .. }
            | Error::SolveFailure { .. }
            | Error::NoConvergence
            | Error::SingularGramian => true,
            Error::Candidate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
