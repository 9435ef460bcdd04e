use thiserror::Error;

/// Everything that can go wrong while building or solving a model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: pivot {pivot:e} in column {column} is below {threshold:e}")]
    SingularMatrix {
        pivot: f64,
        column: usize,
        threshold: f64,
    },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("generator is not irreducible: {0}")]
    NotIrreducible(String),

    #[error("invalid MAP: {0}")]
    Map(#[from] MapError),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model is not positive recurrent ({0})")]
    NotStable(String),

    #[error("did not converge: {0}")]
    NonConvergent(String),

    #[error("no level in the schedule met the stop condition (last K = {last_level}, tail masses {tail_masses:?})")]
    ScheduleExhausted {
        last_level: usize,
        tail_masses: Vec<f64>,
    },
}

impl Error {
    /// Errors caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::NonFinite(_)
                | Error::NonConvergent(_)
                | Error::ScheduleExhausted { .. }
        )
    }
}

/// Reasons a `(C, D)` pair is rejected as a Markovian arrival process.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("C and D must be square and of the same order ({0})")]
    Shape(String),

    #[error("row {row} of C+D sums to {sum:e}, not 0")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("negative entry {value} at {matrix}[{row}][{col}]")]
    NegativeEntry {
        matrix: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("diagonal entry C[{row}][{row}] = {value} is not strictly negative")]
    NonNegativeDiagonal { row: usize, value: f64 },

    #[error("C+D is reducible")]
    Reducible,

    #[error("arrival matrix D is identically zero")]
    ZeroArrivalMatrix,

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
