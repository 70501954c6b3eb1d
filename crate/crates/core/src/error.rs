use thiserror::Error;

/// Errors raised across the library.
///
/// The variants are grouped so a front end can map them onto exit codes:
/// configuration problems, numerical failures and I/O.
#[derive(Debug, Error)]
pub enum FlagError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("map {map} is not nice: {condition} (margin {margin:.3e})")]
    NotNice {
        map: String,
        condition: String,
        margin: f64,
    },

    #[error("degenerate subproblem: smallest eigenvalue {min_eig:.3e} of the effective Hessian")]
    DegenerateSubproblem { min_eig: f64 },

    #[error("unsupported subproblem structure: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unreliable reference solution: {0}")]
    UnreliableReference(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl FlagError {
    pub fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        FlagError::Dimension {
            what: what.into(),
            expected,
            found,
        }
    }

    /// Process exit code for the command-line front end: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            FlagError::Dimension { .. }
            | FlagError::InvalidData(_)
            | FlagError::Config(_)
            | FlagError::NotNice { .. }
            | FlagError::Unsupported(_)
            | FlagError::Precondition(_) => 2,
            FlagError::DegenerateSubproblem { .. }
            | FlagError::UnreliableReference(_)
            | FlagError::Numerical(_) => 3,
            FlagError::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for FlagError {
    fn from(e: std::io::Error) -> Self {
        FlagError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for FlagError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            FlagError::Io(e.to_string())
        } else {
            FlagError::InvalidData(format!("json: {e}"))
        }
    }
}

impl From<csv::Error> for FlagError {
    fn from(e: csv::Error) -> Self {
        FlagError::Io(format!("csv: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, FlagError>;
