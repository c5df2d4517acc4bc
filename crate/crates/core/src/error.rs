use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("electrical length {theta} rad is within {tol:e} of a cot/csc pole")]
    Pole { theta: f64, tol: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("no root bracketed for {relation}")]
    NoRoot { relation: String },
    #[error("expected exactly two dressed roots, found {found}; sweep minima at {minima:?} Hz")]
    RootCount { found: usize, minima: Vec<f64> },
    #[error("inconsistent result: {0}")]
    Inconsistent(String),
    #[error("phase undersampled between points {index} and {next} (step {step:.3} rad)", next = .index + 1)]
    Sampling { index: usize, step: f64 },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config { .. } | Error::Parse { .. } => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}
