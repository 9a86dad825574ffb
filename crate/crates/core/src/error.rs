//! Error type shared across the engine, with the CLI exit-code mapping.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A construction parameter is invalid; `field` names the offender.
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    /// A point lies outside the half-open domain box.
    #[error("point out of domain{}: ({x}, {y}, {t})", fmt_line(*.line))]
    OutOfDomain { x: f64, y: f64, t: f64, line: Option<usize> },

    /// Malformed input data (CSV field that does not parse, wrong arity, ...).
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// A volume file violates the STKDE1 container format.
    #[error("volume format error: {0}")]
    Format(String),

    /// An algorithm refused to run because its memory estimate exceeds the
    /// configured budget.
    #[error("memory budget exceeded: needs {required} bytes, budget is {budget} bytes")]
    MemoryBudget { required: u64, budget: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_line(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation { field, reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 1 I/O or malformed data, 2 validation
    /// (bad flags, unusable decomposition, out-of-domain under the fail
    /// policy), 3 memory-budget refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } | Error::Format(_) => 1,
            Error::Validation { .. } | Error::OutOfDomain { .. } => 2,
            Error::MemoryBudget { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
