use std::fmt;
use std::path::PathBuf;

use ldes_milp::{SolveError, Status};

/// One broken invariant found by [`crate::validate_system`].
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub entity: String,
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(entity: impl Into<String>, field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { entity: entity.into(), field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}: {}", self.entity, self.field, self.rule)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid system ({} violations): {}", .0.len(), join(.0))]
    Validation(Vec<Violation>),
    #[error("hour range {0}")]
    Range(String),
    #[error("cannot build model: {0}")]
    Build(String),
    #[error("cannot extract schedule: {0}")]
    Extract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("storage {0} has no usable energy range")]
    DegenerateCapacity(String),
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("runs were produced on different systems ({0} vs {1})")]
    FingerprintMismatch(String, String),
    #[error("window {window} (start hour {start_hour}) ended with status {status}")]
    Solve { window: usize, start_hour: usize, status: Status },
    #[error(transparent)]
    Solver(#[from] SolveError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
