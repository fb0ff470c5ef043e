use std::fmt;

use crate::assignment::AssignmentSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("frame sequencing error: {0}")]
    Sequencing(String),

    #[error("invalid detection pair: {0}")]
    InvalidPair(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("problem too large for exhaustive search: {0} columns (limit {1})")]
    SizeGuard(usize, usize),

    /// The solver ran out of its node budget; the best feasible selection
    /// found so far is attached.
    #[error("solver budget exhausted after {nodes} branch-and-bound nodes")]
    Resource {
        nodes: usize,
        incumbent: Box<AssignmentSolution>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
