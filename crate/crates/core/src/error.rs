use thiserror::Error;

use crate::graph::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid graph: {}", join_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("weight supplied for non-edge ({0}, {1})")]
    WeightOnNonEdge(usize, usize),

    #[error("missing weight for edge ({0}, {1})")]
    MissingWeight(usize, usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("left Perron vector not found: {0}")]
    PerronNotFound(String),

    #[error("eigen-solver failure: {0}")]
    Eigen(String),

    #[error("transverse space is empty (every cluster is a singleton)")]
    EmptyTransverseSpace,

    #[error("no cluster spans more than one connected component")]
    NoSpanningCluster,

    #[error(
        "not synchronizable by the restricted-definiteness condition: synchronizability {0} <= 0"
    )]
    NotSynchronizable(f64),

    #[error("decreasing condition unbounded in region: {0}")]
    DecreasingConditionUnbounded(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration produced a non-finite derivative at t = {0}")]
    NonFinite(f64),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
