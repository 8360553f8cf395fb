use std::fmt;

use crate::model::UseId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid label {0}: permitted labels are 0 (Cannot decide), 1, 2, 3, 4")]
    InvalidLabel(i64),
    #[error("label 0 (Cannot decide) has no relation interpretation")]
    NoRelation,
    #[error("invalid span: {0}")]
    InvalidSpan(String),
    #[error("invalid use: {0}")]
    InvalidUse(String),
    #[error("a use cannot be paired with itself: {0}")]
    SelfPair(UseId),
    #[error("unknown use identifier: {0}")]
    UnknownUse(UseId),
    #[error("uses belong to different lemmas: {0} and {1}")]
    MixedLemmas(String, String),
    #[error("{0}")]
    Validation(ValidationReport),
    #[error("an edge needs at least one judgment")]
    EmptyEdge,
    #[error("node {0} has no cluster assignment")]
    UnassignedNode(UseId),
    #[error("graph has {nodes} clusterable nodes, exhaustive search is limited to {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("statistic undefined: {0}")]
    Undefined(&'static str),
    #[error("annotators {0} and {1} share no judged pairs")]
    NoOverlap(String, String),
    #[error("element sets differ: {0}")]
    ElementMismatch(String),
    #[error("instance {0} is not the next instance in the sequence")]
    OutOfOrder(usize),
    #[error("annotator: {0}")]
    Annotator(#[from] crate::annotators::AnnotatorError),
    #[error("invalid graph document: {0}")]
    Document(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One problem found while validating an input file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RowError {
    /// 1-based line number of the record, header is line 1. Zero for file-level problems.
    pub line: u64,
    pub message: String,
}

/// Every problem found in a file, not just the first.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ValidationReport {
    pub file: String,
    pub errors: Vec<RowError>,
}

impl ValidationReport {
    pub fn new(file: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            errors: Vec::new(),
        }
    }

    pub fn push(&mut self, line: u64, message: impl Into<String>) {
        self.errors.push(RowError {
            line,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} error(s)", self.file, self.errors.len())?;
        for e in &self.errors {
            if e.line == 0 {
                write!(f, "\n  {}", e.message)?;
            } else {
                write!(f, "\n  line {}: {}", e.line, e.message)?;
            }
        }
        Ok(())
    }
}
