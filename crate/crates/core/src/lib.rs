//! Tools for annotating and analysing semantic proximity between word uses.
//!
//! Uses of a word are paired, judged on a four-point relatedness scale,
//! aggregated into a weighted usage graph and clustered into senses.
//! Sense frequency distributions over time periods then give graded and
//! binary measures of lexical semantic change.

mod error;

pub mod annotators;
pub mod cluster;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod scheduler;
pub mod stats;
pub mod viz;
pub mod wug;

pub use error::{Error, Result, RowError, ValidationReport};
