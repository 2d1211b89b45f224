//! Credit-risk detection toolkit: CSV ingestion, preprocessing, exploratory
//! analysis, four binary classifiers, evaluation and a reporting CLI.

pub mod eda;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod models;
pub mod preprocess;
pub mod report;

pub use error::{CrlError, Result};
