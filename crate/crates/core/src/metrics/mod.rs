//! Evaluation metrics.

use alloc::string::String;

use thiserror::Error;

pub mod edges;
pub mod retrieval;

pub use edges::{EdgeCounts, EdgeCurves, EdgeEvalConfig, EdgeEvalResult, EdgeMap, PrPoint};
pub use retrieval::RetrievalResult;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("ground-truth map {0} is not binary")]
    NonBinaryGroundTruth(usize),
    #[error("prediction map {0} has values outside [0, 1]")]
    PredictionRange(usize),
    #[error("embedding row {0} is zero or not finite")]
    BadEmbedding(usize),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Fraction of positions where `predictions` equals `labels`.
pub fn accuracy(predictions: &[u32], labels: &[u32]) -> Result<f64, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::Length(alloc::format!(
            "{} predictions, {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// F-measure; 0 when both precision and recall are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}
