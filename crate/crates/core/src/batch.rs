//! A mixed labeled/unlabeled training batch.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::real::Real;
use crate::tensor::Tensor;

/// Label value stored at rows whose mask is `false`; never read.
pub const NO_LABEL: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatchError {
    #[error("empty batch")]
    Empty,
    #[error("batch field lengths disagree: {0}")]
    Inconsistent(String),
    #[error("{field} values outside [0, 1]")]
    OutOfRange { field: &'static str },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    /// `[B, 1, S, S]`, intensities in `[0, 1]`.
    pub images: Tensor<T>,
    /// `[B, 1, S, S]`, ink = 1.
    pub drawings: Tensor<T>,
    pub labeled_mask: Vec<bool>,
    /// Valid only where `labeled_mask` is set; [`NO_LABEL`] elsewhere.
    pub labels: Vec<u32>,
    pub record_ids: Vec<String>,
}

impl<T: Real> Batch<T> {
    pub fn new(
        images: Tensor<T>,
        drawings: Tensor<T>,
        labels: Vec<Option<u32>>,
        record_ids: Vec<String>,
    ) -> Result<Self, BatchError> {
        let b = images.batch();
        if b == 0 {
            return Err(BatchError::Empty);
        }
        if drawings.shape() != images.shape() || labels.len() != b || record_ids.len() != b {
            return Err(BatchError::Inconsistent(format!(
                "images {:?}, drawings {:?}, labels {}, ids {}",
                images.shape(),
                drawings.shape(),
                labels.len(),
                record_ids.len()
            )));
        }
        if images.shape()[1] != 1 {
            return Err(BatchError::Inconsistent(format!(
                "expected 1 channel, got {}",
                images.shape()[1]
            )));
        }
        let in_unit = |t: &Tensor<T>| t.data().iter().all(|&v| v >= T::zero() && v <= T::one());
        if !in_unit(&images) {
            return Err(BatchError::OutOfRange { field: "image" });
        }
        if !in_unit(&drawings) {
            return Err(BatchError::OutOfRange { field: "drawing" });
        }
        let labeled_mask = labels.iter().map(Option::is_some).collect();
        let labels = labels.into_iter().map(|l| l.unwrap_or(NO_LABEL)).collect();
        Ok(Batch {
            images,
            drawings,
            labeled_mask,
            labels,
            record_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labeled_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labeled_mask.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled_mask.iter().filter(|&&m| m).count()
    }

    pub fn label(&self, row: usize) -> Option<u32> {
        self.labeled_mask[row].then(|| self.labels[row])
    }

    pub fn cast<U: Real>(&self) -> Batch<U> {
        Batch {
            images: self.images.cast(),
            drawings: self.drawings.cast(),
            labeled_mask: self.labeled_mask.clone(),
            labels: self.labels.clone(),
            record_ids: self.record_ids.clone(),
        }
    }
}
