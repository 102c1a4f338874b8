//! Core algorithms for drawing-guided semi-supervised learning on paired
//! image/drawing corpora.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (an allocator is required). File formats, image
//! decoding and the command line live in the `glyphpair` crate.
//!
//! Module map:
//!
//! - [`corpus`], [`split`], [`batch`]: records, two-fold splits, batch order.
//! - [`synth`]: procedural glyph pairs with controllable degradation.
//! - [`model`]: dual encoder, image decoder and the two classifier heads.
//! - [`losses`]: similarity, classification, generation and perceptual terms.
//! - [`trainer`], [`optim`]: gradient routing and parameter updates.
//! - [`metrics`]: accuracy, retrieval mAP / P@k, boundary ODS / OIS / AP.
//! - [`inspect`]: class localization maps.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod batch;
pub mod corpus;
pub mod inspect;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod real;
pub mod seed;
pub mod split;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use batch::{Batch, BatchError};
pub use corpus::{Corpus, CorpusError, LabelKind, PairRecord, Vocabulary};
pub use losses::{LossBreakdown, LossConfig};
pub use model::{BackboneName, BackboneSpec, ModelError, PairModel, PairOutputs, ParamGroup};
pub use real::Real;
pub use split::{Fold, LabeledFraction, SplitError, SplitPlan};
pub use tensor::{Matrix, Tensor};
pub use trainer::{TrainConfig, TrainError, Trainer};
