//! Command line, file formats and training runs for learning image encoders
//! guided by paired line drawings. The numerical core lives in
//! `glyphpair-core`; this crate adds disk IO, configs, checkpoints and the
//! `glyphpair` binary.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fpu;
pub mod imageio;
pub mod manifest;
pub mod overlay;
pub mod synthio;
pub mod train;

pub use error::{Error, Result};

/// `v{crate version}` plus `git describe` output when built from a checkout.
pub const VERSION: &str = env!("GLYPHPAIR_VERSION");
