//! Location classification for crowded-scene video.
//!
//! The pipeline runs in four phases:
//!
//! 1. [`shotseg`] splits a frame sequence into shots and picks keyframes.
//! 2. [`bgfg`] fits a per-pixel Gaussian background model in HSI and separates foreground.
//! 3. [`sift`] extracts keypoint descriptors from the background image and [`encoding`]
//!    turns them into one pooled sparse-code feature per sample.
//! 4. [`classify`] trains KNN, MLP or SVM models on those features.
//!
//! [`evalreport`] computes precision/recall reports and [`pipeline`] wires the phases
//! together with configuration, persistence and a synthetic dataset generator.

pub mod bgfg;
pub mod classify;
pub mod codec;
pub mod encoding;
pub mod error;
pub mod evalreport;
pub mod imaging;
pub mod pipeline;
pub mod shotseg;
pub mod sift;

pub use error::{Error, Result};
