//! Severity triage over dental radiology report text.
//!
//! The crate covers the full pipeline: corpus handling and a synthetic
//! report generator, text cleaning and tokenization, TF-IDF featurization,
//! seven classical classifiers plus a CNN-LSTM trained from scratch on a
//! small fp64 tensor engine, a stratified cross-validation harness with
//! random oversampling, and one-way ANOVA / Tukey HSD statistics for
//! comparing model results.
//!
//! Everything is deterministic: all randomness flows from a single master
//! seed through [`rng::derive_seed`], so identical configurations produce
//! identical models, metrics, and report files.

pub mod classic;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model_file;
pub mod neural;
pub mod rng;
pub mod serve;
pub mod stats;
pub mod textprep;
pub mod vectorize;

pub use error::{Error, Result};
