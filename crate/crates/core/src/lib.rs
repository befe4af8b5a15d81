//! Coherence-based feature selection for paired EEG/EMG gesture classification.
//!
//! The crate is organised as a straight pipeline:
//!
//! - [`sigproc`]: resampling, zero-phase IIR filtering, segmentation, rectification
//!   and area normalisation of raw recordings, plus the trial interchange format.
//! - [`spectral`]: FFT spectra, magnitude-squared coherence and band-averaged
//!   feature matrices.
//! - [`augment`]: min-max scaling and SMOTE class balancing.
//! - [`cluster`]: Ward agglomerative clustering, k-means and normalised spectral
//!   clustering.
//! - [`consensus`]: consensus matrices, agreement filtering and feature selection.
//! - [`svm`]: a binary kernel SVM trained in the dual.
//! - [`pipeline`]: stratified splitting and the nested cross-validated grid search.
//! - [`synth`]: seeded synthetic datasets with planted couplings.
//! - [`cli`]: the `synth`, `features` and `run` commands.

pub mod augment;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod consensus;
pub mod error;
pub mod pipeline;
pub mod seed;
pub mod sigproc;
pub mod spectral;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
