//! Multi-view transformer for irregular multivariate time series
//! classification.
//!
//! The crate is organised bottom-up:
//!
//! * [`autodiff`], [`tensor`], [`params`], [`optim`]: a small fp64
//!   reverse-mode autodiff engine with Adam;
//! * [`gradcheck`]: central-difference gradient verification;
//! * [`data`]: the `#irts v1` triplet format, masks, normalization, folds,
//!   sensor dropout and synthetic corpora;
//! * [`model`]: the three view encoders, cross-view fusion and the
//!   irregularity gate, with variants V1 to V4 and per-view switches;
//! * [`metrics`]: AUROC, AUPRC and macro-averaged multi-class scores;
//! * [`train`]: training, cross-validation, sweeps and ablations;
//! * [`cli`]: the `mvformer` command line.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{ModelConfig, MvFormer, Switches, Variant};
pub use tensor::Tensor;
