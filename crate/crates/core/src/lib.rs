//! Long-tailed generalized category discovery on embedding data.
//!
//! A small projection head is trained with instance and supervised
//! contrastive losses plus two distribution regularizers: cross-entropy of
//! the batch-mean prediction against a moving-average class prior, and
//! against the uniform distribution. Evaluation clusters the learned
//! features with seeded k-means and scores them with Hungarian matching in
//! four ways: all, known, unknown-aware and unknown-agnostic.
//!
//! Module map:
//!
//! * [`config`] hyperparameters, split description, INI config files
//! * [`rng`] named deterministic random streams
//! * [`datagen`] synthetic Gaussian mixtures, CSV ingestion, augmentation
//! * [`model`] projection head, prototype classifier, SGD, checkpoints
//! * [`losses`] InfoNCE, SupCon, target cross-entropy and the combined objective
//! * [`prior`] moving-average class prior
//! * [`eval`] Hungarian matching, seeded k-means, the four metrics
//! * [`harness`] training loop, sweeps, CSV and SVG output, CLI

pub mod config;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod prior;
pub mod rng;

pub use config::{ExperimentConfig, Hyperparams, SplitSpec, TrainSettings};
pub use datagen::{EmbeddingDataset, ViewPair};
pub use error::{Error, Result};
pub use eval::MetricsReport;
pub use linalg::Matrix;
pub use losses::{BatchViews, LossBreakdown};
pub use model::{OptimizerState, ProjectionHead, Prototypes};
pub use prior::ClassPrior;
pub use rng::RngService;
