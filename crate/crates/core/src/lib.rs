//! Pairwise-ranking training protocol for architecture performance predictors.
//!
//! Instead of regressing the accuracy of each sampled architecture, the
//! predictor is trained on signed differences of architecture encodings,
//! labelled by which of the two architectures performed better. The trained
//! model then answers the only question an evolutionary search ever asks
//! during selection: which of two candidates is better?
//!
//! Modules:
//!
//! * [`dataset`] loads, filters, splits, and synthesizes vectorized
//!   architecture/accuracy records.
//! * [`protocol`] builds training data for the pairwise protocol, the
//!   traditional regression baseline, and the two ablations.
//! * [`models`] provides CART trees, random forests, gradient boosting, and
//!   an RBF-kernel SVM behind a single fit/predict interface.
//! * [`tuning`] implements random hyperparameter search with record-level
//!   k-fold cross-validation.
//! * [`evaluation`] computes pairwise ranking accuracy and runs the
//!   protocol comparison and ablation grids.
//! * [`enas_sim`] drives a simulated evolutionary search with a trained
//!   predictor and estimates the cost of real fitness evaluation.
//! * [`cli`] wires everything into the `pairank` command.

pub mod cli;
pub mod dataset;
pub mod enas_sim;
pub mod error;
pub mod evaluation;
pub mod models;
pub mod protocol;
pub mod rng;
pub mod tuning;

pub use dataset::{ArchitectureDataset, ArchitectureRecord, FeatureVector};
pub use error::{Error, Result};
pub use models::{ModelKind, ModelMode, TrainedPredictor};
pub use protocol::Protocol;
pub use tuning::ParamConfig;
