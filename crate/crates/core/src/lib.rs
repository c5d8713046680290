//! Linear graph convolutions on contextual stochastic block models.
//!
//! The crate covers the full pipeline of a numerical study of ridge
//! regression on graph-filtered features:
//!
//! * [`csbm`]: two-community graphs (binary or Gaussian, symmetric or not)
//!   with a rank-one feature spike, and a balanced train/test split;
//! * [`regression`]: polynomial graph filters, ridge fits and risk reports;
//! * [`theory`]: asymptotic predictions of the same risks;
//! * [`experiments`]: seeded, parallel sweeps comparing both.
//!
//! ```
//! use csbm_gcn::{CsbmConfig, Dataset, GraphFilter, build_design, fit_ridge, evaluate};
//!
//! let cfg = CsbmConfig::new(200, 2.0);
//! let data = Dataset::generate(&cfg, 0).unwrap();
//! let phi = build_design(&data.adjacency, &data.features.x, &GraphFilter::one_hop()).unwrap();
//! let fit = fit_ridge(&phi, &data.labels, &data.split, cfg.r).unwrap();
//! let report = evaluate(&phi, &fit, &data.labels, &data.split).unwrap();
//! assert!(report.r_train >= 0.0);
//! ```

pub mod csbm;
pub mod error;
pub mod experiments;
pub mod regression;
pub mod rng;
pub mod stats;
pub mod theory;

pub use csbm::{
    generate_labels, sample_adjacency, sample_features, sample_split, AdjacencyMatrix, CsbmConfig,
    Dataset, Ensemble, FeatureMatrix, Labels, TrainTestSplit,
};
pub use error::{Error, Result};
pub use regression::{
    build_design, evaluate, fit_ridge, predict, ridge_objective, ClassStats, GraphFilter,
    RiskReport, TestReport, Weights,
};
pub use stats::Stat;
pub use theory::{RidgeConvention, TheoryParams, TheoryPrediction};
