//! Reliable control groups from positive-unlabeled observational data.
//!
//! The crate covers the whole workflow: simulate or ingest a dataset, hide a
//! share of treated units to obtain a positive-unlabeled (PU) sample, recover
//! reliable controls with a spy-calibrated Naive Bayes step followed by
//! iterative linear SVM refinement, trim to the common-support region of a
//! logistic propensity model fit on the adjustment set, and estimate the
//! average treatment effect with four estimators.

pub mod dataset;
pub mod effects;
pub mod error;
pub mod evalmetrics;
pub mod pipeline;
pub mod propensity;
pub mod pulearn;
pub mod seed;
pub mod synthgen;

pub use error::{Error, Result, StageContext};
