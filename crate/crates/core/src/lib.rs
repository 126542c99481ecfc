//! Fairness-aware evolutionary search over tabular classification pipelines.
//!
//! A pipeline is a data-selection step (instance and/or feature selection), a
//! fixed impute/encode stage and a model with hyperparameters. Candidate
//! pipelines are scored by a single scalar fitness mixing a predictive
//! component (normalised MCC and TPR) with an intersectional fairness
//! component (demographic parity, equalised odds and ABROCA), and searched
//! with a generational genetic algorithm. The [`harness`] module runs the
//! full baseline-versus-fairness-aware comparison protocol.

pub mod data;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
