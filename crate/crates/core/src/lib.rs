//! Subsample-and-tune hyperparameter search for dimension-reduction methods.
//!
//! A dataset is optionally subsampled, a DR engine is run at candidate
//! hyperparameters with several seeds, quality losses are aggregated per
//! trial, and a surrogate model proposes the next trial. Count-valued
//! hyperparameters are searched as fractions of the sample size so that an
//! optimum found on a subsample transfers to the full data.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapter;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod history;
pub mod lowdisc;
pub mod matrix;
pub mod metrics;
pub mod seed;
pub mod space;
pub mod subsample;
pub mod surrogate;
pub mod tsne;
pub mod tuner;

pub use error::{Error, Result};
