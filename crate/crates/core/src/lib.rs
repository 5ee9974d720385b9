//! Covariate-weighted multistage stochastic optimization.
//!
//! Historical sample paths are reweighted by a learner (kNN, honest tree,
//! forest) conditioned on the observed covariates, and the resulting
//! weighted dynamic program is solved either exactly on the extensive form
//! or by stochastic dual dynamic programming.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod exact;
pub mod linopt;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod sddp;
pub mod weights;

pub use error::{Error, Result};
