//! Clustering of contextual linear bandits under misspecified user models.
//!
//! The crate provides the graph-based ([`policy::rclumb`]) and set-based
//! ([`policy::rsclumb`]) robust clustering policies, the comparison
//! baselines, synthetic and rating-matrix environments, a seeded
//! multi-trial harness and numeric checks for the supporting inequalities.

// `!(a >= b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod env;
pub mod error;
pub mod harness;
pub mod history;
pub mod policy;
pub mod ridge;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
