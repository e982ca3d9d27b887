#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod bc;
pub mod checkpoint;
pub mod config;
pub mod decision;
pub mod discriminator;
pub mod error;
pub mod eval;
pub mod expert;
pub mod highway;
pub mod persist;
pub mod pointmass;
pub mod policy;
pub mod rollout;
pub mod seed;
pub mod stats;
pub mod trainer;

pub use decision::{Decision, ACTION_DIM};
pub use error::{Error, Result};
