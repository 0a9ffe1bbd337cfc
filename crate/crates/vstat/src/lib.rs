//! Subsampled ensembles viewed as incomplete U- and V-statistics, with
//! variance estimation, finite-sample bias corrections, and the exact
//! combinatorial references needed to test them.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod oracles;
pub mod plan;
pub mod sampling;
pub mod seed;
pub mod simdata;
pub mod stats;
pub mod variance;

pub use error::{Error, Result};
