//! Data filtering for cluster analysis by smoothed l0-norm regularization.
//!
//! Each sample `x_i` gets a centroid `z_i`; minimizing squared residuals plus a
//! weighted count of distinct centroid pairs pulls centroids of nearby samples
//! together. The solved centroids replace the samples as input to a clustering
//! algorithm, and the penalty is chosen per algorithm by a within/between
//! kernel-distance criterion.

pub mod clustering;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod model;
pub mod oracles;
pub mod pipeline;
pub mod seeds;
pub mod solver;

pub use error::{FilterError, Result};
