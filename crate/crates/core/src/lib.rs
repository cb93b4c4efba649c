//! Approximate marginal posterior inclusion probabilities for Bayesian
//! variable selection under a spike-and-slab prior.
//!
//! The library isolates one coefficient at a time by rotating the data into
//! an orthonormal basis aligned with that column, approximates the Gaussian
//! posterior predictive of the held-out projection with one of several
//! backends (random-projection model averaging, approximate message
//! passing, or exact enumeration on small problems), and combines the
//! predictive with the prior analytically. See the `pipeline` module for
//! the top-level entry point and the `cli` module for the command-line
//! frontend.

pub mod amp;
pub mod bcr;
pub mod cli;
pub mod combine;
pub mod data;
pub mod error;
pub mod math;
pub mod oracle;
pub mod pipeline;
pub mod prior;
pub mod rng;
pub mod rotation;
pub mod sim;

pub use combine::{
    combine_marginal, combine_marginal_mixture, GaussianMixture, GaussianPredictive,
    MarginalResult,
};
pub use data::Dataset;
pub use error::{Error, Result};
pub use pipeline::{approximate_all_marginals, Backend, MarginalOptions};
pub use prior::SpikeSlabPrior;
pub use rotation::{rotate_for_index, RotatedProblem};
