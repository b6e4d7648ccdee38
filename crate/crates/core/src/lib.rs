//! Double/debiased machine learning for dyadic (network) data.
//!
//! Dyadic data assign an observation to every ordered pair of nodes, so any
//! two observations that share a node are dependent. This crate implements
//! estimation and inference that respect that dependence:
//!
//! * [`sample`] stores complete directed dyadic samples;
//! * [`folds`] partitions *nodes* into cross-fitting folds;
//! * [`learners`] provides lasso logit and weighted lasso least squares with
//!   post-selection refits, used as nuisance learners;
//! * [`scores`] defines Neyman-orthogonal scores (logit link formation,
//!   partially linear regression, partially linear IV);
//! * [`engine`] runs dyadic cross-fitting and computes the dyadic-robust
//!   sandwich variance and confidence intervals;
//! * [`simulation`] generates the logistic link formation design and runs
//!   Monte Carlo studies, including the dyad-splitting baseline;
//! * [`io`] reads dyadic CSV files and writes sample files.

pub mod engine;
pub mod error;
pub mod folds;
pub mod io;
pub mod learners;
pub mod sample;
pub mod scores;
pub mod simulation;

pub use engine::{
    confidence_interval, conventional_estimate, cross_fit_estimate, cross_fit_with_partition, resampled_cross_fit,
    ConfidenceInterval, CrossFitConfig, DMLFit, Method, ResampledFit,
};
pub use error::{DyadError, Result};
pub use folds::FoldPartition;
pub use sample::{BuildOptions, DyadIndex, DyadRecord, DyadicSample, NodeId, OutcomeKind};
pub use io::{load_dyadic_csv, read_dyadic_csv, write_sample_csv, ColumnRoles, LoadedSample};
pub use scores::{IvScore, LogitScore, NuisanceConfig, PenaltyScale, PlmScore, ScoreKind, ScoreModel};
pub use simulation::{gen_dgp, run_monte_carlo, MCResult, SimConfig};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dyadic-data.md")]
    mod dyadic_data {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/scores.md")]
    mod scores {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
