//! Finite-sample symmetric mean estimation driven by smoothed Fisher information.
//!
//! The estimator fits a Gaussian kernel density estimate of bandwidth `r` to part
//! of the data, turns its score into a clipped, antisymmetric test function around
//! a robust pilot estimate, and takes one approximate Newton step with the rest of
//! the data. The crate also carries the reference machinery used to check it: a
//! family of symmetric test distributions, an exact oracle for their `r`-smoothed
//! density, score and Fisher information, and a counter-based random number
//! generator with reproducible streams.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental functions go
//! through [`libm`], so results are bit-reproducible across platforms.
//!
//! Module map:
//!
//! - [`distributions`]: symmetric test distributions with exact moments.
//! - [`smoothing`]: the `r`-smoothed oracle (`f_r`, `s_r`, `I_r`).
//! - [`kde`]: kernel density estimate, clipped and symmetrized scores.
//! - [`fisher`]: plug-in Fisher information estimate from a fitted KDE.
//! - [`estimators`]: pilot estimators, local Newton step and the global pipeline.
//! - [`rng`], [`quadrature`], [`math`]: numerical plumbing.

#![cfg_attr(not(test), no_std)]
// `!(a > b)` is used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod fisher;
pub mod kde;
pub mod math;
pub mod quadrature;
pub mod rng;
pub mod smoothing;

pub use distributions::{Atom, DistributionSpec, MixtureComponent, SpecKind};
pub use error::{Error, Result};
pub use estimators::{
    check_sample_size, derive_parameters, empirical_mean, global_estimate, local_estimate, median_of_means,
    median_pairwise_means, Clipping, EstimateResult, EstimatorConfig, ParameterOverrides, ResolvedParams,
};
pub use fisher::{estimate_fisher, FisherConfig, FisherEstimate};
pub use kde::{clip_threshold, KdeModel, ScoreTable, SymmetrizedScore};
pub use rng::RngStream;
pub use smoothing::{FisherInformation, QuadratureConfig, SmoothedModel, TestFunction};
