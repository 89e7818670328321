//! Changepoint testing and power analysis for segmented regression.
//!
//! The crate bundles:
//!
//! - [`model`]: design matrices, OLS and binomial IRLS null fits, hat matrices.
//! - [`tfcp`]: the benchmark tests for a change point (Worsley's `T_max`/`W_max`
//!   for Gaussian sequences and the trimmed binary likelihood ratio `L_max`).
//! - [`pscore`]: the pseudo-score statistic `s0` with its standard Normal null
//!   distribution, plus a grid changepoint estimate.
//! - [`power`]: analytic power and sample size from the alternative mean of `s0`,
//!   covariate specifications, segmented fits and post-hoc power.
//! - [`simlab`]: seeded Monte Carlo rejection-rate experiments.
//! - [`report`]: serializable reports shared by the command line and HTTP front ends.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covspec;
pub mod datasets;
pub mod error;
pub mod model;
pub mod normal;
pub mod power;
pub mod pscore;
pub mod report;
pub mod rng;
pub mod series;
pub mod simlab;
pub mod tfcp;

pub use error::{Error, Result};
pub use normal::Alternative;
pub use series::Series;
