//! Functional Hill process for extreme-value tail analysis.
//!
//! * [`sampling`]: reproducible random streams, order statistics and the
//!   quantile models used in the goodness-of-fit study.
//! * [`estimators`]: `T_n(f)`, the power-weight and kernel generalisations
//!   of the Hill estimator, and the endpoint-normalised statistic.
//! * [`martingale`]: simulation of `W`, the centring `A_{k,n}(f)` and the
//!   observed statistic `W*`.
//! * [`moments`]: exact and bracketed moments of the exponential
//!   functionals, integral bounds and regime diagnostics.
//! * [`tables`]: Monte Carlo null tables and their file format.
//! * [`testing`]: the Weibull-domain test and the nine-model study.
//! * [`diagnostics`]: the pass/fail verification suites.
//! * [`records`]: the CSV records files written by reports.
//! * [`ks`]: Kolmogorov-Smirnov distances and critical values.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod ks;
pub mod martingale;
pub mod moments;
pub mod records;
pub mod sampling;
pub mod tables;
pub mod testing;

pub use error::{Error, Result};
pub use estimators::{KernelFunction, WeightFunction};
pub use sampling::{RngStream, SampleData};
pub use tables::NullTable;
