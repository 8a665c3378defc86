//! Cold-load-pick-up (CLPU) demand assessment from smart-meter data.
//!
//! The crate is organised along the two analysis layers plus their support code:
//!
//! - [`data`]: meter/temperature/outage ingestion, feeder aggregation, season and
//!   day-type partitioning.
//! - [`lssvm`]: least-squares SVM auto-regression with exogenous temperature input.
//! - [`feeder`]: counterfactual diversified demand, CLPU ratios, the ratio surface
//!   and the sensitivity studies.
//! - [`gmm`]: bivariate Gaussian mixtures fitted by EM with BIC selection.
//! - [`customer`]: contribution factors, product-density marginals, demand-increase
//!   densities, convolution, diversity and entropy indices.
//! - [`tclsim`]: thermostatically controlled load population simulator used as the
//!   ground-truth oracle.
//! - [`pipeline`]: end-to-end orchestration shared by the CLI and the studies.

pub mod customer;
pub mod data;
pub mod error;
pub mod feeder;
pub mod gmm;
pub mod lssvm;
pub mod pipeline;
pub mod stats;
pub mod tclsim;

pub use error::{Error, Result};
