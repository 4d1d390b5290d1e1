// SPDX-License-Identifier: Apache-2.0
//! Membership-inference (tracing) risk analysis for discrete Bayesian networks.
//!
//! The crate learns networks from integer-coded categorical data, mounts the
//! likelihood-ratio tracing attack against a released model, and computes the
//! closed-form power/error trade-off that a network's complexity implies.
//!
//! Module map:
//! - [`dataset`]: loading, validation, splitting and (biased) sampling.
//! - [`network`]: structures, conditional probability tables, joint
//!   likelihoods and ancestral sampling.
//! - [`learn`]: correlation-score structure search, Dirichlet parameter
//!   estimation and posterior data synthesis.
//! - [`attack`]: the LR statistic, threshold calibration and empirical ROC.
//! - [`theory`]: normal CDF/quantile, the power bound, LR moments and the
//!   Gaussian-DP adjustments.
//! - [`harness`]: the repeated-split experiment protocol and reporting.

pub mod attack;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod learn;
pub mod network;
pub mod theory;

pub use error::{Error, Result};
