//! Simulator for a switching-noise PUF with hybrid anomaly detection.
//!
//! The pipeline runs synthetic converter noise ([`synth`]) through an STFT
//! and banded features ([`spectral`]). Those features drive both PUF
//! responses ([`puf`]) and a PCA / adaptive-threshold detector
//! ([`detector`]) whose scores a Bayesian filter smooths ([`bayes`]).
//! [`harness`] runs whole scenarios and [`cli`] backs the `noisepuf` binary.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bayes;
pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod harness;
pub mod puf;
pub mod seed;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
