//! Secure key bounds for QKD privacy amplification driven by a non-uniform
//! random seed.
//!
//! - [`entropy`]: min-entropy of seed distributions and sampled RNG streams.
//! - [`hashing`]: the Toeplitz universal hash family used for privacy amplification.
//! - [`bounds`]: distance bounds and the secure key length with the `alpha - beta` penalty.
//! - [`oracle`]: exhaustive verification of the distance bound on small classical instances.
//! - [`decoy_bb84`]: two-decoy BB84 key-rate simulation against seed quality.
//! - [`config`], [`report`]: parameter files and CSV output.

pub mod bounds;
pub mod config;
pub mod decoy_bb84;
pub mod entropy;
pub mod error;
pub mod hashing;
pub mod oracle;
pub mod report;

pub use error::{Error, Result};
