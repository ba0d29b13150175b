//! Predictive beamforming for ISAC-assisted vehicle-to-infrastructure links.
//!
//! This crate holds the pure numerical pieces: ULA steering vectors and
//! sum-rate evaluation, the vehicle kinematic model, the Gaussian angle
//! sensing channel, a from-scratch convolutional LSTM angle predictor
//! (forward pass, backpropagation through time, adaptive-moment training)
//! and the baseline predictors it is compared against.
//!
//! It is `no_std` and only needs `alloc`. File formats, configuration and
//! the command line live in the `isac-sim` crate.
#![no_std]

extern crate alloc;

pub mod channel;
pub mod dataset;
pub mod error;
pub mod mobility;
pub mod nn;
pub mod predictors;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};
