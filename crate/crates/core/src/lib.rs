//! Simulation and verification toolkit for fractional bridges
//! `dX = −α X/(T−t) dt + dB`, driven by fractional Brownian motion with
//! `H ≥ ½`, and for the least-squares estimator of the drift parameter α.
//!
//! The crate samples fBm ([`fbm`]), builds bridge paths and the auxiliary
//! processes ξ, η ([`bridge`]), evaluates the estimator on a ladder of times
//! approaching the horizon ([`estimator`]), tabulates the limiting laws per
//! asymptotic regime ([`limits`]) and checks them by Monte Carlo
//! ([`mcharness`]).

pub mod bridge;
pub mod cli;

pub mod error;
pub mod estimator;
pub mod fbm;
pub mod io;
pub mod limits;
pub mod mcharness;

pub mod rng;
pub mod specialfn;
pub mod stats;

pub use error::{Error, Result};
