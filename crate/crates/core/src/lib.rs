//! Power spectral density estimation with the cross-correlation periodogram
//! (CCP), Bartlett and Hann-tapered Welch baselines, phase realignment, and a
//! Monte Carlo harness for checking the estimator's noise moments.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod monte_carlo;
pub mod noise;
pub mod report;
pub mod signal;
pub mod spectral;

pub use error::{Error, Result};
