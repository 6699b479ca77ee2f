//! Outage analysis of full-duplex relay channels in the wideband, low-SNR regime.

pub mod asymptotics;
pub mod channel;
pub mod error;
pub mod outage;
pub mod ppm;
pub mod probkit;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
