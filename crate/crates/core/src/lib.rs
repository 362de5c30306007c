//! Closed-form predictions and validation simulators for linear transceivers
//! whose transmitter and receiver include componentwise quantizers.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantizer`]: scalar I/Q quantizers and their output constellations.
//! * [`moments`]: the linear-plus-Gaussian decomposition `(alpha, tau)` of a
//!   quantizer or of a full DAC → channel → ADC chain.
//! * [`analysis`]: sub-band spectrum, linear feasibility region and
//!   achievable-rate lower bounds.
//! * [`bounds`]: the DAC-constrained capacity upper bound built from the
//!   cumulant generating function of the constellation energy.
//! * [`montecarlo`]: finite-N random-unitary simulations of the signal chain.
//! * [`waveform`]: an oversampled OFDM transmitter with a b-bit DAC, Welch PSD
//!   and ACLR measurement.
//! * [`experiment`]: versioned JSON experiment configs and sweep runners used
//!   by the `quantcap` CLI.

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod gauss;
pub mod moments;
pub mod montecarlo;
pub mod quantizer;
pub mod rng;
pub mod waveform;

pub use num_complex::Complex64;

pub use analysis::{RateRegime, RateReport, SpectrumReport, SubbandPlan};
pub use bounds::UpperBoundReport;
pub use error::{Error, Result};
pub use moments::{AgnMoments, ChannelSpec, MomentEstimate, MomentMethod};
pub use quantizer::{Constellation, Quantizer, QuantizerSpec};

/// Version string stamped into every result file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
