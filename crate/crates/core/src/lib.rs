//! Differential OFDM simulation lab for studying inter-carrier interference
//! (ICI) mitigation under Doppler distortion.
//!
//! The crate models a frequency-differential OFDM link over a multipath
//! channel with uniform Doppler scaling, and implements four receivers:
//!
//! * `ConvFFT`: plain FFT demodulation with differential detection,
//! * `PFFT`: partial (time-segmented) FFT bank with adaptive combining,
//! * `FFFT`: fractional FFT bank at fractions of the carrier spacing,
//! * `AFFT`: fractional bank at fractions of an adaptively estimated
//!   fiducial frequency offset.
//!
//! The [`harness`] module drives Monte-Carlo sweeps over SNR, Doppler factor,
//! carrier count and fiducial offset and writes CSV reports.

pub mod bank;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod fft;
pub mod framefile;
pub mod harness;
pub mod receivers;
pub mod resample;
pub mod rxfront;
pub mod signal;
pub mod tx;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
