//! Quantitative susceptibility mapping: phantom simulation, background field
//! removal, and dipole inversion with harmonic incompatibility removal.

pub mod bfr;
pub mod error;
pub mod fft;
pub mod framelet;
pub mod metrics;
pub mod recon;
pub mod sim;
pub mod spectral;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{band_mask, boundary_set, crop_corner, pad_zero, ComplexVolume, GridSpec, RoiMask, ScalarVolume};
