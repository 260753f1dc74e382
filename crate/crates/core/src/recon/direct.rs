//! Closed-form spectral inversions.

use crate::error::{Error, Result};
use crate::spectral::{dipole_symbol, SpectralContext};
use crate::volume::ScalarVolume;

/// Truncated k-space division, `F⁻¹[sign(D) / max(|D|, ħ) · F(b_l)]` with `sign(0) = 0`.
pub fn tkd(b_l: &ScalarVolume, hbar: f64) -> Result<ScalarVolume> {
    if !(hbar.is_finite() && hbar > 0.0) {
        return Err(Error::InvalidArgument("TKD threshold must be positive".into()));
    }
    let grid = *b_l.grid();
    let inv: Vec<f64> = dipole_symbol(&grid)
        .values()
        .iter()
        .map(|&d| if d == 0.0 { 0.0 } else { d.signum() / d.abs().max(hbar) })
        .collect();
    let out = SpectralContext::new(grid).apply(&inv, b_l.as_slice());
    ScalarVolume::new(grid, out)
}

/// Minimiser of `½‖Aχ − b_l‖² + ε‖χ‖²`: `F⁻¹[D F(b_l) / (D² + 2ε)]`.
pub fn tikhonov(b_l: &ScalarVolume, eps: f64) -> Result<ScalarVolume> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument("Tikhonov weight must be positive".into()));
    }
    let grid = *b_l.grid();
    let filter: Vec<f64> = dipole_symbol(&grid)
        .values()
        .iter()
        .map(|&d| d / (d * d + 2.0 * eps))
        .collect();
    let out = SpectralContext::new(grid).apply(&filter, b_l.as_slice());
    ScalarVolume::new(grid, out)
}
