//! Frequency-domain linear operators: the unit dipole kernel, the wave-type
//! operator `P(D) = -Δ/3 + ∂²/∂x3²`, and the negative Laplacian in both its
//! continuous-symbol and 7-point-stencil forms.
//!
//! Frequencies use signed DFT integers `k_i ∈ [-N_i/2, N_i/2)` and physical
//! coordinates `ξ_i = k_i / (N_i h_i)` (cycles per millimetre), so anisotropic
//! voxels tilt the dipole cone correctly. B0 is along x3.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::volume::{crop_corner, pad_zero, GridSpec, ScalarVolume};

/// Relative bound on the imaginary part left after applying a real, even symbol.
const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// A real multiplier on the DFT lattice of a grid, stored in volume order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSymbol {
    grid: GridSpec,
    values: Vec<f64>,
}

/// How a symbol is applied to a volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvPolicy {
    /// Periodic convolution on the volume's own grid.
    Circular,
    /// Zero-pad by `factor` (≥ 2), convolve periodically on the larger grid, crop.
    /// Approximates free-space convolution.
    ZeroPadded { factor: usize },
}

/// What [`solve_symbol`] does where `symbol + shift` vanishes at the zero frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroFrequency {
    Reject,
    /// Set the solution's mean (DC coefficient) to zero.
    SetZero,
}

#[inline]
pub(crate) fn signed_freq(i: usize, n: usize) -> i64 {
    if 2 * i < n {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl SpectralSymbol {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    /// Evaluate `f(ξ)` at every lattice point, `ξ` in cycles per millimetre.
    pub fn from_frequency_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let [n1, n2, n3] = grid.dims();
        let [h1, h2, h3] = grid.spacing();
        let axis =
            |n: usize, h: f64| -> Vec<f64> { (0..n).map(|i| signed_freq(i, n) as f64 / (n as f64 * h)).collect() };
        let (x1, x2, x3) = (axis(n1, h1), axis(n2, h2), axis(n3, h3));
        let mut values = Vec::with_capacity(grid.len());
        for &c in &x3 {
            for &b in &x2 {
                for &a in &x1 {
                    values.push(f([a, b, c]));
                }
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the zero frequency.
    pub fn dc(&self) -> f64 {
        self.values[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product.
    pub fn product(&self, other: &SpectralSymbol) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "symbol product")?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn squared(&self) -> Self {
        self.map(|v| v * v)
    }
}

/// `𝒟(ξ) = 1/3 − ξ3²/|ξ|²`, with `𝒟(0) = 0`.
pub fn dipole_symbol(grid: &GridSpec) -> SpectralSymbol {
    SpectralSymbol::from_frequency_fn(*grid, |[a, b, c]| {
        let (a2, b2, c2) = (a * a, b * b, c * c);
        let r2 = a2 + b2 + c2;
        if r2 == 0.0 {
            0.0
        } else {
            // Numerator form is exactly zero on lattice points of the cone.
            ((a2 + b2 - 2.0 * c2) / (3.0 * r2)).clamp(-2.0 / 3.0, 1.0 / 3.0)
        }
    })
}

/// `|2πξ|²`, the symbol of `−Δ`.
pub fn neglap_continuous_symbol(grid: &GridSpec) -> SpectralSymbol {
    SpectralSymbol::from_frequency_fn(*grid, |xi| xi.iter().map(|x| (2.0 * PI * x).powi(2)).sum())
}

/// `|2πξ|² 𝒟(ξ)`, the symbol of `P(D)`.
pub fn pdiff_symbol(grid: &GridSpec) -> SpectralSymbol {
    let lap = neglap_continuous_symbol(grid);
    let dip = dipole_symbol(grid);
    lap.product(&dip).expect("same grid")
}

/// DFT eigenvalues of the periodic 7-point `−Δ` stencil,
/// `Σ_i (2 − 2 cos(2π k_i / N_i)) / h_i²`.
pub fn neglap_discrete_symbol(grid: &GridSpec) -> SpectralSymbol {
    let [n1, n2, n3] = grid.dims();
    let [h1, h2, h3] = grid.spacing();
    let axis = |n: usize, h: f64| -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 - 2.0 * (2.0 * PI * i as f64 / n as f64).cos()) / (h * h))
            .collect()
    };
    let (e1, e2, e3) = (axis(n1, h1), axis(n2, h2), axis(n3, h3));
    let mut values = Vec::with_capacity(grid.len());
    for &c in &e3 {
        for &b in &e2 {
            for &a in &e1 {
                values.push(a + b + c);
            }
        }
    }
    // cos(0) = 1 exactly, so the DC entry is already 0.
    SpectralSymbol { grid: *grid, values }
}

/// Apply `F⁻¹ S F`, returning the real part. Fails if the discarded imaginary
/// part exceeds `1e-10 ‖vol‖∞`.
pub fn apply_symbol(sym: &SpectralSymbol, vol: &ScalarVolume, policy: ConvPolicy) -> Result<ScalarVolume> {
    match policy {
        ConvPolicy::Circular => {
            sym.grid.ensure_same(vol.grid(), "circular symbol application")?;
            let out = SpectralContext::new(sym.grid).apply_checked(&sym.values, vol.as_slice())?;
            Ok(ScalarVolume::from_vec(sym.grid, out))
        }
        ConvPolicy::ZeroPadded { factor } => {
            if factor < 2 {
                return Err(Error::InvalidArgument(format!(
                    "zero-padded policy needs factor >= 2, got {factor}"
                )));
            }
            let padded = pad_zero(vol, factor)?;
            sym.grid.ensure_same(padded.grid(), "zero-padded symbol application")?;
            let out = SpectralContext::new(sym.grid).apply_checked(&sym.values, padded.as_slice())?;
            crop_corner(&ScalarVolume::from_vec(sym.grid, out), vol.grid())
        }
    }
}

/// Solve `(sym + shift) x = rhs` by spectral division.
pub fn solve_symbol(
    sym: &SpectralSymbol,
    rhs: &ScalarVolume,
    shift: f64,
    zero_frequency: ZeroFrequency,
) -> Result<ScalarVolume> {
    sym.grid.ensure_same(rhs.grid(), "spectral solve")?;
    let mut inv = Vec::with_capacity(sym.values.len());
    for (index, &s) in sym.values.iter().enumerate() {
        let d = s + shift;
        if d == 0.0 {
            if index == 0 && zero_frequency == ZeroFrequency::SetZero {
                inv.push(0.0);
                continue;
            }
            return Err(Error::SingularSymbol { index });
        }
        inv.push(1.0 / d);
    }
    let out = SpectralContext::new(sym.grid).apply_checked(&inv, rhs.as_slice())?;
    Ok(ScalarVolume::from_vec(sym.grid, out))
}

/// Periodic 7-point `−Δ`: `Σ_i (2u(x) − u(x+e_i) − u(x−e_i)) / h_i²`.
pub fn neglap_stencil(vol: &ScalarVolume) -> ScalarVolume {
    let grid = *vol.grid();
    ScalarVolume::from_vec(grid, neglap_periodic(&grid, vol.as_slice()))
}

pub(crate) fn neglap_periodic(grid: &GridSpec, u: &[f64]) -> Vec<f64> {
    let [n1, n2, n3] = grid.dims();
    let [h1, h2, h3] = grid.spacing();
    let (w1, w2, w3) = (1.0 / (h1 * h1), 1.0 / (h2 * h2), 1.0 / (h3 * h3));
    let mut out = vec![0.0; u.len()];
    for k in 0..n3 {
        let (km, kp) = ((k + n3 - 1) % n3, (k + 1) % n3);
        for j in 0..n2 {
            let (jm, jp) = ((j + n2 - 1) % n2, (j + 1) % n2);
            for i in 0..n1 {
                let (im, ip) = ((i + n1 - 1) % n1, (i + 1) % n1);
                let c = u[grid.index(i, j, k)];
                out[grid.index(i, j, k)] = w1 * (2.0 * c - u[grid.index(im, j, k)] - u[grid.index(ip, j, k)])
                    + w2 * (2.0 * c - u[grid.index(i, jm, k)] - u[grid.index(i, jp, k)])
                    + w3 * (2.0 * c - u[grid.index(i, j, km)] - u[grid.index(i, j, kp)]);
            }
        }
    }
    out
}

/// Planned transforms for one grid, reused across many symbol applications.
pub(crate) struct SpectralContext {
    fft: Fft3,
}

impl SpectralContext {
    pub(crate) fn new(grid: GridSpec) -> Self {
        Self {
            fft: Fft3::new(grid.dims()),
        }
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        self.fft.forward_real(x)
    }

    /// Inverse transform, keeping the real part.
    pub(crate) fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.fft.inverse(&mut spec);
        spec.into_iter().map(|c| c.re).collect()
    }

    pub(crate) fn apply(&self, sym: &[f64], x: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(x);
        spec.iter_mut().zip(sym).for_each(|(c, s)| *c *= *s);
        self.inverse_real(spec)
    }

    fn apply_checked(&self, sym: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut spec = self.forward(x);
        spec.iter_mut().zip(sym).for_each(|(c, s)| *c *= *s);
        self.fft.inverse(&mut spec);
        let residue = spec.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
        let bound = IMAG_RESIDUE_TOL * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if residue > bound {
            return Err(Error::ImaginaryResidue { residue, bound });
        }
        Ok(spec.into_iter().map(|c| c.re).collect())
    }
}
