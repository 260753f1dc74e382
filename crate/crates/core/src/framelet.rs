//! Undecimated tensor-product tight wavelet frame with periodic boundary.
//!
//! A univariate bank `{q0, q1}` satisfying the unitary extension principle
//! gives 8 tensor filters per level in 3D, indexed by `α ∈ {0,1}³`. Level `l`
//! uses the à-trous filters (taps `2^l` apart) applied to the level-`l-1`
//! low-pass output. The coefficient set holds the 7 high-pass bands of every
//! level plus the deepest low-pass band, and `WᵀW = I` exactly.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::volume::{line_starts, GridSpec, ScalarVolume};

const HIGH_BANDS: usize = 7;
const UEP_TOL: f64 = 1e-12;
const UEP_SAMPLES: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    low: Vec<f64>,
    high: Vec<f64>,
    levels: usize,
}

impl FilterBank {
    /// Validates the two UEP identities on a dense frequency sample.
    pub fn new(low: Vec<f64>, high: Vec<f64>, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidArgument("frame needs at least one level".into()));
        }
        if low.is_empty() || high.is_empty() {
            return Err(Error::InvalidArgument("empty filter".into()));
        }
        let deviation = uep_deviation(&low, &high);
        if deviation.is_nan() || deviation > UEP_TOL {
            return Err(Error::NotTightFrame { deviation });
        }
        Ok(Self { low, high, levels })
    }

    /// Haar framelet, `q0 = [1/2, 1/2]`, `q1 = [1/2, -1/2]`.
    pub fn haar(levels: usize) -> Result<Self> {
        Self::new(vec![0.5, 0.5], vec![0.5, -0.5], levels)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    fn filter(&self, bit: usize) -> &[f64] {
        if bit == 0 {
            &self.low
        } else {
            &self.high
        }
    }
}

/// Fourier series `q̂(ξ) = Σ_k q[k] e^{-iξk}`.
pub fn fourier_series(q: &[f64], xi: f64) -> Complex64 {
    q.iter()
        .enumerate()
        .map(|(k, &c)| c * Complex64::from_polar(1.0, -xi * k as f64))
        .sum()
}

/// Largest violation of `Σ|q̂_α(ξ)|² = 1` and `Σ q̂_α(ξ) conj(q̂_α(ξ+π)) = 0`.
pub fn uep_deviation(low: &[f64], high: &[f64]) -> f64 {
    (0..UEP_SAMPLES)
        .map(|s| {
            let xi = -PI + 2.0 * PI * s as f64 / UEP_SAMPLES as f64;
            let (a0, a1) = (fourier_series(low, xi), fourier_series(high, xi));
            let (b0, b1) = (fourier_series(low, xi + PI), fourier_series(high, xi + PI));
            let energy = (a0.norm_sqr() + a1.norm_sqr() - 1.0).abs();
            let cross = (a0 * b0.conj() + a1 * b1.conj()).norm();
            energy.max(cross)
        })
        .fold(0.0, f64::max)
}

/// Per-level thresholds `γ_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSchedule {
    gammas: Vec<f64>,
}

impl ThresholdSchedule {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidArgument(
                "thresholds must be finite and non-negative".into(),
            ));
        }
        Ok(Self { gammas })
    }

    /// `γ_l = ν 2^{-l}`.
    pub fn from_nu(nu: f64, levels: usize) -> Result<Self> {
        Self::new((0..levels).map(|l| nu * 0.5f64.powi(l as i32)).collect())
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.gammas.iter().map(|g| g * factor).collect())
    }
}

/// Frame coefficients: 7 high-pass bands per level and one low-pass band,
/// each on the full (undecimated) grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameCoeffs {
    grid: GridSpec,
    levels: usize,
    data: Vec<f64>,
}

/// `α = (a1, a2, a3)` to band ordinal `a1 + 2 a2 + 4 a3`.
fn ordinal(alpha: [u8; 3]) -> usize {
    alpha[0] as usize + 2 * alpha[1] as usize + 4 * alpha[2] as usize
}

impl FrameCoeffs {
    pub fn zeros(grid: GridSpec, levels: usize) -> Self {
        Self {
            grid,
            levels,
            data: vec![0.0; (HIGH_BANDS * levels + 1) * grid.len()],
        }
    }

    /// Assemble from a `(level, α) → band` map. Needs every high band of every
    /// level and the low band `(levels - 1, [0, 0, 0])`.
    pub fn from_bands(
        grid: GridSpec,
        levels: usize,
        mut bands: BTreeMap<(usize, [u8; 3]), ScalarVolume>,
    ) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidArgument("frame needs at least one level".into()));
        }
        let mut out = Self::zeros(grid, levels);
        let n = grid.len();
        let mut keys: Vec<(usize, [u8; 3])> = Vec::new();
        for l in 0..levels {
            for b in 1..8u8 {
                keys.push((l, [b & 1, (b >> 1) & 1, (b >> 2) & 1]));
            }
        }
        keys.push((levels - 1, [0, 0, 0]));
        for (slot, key) in keys.into_iter().enumerate() {
            let vol = bands.remove(&key).ok_or(Error::MissingBand {
                level: key.0,
                band: key.1,
            })?;
            grid.ensure_same(vol.grid(), "frame band")?;
            out.data[slot * n..(slot + 1) * n].copy_from_slice(vol.as_slice());
        }
        if let Some(key) = bands.keys().next() {
            return Err(Error::InvalidArgument(format!("unexpected band {key:?}")));
        }
        Ok(out)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn band_count(&self) -> usize {
        HIGH_BANDS * self.levels + 1
    }

    pub fn band(&self, level: usize, alpha: [u8; 3]) -> Option<&[f64]> {
        let b = ordinal(alpha);
        if alpha.iter().any(|&a| a > 1) || level >= self.levels {
            return None;
        }
        let slot = if b == 0 {
            if level + 1 != self.levels {
                return None;
            }
            HIGH_BANDS * self.levels
        } else {
            HIGH_BANDS * level + b - 1
        };
        let n = self.grid.len();
        Some(&self.data[slot * n..(slot + 1) * n])
    }

    pub fn low_band(&self) -> &[f64] {
        let n = self.grid.len();
        &self.data[HIGH_BANDS * self.levels * n..]
    }

    fn high_level(&self, level: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[HIGH_BANDS * level * n..HIGH_BANDS * (level + 1) * n]
    }

    fn high_level_mut(&mut self, level: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[HIGH_BANDS * level * n..HIGH_BANDS * (level + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn norm2(&self) -> f64 {
        crate::volume::norm2(&self.data)
    }

    pub fn dot(&self, other: &FrameCoeffs) -> Result<f64> {
        self.check_shape(other)?;
        Ok(crate::volume::dot(&self.data, &other.data))
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &FrameCoeffs, beta: f64) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            grid: self.grid,
            levels: self.levels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    fn check_shape(&self, other: &FrameCoeffs) -> Result<()> {
        self.grid.ensure_same(&other.grid, "frame coefficients")?;
        if self.levels != other.levels {
            return Err(Error::GridMismatch("frame level count differs".into()));
        }
        Ok(())
    }
}

/// One periodic filtering pass along `axis`. Forward is correlation
/// `out[x] = Σ_j q[j] u[x + j·step]`; the adjoint is the matching convolution.
fn filter_axis(src: &[f64], dims: [usize; 3], axis: usize, taps: &[f64], step: usize, adjoint: bool, out: &mut [f64]) {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let offsets: Vec<(usize, f64)> = taps
        .iter()
        .enumerate()
        .map(|(j, &q)| {
            let shift = (j * step) % n;
            (if adjoint { (n - shift) % n } else { shift }, q)
        })
        .collect();
    for start in line_starts(dims, axis) {
        for p in 0..n {
            let mut acc = 0.0;
            for &(shift, q) in &offsets {
                let mut s = p + shift;
                if s >= n {
                    s -= n;
                }
                acc += q * src[start + s * stride];
            }
            out[start + p * stride] = acc;
        }
    }
}

/// Split every array in `bufs` into (low, high) along `axis`; band bit for
/// the axis becomes the high bit of the new ordinal layout.
fn split_axis(bufs: Vec<Vec<f64>>, dims: [usize; 3], axis: usize, bank: &FilterBank, step: usize) -> Vec<Vec<f64>> {
    let n = bufs[0].len();
    let mut lows = Vec::with_capacity(bufs.len());
    let mut highs = Vec::with_capacity(bufs.len());
    for b in &bufs {
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        filter_axis(b, dims, axis, bank.filter(0), step, false, &mut lo);
        filter_axis(b, dims, axis, bank.filter(1), step, false, &mut hi);
        lows.push(lo);
        highs.push(hi);
    }
    lows.extend(highs);
    lows
}

/// Inverse of [`split_axis`] layout: pairs `(b, b + half)` are merged by the adjoint filters.
fn merge_axis(bufs: Vec<Vec<f64>>, dims: [usize; 3], axis: usize, bank: &FilterBank, step: usize) -> Vec<Vec<f64>> {
    let half = bufs.len() / 2;
    let n = bufs[0].len();
    let mut tmp = vec![0.0; n];
    (0..half)
        .map(|b| {
            let mut acc = vec![0.0; n];
            filter_axis(&bufs[b], dims, axis, bank.filter(0), step, true, &mut acc);
            filter_axis(&bufs[b + half], dims, axis, bank.filter(1), step, true, &mut tmp);
            acc.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
            acc
        })
        .collect()
}

/// Analysis operator `W`.
pub fn analyze(u: &ScalarVolume, bank: &FilterBank) -> FrameCoeffs {
    let grid = *u.grid();
    let dims = grid.dims();
    let n = grid.len();
    let mut out = FrameCoeffs::zeros(grid, bank.levels);
    let mut low = u.as_slice().to_vec();
    for level in 0..bank.levels {
        let step = 1usize << level;
        let mut bufs = vec![low];
        for axis in [2, 1, 0] {
            bufs = split_axis(bufs, dims, axis, bank, step);
        }
        let bufs = reorder_from_split(bufs);
        let dst = out.high_level_mut(level);
        for b in 1..8 {
            dst[(b - 1) * n..b * n].copy_from_slice(&bufs[b]);
        }
        low = bufs.into_iter().next().expect("eight bands");
    }
    let lo = HIGH_BANDS * bank.levels * n;
    out.data[lo..].copy_from_slice(&low);
    out
}

/// After splitting along z, y, x in that order, position `p` has bits
/// `p = az + 2 ay + 4 ax`. Map to ordinal `ax + 2 ay + 4 az`.
fn reorder_from_split(bufs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut slots: Vec<Option<Vec<f64>>> = bufs.into_iter().map(Some).collect();
    (0..8)
        .map(|ord| {
            let (ax, ay, az) = (ord & 1, (ord >> 1) & 1, (ord >> 2) & 1);
            slots[az + 2 * ay + 4 * ax].take().expect("each slot used once")
        })
        .collect()
}

fn reorder_to_split(bands: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut slots: Vec<Option<Vec<f64>>> = bands.into_iter().map(Some).collect();
    (0..8)
        .map(|p| {
            let (az, ay, ax) = (p & 1, (p >> 1) & 1, (p >> 2) & 1);
            slots[ax + 2 * ay + 4 * az].take().expect("each slot used once")
        })
        .collect()
}

/// Synthesis operator `Wᵀ`, the left inverse of [`analyze`] (`WᵀW = I`).
pub fn synthesize(c: &FrameCoeffs, bank: &FilterBank) -> Result<ScalarVolume> {
    if c.levels != bank.levels {
        return Err(Error::InvalidArgument(format!(
            "coefficients have {} levels, bank has {}",
            c.levels, bank.levels
        )));
    }
    let grid = c.grid;
    let dims = grid.dims();
    let n = grid.len();
    let mut low = c.low_band().to_vec();
    for level in (0..bank.levels).rev() {
        let step = 1usize << level;
        let high = c.high_level(level);
        let mut bands = Vec::with_capacity(8);
        bands.push(low);
        for b in 1..8 {
            bands.push(high[(b - 1) * n..b * n].to_vec());
        }
        let mut bufs = reorder_to_split(bands);
        for axis in [0, 1, 2] {
            bufs = merge_axis(bufs, dims, axis, bank, step);
        }
        low = bufs.pop().expect("one merged band");
    }
    Ok(ScalarVolume::from_vec(grid, low))
}

/// Isotropic soft thresholding: per voxel and level, the 7-vector of high-pass
/// coefficients is shrunk radially by `γ_l`; the low-pass band passes through.
pub fn iso_threshold(c: &FrameCoeffs, sched: &ThresholdSchedule) -> Result<FrameCoeffs> {
    let mut out = c.clone();
    iso_threshold_in_place(&mut out, sched)?;
    Ok(out)
}

pub(crate) fn iso_threshold_in_place(c: &mut FrameCoeffs, sched: &ThresholdSchedule) -> Result<()> {
    check_schedule(c, sched)?;
    let n = c.grid.len();
    for (level, &gamma) in sched.gammas.iter().enumerate() {
        let bands = c.high_level_mut(level);
        for k in 0..n {
            let r = (0..HIGH_BANDS).map(|b| bands[b * n + k].powi(2)).sum::<f64>().sqrt();
            let scale = if r > 0.0 { (r - gamma).max(0.0) / r } else { 0.0 };
            for b in 0..HIGH_BANDS {
                bands[b * n + k] *= scale;
            }
        }
    }
    Ok(())
}

/// `Σ_k Σ_l γ_l R_l[k]`, the weighted isotropic ℓ1 norm of the high-pass bands.
pub fn iso_l12_norm(c: &FrameCoeffs, sched: &ThresholdSchedule) -> Result<f64> {
    check_schedule(c, sched)?;
    let n = c.grid.len();
    let mut total = 0.0;
    for (level, &gamma) in sched.gammas.iter().enumerate() {
        let bands = c.high_level(level);
        let mut sum = 0.0;
        for k in 0..n {
            sum += (0..HIGH_BANDS).map(|b| bands[b * n + k].powi(2)).sum::<f64>().sqrt();
        }
        total += gamma * sum;
    }
    Ok(total)
}

fn check_schedule(c: &FrameCoeffs, sched: &ThresholdSchedule) -> Result<()> {
    if sched.gammas.len() != c.levels {
        return Err(Error::InvalidArgument(format!(
            "schedule has {} thresholds for {} levels",
            sched.gammas.len(),
            c.levels
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noise(grid: GridSpec, seed: u64) -> ScalarVolume {
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        ScalarVolume::from_fn(grid, |_, _, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .unwrap()
    }

    fn frame_noise(grid: GridSpec, levels: usize, seed: u64) -> FrameCoeffs {
        let mut c = FrameCoeffs::zeros(grid, levels);
        let v = noise(GridSpec::new([grid.len(), 1 + 3, 4], [1.0; 3]).unwrap(), seed);
        let need = c.data.len();
        c.data
            .copy_from_slice(&v.as_slice().iter().cycle().take(need).copied().collect::<Vec<_>>());
        c
    }

    #[test]
    fn haar_satisfies_uep() {
        assert!(uep_deviation(&[0.5, 0.5], &[0.5, -0.5]) < 1e-15);
        assert!(FilterBank::new(vec![0.5, 0.5], vec![0.5, 0.5], 1).is_err());
        assert!(FilterBank::haar(0).is_err());
    }

    #[test]
    fn tensor_uep_on_dense_sample() {
        let bank = FilterBank::haar(1).unwrap();
        let q = [bank.low().to_vec(), bank.high().to_vec()];
        let m = 24;
        let pts: Vec<f64> = (0..m).map(|s| -PI + 2.0 * PI * s as f64 / m as f64).collect();
        for &x in &pts {
            for &y in &pts {
                for &z in &pts {
                    let xi = [x, y, z];
                    let qhat = |a: [usize; 3], xi: [f64; 3]| {
                        (0..3).map(|d| fourier_series(&q[a[d]], xi[d])).product::<Complex64>()
                    };
                    let alphas: Vec<[usize; 3]> = (0..8).map(|b| [b & 1, (b >> 1) & 1, (b >> 2) & 1]).collect();
                    let energy: f64 = alphas.iter().map(|&a| qhat(a, xi).norm_sqr()).sum();
                    assert!((energy - 1.0).abs() < 1e-12);
                    for nu in 1..8usize {
                        let shifted = [
                            x + PI * (nu & 1) as f64,
                            y + PI * ((nu >> 1) & 1) as f64,
                            z + PI * ((nu >> 2) & 1) as f64,
                        ];
                        let cross: Complex64 = alphas.iter().map(|&a| qhat(a, xi) * qhat(a, shifted).conj()).sum();
                        assert!(cross.norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn one_dimensional_haar_pass() {
        // The [1, 0] periodic signal from the Haar example, on a single line.
        let src = [1.0, 0.0];
        let (mut lo, mut hi) = ([0.0; 2], [0.0; 2]);
        filter_axis(&src, [2, 1, 1], 0, &[0.5, 0.5], 1, false, &mut lo);
        filter_axis(&src, [2, 1, 1], 0, &[0.5, -0.5], 1, false, &mut hi);
        assert_eq!(lo, [0.5, 0.5]);
        assert_eq!(hi, [0.5, -0.5]);
        let energy: f64 = lo.iter().chain(&hi).map(|v| v * v).sum();
        assert_eq!(energy, 1.0);
    }

    #[test]
    fn constant_goes_to_low_band() {
        let g = GridSpec::new([6, 5, 4], [1.0; 3]).unwrap();
        let u = ScalarVolume::constant(g, 3.25).unwrap();
        for levels in [1, 2] {
            let c = analyze(&u, &FilterBank::haar(levels).unwrap());
            assert_eq!(c.band_count(), 7 * levels + 1);
            assert!(c.low_band().iter().all(|&v| v == 3.25));
            for l in 0..levels {
                assert!(c.high_level(l).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn band_addressing() {
        let g = GridSpec::isotropic(4, 1.0).unwrap();
        let mut u = vec![0.0; 64];
        u[g.index(1, 0, 0)] = 1.0;
        let c = analyze(&ScalarVolume::new(g, u).unwrap(), &FilterBank::haar(1).unwrap());
        // Only the x-high band can see a pure x-difference at y = z = 0 lines.
        let hx = c.band(0, [1, 0, 0]).unwrap();
        assert_eq!(hx[g.index(0, 0, 0)], -0.5 * 0.25);
        assert!(c.band(0, [0, 0, 0]).is_some());
        assert!(c.band(1, [1, 0, 0]).is_none());
        assert!(c.band(0, [2, 0, 0]).is_none());
    }

    #[test]
    fn perfect_reconstruction_and_parseval() {
        for (dims, levels) in [([16, 16, 16], 1), ([12, 10, 9], 2), ([32, 32, 32], 1)] {
            let g = GridSpec::new(dims, [1.0; 3]).unwrap();
            let u = noise(g, 7);
            let bank = FilterBank::haar(levels).unwrap();
            let c = analyze(&u, &bank);
            let energy = c.norm2().powi(2);
            let un = u.norm2().powi(2);
            assert!((energy - un).abs() <= 1e-10 * un);
            let back = synthesize(&c, &bank).unwrap();
            assert!(back.combine(1.0, &u, -1.0).unwrap().norm_inf() <= 1e-12);
        }
    }

    #[test]
    fn synthesis_is_adjoint() {
        let g = GridSpec::new([8, 6, 10], [1.0; 3]).unwrap();
        for levels in [1, 2] {
            let bank = FilterBank::haar(levels).unwrap();
            let u = noise(g, 11);
            let c = frame_noise(g, levels, 12);
            let lhs = analyze(&u, &bank).dot(&c).unwrap();
            let rhs = u.dot(&synthesize(&c, &bank).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn zero_coefficients_synthesize_to_zero() {
        let g = GridSpec::isotropic(8, 1.0).unwrap();
        let bank = FilterBank::haar(2).unwrap();
        assert_eq!(synthesize(&FrameCoeffs::zeros(g, 2), &bank).unwrap().norm_inf(), 0.0);
    }

    #[test]
    fn from_bands_requires_every_band() {
        let g = GridSpec::isotropic(4, 1.0).unwrap();
        let c = analyze(&noise(g, 3), &FilterBank::haar(1).unwrap());
        let mut map = BTreeMap::new();
        for b in 0..8u8 {
            let alpha = [b & 1, (b >> 1) & 1, (b >> 2) & 1];
            map.insert(
                (0, alpha),
                ScalarVolume::new(g, c.band(0, alpha).unwrap().to_vec()).unwrap(),
            );
        }
        assert_eq!(FrameCoeffs::from_bands(g, 1, map.clone()).unwrap(), c);
        map.remove(&(0, [0, 1, 1]));
        assert!(matches!(
            FrameCoeffs::from_bands(g, 1, map),
            Err(Error::MissingBand {
                level: 0,
                band: [0, 1, 1]
            })
        ));
    }

    fn single_voxel(vals: [f64; 7], low: f64) -> FrameCoeffs {
        let g = GridSpec::isotropic(4, 1.0).unwrap();
        let mut c = FrameCoeffs::zeros(g, 1);
        let n = g.len();
        for (b, v) in vals.iter().enumerate() {
            c.data[b * n] = *v;
        }
        c.data[7 * n] = low;
        c
    }

    #[test]
    fn threshold_examples() {
        let c = single_voxel([2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 9.0);
        let zero = ThresholdSchedule::new(vec![0.0]).unwrap();
        assert_eq!(iso_threshold(&c, &zero).unwrap(), c);

        let half = ThresholdSchedule::new(vec![0.5]).unwrap();
        let t = iso_threshold(&c, &half).unwrap();
        assert_eq!(t.data[0], 1.5);
        assert_eq!(t.low_band(), c.low_band());

        let small = single_voxel([0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0);
        let t = iso_threshold(&small, &half).unwrap();
        assert!(t.high_level(0).iter().all(|&v| v == 0.0));
        assert!(iso_threshold(&c, &ThresholdSchedule::new(vec![0.5, 0.2]).unwrap()).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = GridSpec::isotropic(4, 1.0).unwrap();
        let one = ThresholdSchedule::new(vec![1.0]).unwrap();
        assert_eq!(iso_l12_norm(&FrameCoeffs::zeros(g, 1), &one).unwrap(), 0.0);
        let c = single_voxel([3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0], 100.0);
        assert_eq!(iso_l12_norm(&c, &one).unwrap(), 5.0);
        let two = ThresholdSchedule::new(vec![2.0]).unwrap();
        assert_eq!(iso_l12_norm(&c, &two).unwrap(), 10.0);
        assert_eq!(
            ThresholdSchedule::from_nu(0.004, 3).unwrap().gammas(),
            &[0.004, 0.002, 0.001]
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn threshold_is_nonexpansive(s1 in any::<u64>(), s2 in any::<u64>(), gamma in 0.0f64..1.5) {
            let g = GridSpec::new([4, 4, 5], [1.0; 3]).unwrap();
            let sched = ThresholdSchedule::from_nu(gamma, 2).unwrap();
            let (a, b) = (frame_noise(g, 2, s1), frame_noise(g, 2, s2));
            let ta = iso_threshold(&a, &sched).unwrap();
            let tb = iso_threshold(&b, &sched).unwrap();
            let lhs = ta.combine(1.0, &tb, -1.0).unwrap().norm2();
            let rhs = a.combine(1.0, &b, -1.0).unwrap().norm2();
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn threshold_is_prox_of_norm(seed in any::<u64>(), gamma in 0.01f64..1.5) {
            // Optimality of d = T(z) for min ‖γ·d‖ + ½‖d − z‖²:
            // z − d = γ d/|d| where d ≠ 0, and |z| ≤ γ where d = 0.
            let g = GridSpec::new([4, 4, 4], [1.0; 3]).unwrap();
            let sched = ThresholdSchedule::from_nu(gamma, 2).unwrap();
            let z = frame_noise(g, 2, seed);
            let d = iso_threshold(&z, &sched).unwrap();
            let n = g.len();
            for l in 0..2 {
                let gl = sched.gammas()[l];
                let (zb, db) = (z.high_level(l), d.high_level(l));
                for k in 0..n {
                    let rd = (0..7).map(|b| db[b * n + k].powi(2)).sum::<f64>().sqrt();
                    if rd > 0.0 {
                        for b in 0..7 {
                            let resid = zb[b * n + k] - db[b * n + k] - gl * db[b * n + k] / rd;
                            prop_assert!(resid.abs() < 1e-8);
                        }
                    } else {
                        let rz = (0..7).map(|b| zb[b * n + k].powi(2)).sum::<f64>().sqrt();
                        prop_assert!(rz <= gl + 1e-8);
                    }
                }
            }
            prop_assert_eq!(d.low_band(), z.low_band());
        }

        #[test]
        fn norm_is_positively_homogeneous(seed in any::<u64>(), t in 0.0f64..10.0) {
            let g = GridSpec::new([4, 4, 4], [1.0; 3]).unwrap();
            let sched = ThresholdSchedule::from_nu(0.3, 1).unwrap();
            let c = frame_noise(g, 1, seed);
            let scaled = c.combine(t, &c, 0.0).unwrap();
            let a = iso_l12_norm(&scaled, &sched).unwrap();
            let b = t * iso_l12_norm(&c, &sched).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }
    }
}
