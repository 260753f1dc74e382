//! Relative error and 3D SSIM over the region of interest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{line_starts, RoiMask, ScalarVolume};

/// `‖1_Ω(χ − χ*)‖₂ / ‖1_Ω χ*‖₂`.
pub fn rmse_rel(chi: &ScalarVolume, chi_true: &ScalarVolume, roi: &RoiMask) -> Result<f64> {
    chi.grid().ensure_same(chi_true.grid(), "rmse")?;
    chi.grid().ensure_same(roi.grid(), "rmse mask")?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&a, &b), &m) in chi.as_slice().iter().zip(chi_true.as_slice()).zip(roi.as_slice()) {
        if m {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Gaussian window standard deviation, voxels.
    pub sigma: f64,
    /// Window half-width, voxels; 5 gives an 11³ window.
    pub radius: usize,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            sigma: 1.5,
            radius: 5,
        }
    }
}

/// Separable truncated Gaussian, renormalised where the window leaves the grid.
fn gaussian_blur(u: &[f64], dims: [usize; 3], params: &SsimParams) -> Vec<f64> {
    let r = params.radius as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|t| (-(t * t) as f64 / (2.0 * params.sigma * params.sigma)).exp())
        .collect();
    let mut cur = u.to_vec();
    for axis in 0..3 {
        let n = dims[axis] as i64;
        let stride = [1, dims[0], dims[0] * dims[1]][axis];
        let mut out = vec![0.0; cur.len()];
        for start in line_starts(dims, axis) {
            for p in 0..n {
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (t, w) in taps.iter().enumerate() {
                    let q = p + t as i64 - r;
                    if (0..n).contains(&q) {
                        acc += w * cur[start + q as usize * stride];
                        wsum += w;
                    }
                }
                out[start + p as usize * stride] = acc / wsum;
            }
        }
        cur = out;
    }
    cur
}

/// Mean over Ω of the local SSIM map with a Gaussian window. The dynamic
/// range `L` is `max − min` of `χ*` over Ω.
pub fn ssim3d(chi: &ScalarVolume, chi_true: &ScalarVolume, roi: &RoiMask, params: &SsimParams) -> Result<f64> {
    chi.grid().ensure_same(chi_true.grid(), "ssim")?;
    chi.grid().ensure_same(roi.grid(), "ssim mask")?;
    if roi.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let (lo, hi) = chi_true
        .as_slice()
        .iter()
        .zip(roi.as_slice())
        .filter(|(_, &m)| m)
        .fold((f64::MAX, f64::MIN), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::DegenerateRange);
    }
    let c1 = (params.k1 * range).powi(2);
    let c2 = (params.k2 * range).powi(2);
    let dims = chi.grid().dims();
    let (x, y) = (chi.as_slice(), chi_true.as_slice());
    let blur = |v: Vec<f64>| gaussian_blur(&v, dims, params);
    let mx = blur(x.to_vec());
    let my = blur(y.to_vec());
    let mxx = blur(x.iter().map(|a| a * a).collect());
    let myy = blur(y.iter().map(|a| a * a).collect());
    let mxy = blur(x.iter().zip(y).map(|(a, b)| a * b).collect());
    let (mut total, mut count) = (0.0, 0usize);
    for i in 0..x.len() {
        if !roi.as_slice()[i] {
            continue;
        }
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cov = mxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        count += 1;
    }
    Ok(total / count as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub ssim: f64,
    pub roi_voxels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

/// Scores `chi` against `chi_true`. Both are restricted to Ω before the SSIM
/// windows are taken, so exterior content cannot leak into boundary windows.
pub fn evaluate(chi: &ScalarVolume, chi_true: &ScalarVolume, roi: &RoiMask) -> Result<EvalReport> {
    Ok(EvalReport {
        rmse: rmse_rel(chi, chi_true, roi)?,
        ssim: ssim3d(&chi.masked(roi)?, &chi_true.masked(roi)?, roi, &SsimParams::default())?,
        roi_voxels: roi.count(),
        wall_time_seconds: None,
    })
}
