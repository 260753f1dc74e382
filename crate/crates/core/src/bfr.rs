//! Laplacian boundary value background removal and the harmonic
//! incompatibility report.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spectral::neglap_stencil;
use crate::volume::{band_mask, RoiMask, ScalarVolume};

pub const DEFAULT_LBV_TOL: f64 = 1e-8;
/// Band width whose complement inside Ω is the "far interior".
pub const FAR_INTERIOR_BAND: usize = 4;

/// `max(500, ⌈10 √n⌉)`.
pub fn default_max_iter(unknowns: usize) -> usize {
    ((10.0 * (unknowns as f64).sqrt()).ceil() as usize).max(500)
}

/// 7-point `−Δ` restricted to the interior voxels, zero Dirichlet elsewhere.
struct InteriorLaplacian {
    /// Linear grid index of each unknown.
    cells: Vec<usize>,
    /// Unknown index of each of the six neighbours, `None` for Dirichlet nodes.
    neighbours: Vec<[Option<usize>; 6]>,
    weights: [f64; 3],
    diagonal: f64,
}

impl InteriorLaplacian {
    fn new(roi: &RoiMask) -> Self {
        let grid = *roi.grid();
        let interior = roi.interior();
        let cells: Vec<usize> = (0..grid.len()).filter(|&v| interior.as_slice()[v]).collect();
        let mut slot = vec![usize::MAX; grid.len()];
        for (u, &v) in cells.iter().enumerate() {
            slot[v] = u;
        }
        let [n1, n2, _] = grid.dims();
        let strides = [1, n1, n1 * n2];
        // Interior voxels never touch the grid edge, so ±stride stays in range.
        let neighbours = cells
            .iter()
            .map(|&v| {
                let mut nb = [None; 6];
                for axis in 0..3 {
                    for (side, idx) in [v - strides[axis], v + strides[axis]].into_iter().enumerate() {
                        nb[2 * axis + side] = (slot[idx] != usize::MAX).then_some(slot[idx]);
                    }
                }
                nb
            })
            .collect();
        let h = grid.spacing();
        let weights = [1.0 / (h[0] * h[0]), 1.0 / (h[1] * h[1]), 1.0 / (h[2] * h[2])];
        let diagonal = 2.0 * weights.iter().sum::<f64>();
        Self {
            cells,
            neighbours,
            weights,
            diagonal,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (u, nb) in self.neighbours.iter().enumerate() {
            let mut acc = self.diagonal * x[u];
            for (t, n) in nb.iter().enumerate() {
                if let Some(m) = n {
                    acc -= self.weights[t / 2] * x[*m];
                }
            }
            out[u] = acc;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `−Δ b_l = −Δ b` on the interior voxels of Ω with `b_l = 0` on ∂Ω and
/// outside, by conjugate gradient to relative residual `tol`. `max_iter`
/// defaults to [`default_max_iter`].
pub fn lbv_solve(b_total: &ScalarVolume, roi: &RoiMask, tol: f64, max_iter: Option<usize>) -> Result<ScalarVolume> {
    b_total.grid().ensure_same(roi.grid(), "LBV")?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "LBV tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let op = InteriorLaplacian::new(roi);
    let n = op.cells.len();
    if n == 0 {
        return Err(Error::NoInterior);
    }
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(n));
    let lap = neglap_stencil(b_total);
    let rhs: Vec<f64> = op.cells.iter().map(|&v| lap.as_slice()[v]).collect();
    let scatter = |x: &[f64]| {
        let mut full = vec![0.0; roi.grid().len()];
        for (u, &v) in op.cells.iter().enumerate() {
            full[v] = x[u];
        }
        ScalarVolume::from_vec(*roi.grid(), full)
    };

    let rhs_norm = dot(&rhs, &rhs).sqrt();
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(scatter(&x));
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let target = tol * rhs_norm;
    for _ in 0..max_iter {
        if rr.sqrt() <= target {
            return Ok(scatter(&x));
        }
        op.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    // Report the true residual of the returned iterate.
    op.apply(&x, &mut ap);
    let residual = rhs.iter().zip(&ap).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt() / rhs_norm;
    if residual <= tol {
        return Ok(scatter(&x));
    }
    Err(Error::MaxIterExceeded {
        iterations: max_iter,
        residual,
        last: Box::new(scatter(&x)),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncompReport {
    /// `v = b_l − b̃_l`.
    pub v: ScalarVolume,
    pub neglap_v: ScalarVolume,
    /// Share of `‖ℒv‖₁` inside `band_mask(roi, k)`, keyed by `k`.
    pub band_mass_fraction: BTreeMap<usize, f64>,
    /// Share of `‖ℒv‖₁` in Ω outside `band_mask(roi, FAR_INTERIOR_BAND)`.
    pub far_interior_fraction: f64,
    pub v_norm2: f64,
    pub neglap_v_norm1: f64,
}

/// Harmonic incompatibility `v = b_l − b̃_l` and where its Laplacian lives.
/// With zero total mass every fraction is reported as 1.
pub fn analyze_incompatibility(
    b_l: &ScalarVolume,
    b_true_local: &ScalarVolume,
    roi: &RoiMask,
    bands: &[usize],
) -> Result<IncompReport> {
    b_l.grid().ensure_same(b_true_local.grid(), "incompatibility fields")?;
    b_l.grid().ensure_same(roi.grid(), "incompatibility mask")?;
    let v = b_l.combine(1.0, b_true_local, -1.0)?;
    let neglap_v = neglap_stencil(&v);
    let total: f64 = neglap_v.as_slice().iter().map(|x| x.abs()).sum();
    let mass_in = |mask: &RoiMask| -> f64 {
        if total == 0.0 {
            return 1.0;
        }
        let inside: f64 = neglap_v
            .as_slice()
            .iter()
            .zip(mask.as_slice())
            .filter(|(_, &m)| m)
            .map(|(x, _)| x.abs())
            .sum();
        inside / total
    };
    let band_mass_fraction = bands.iter().map(|&k| (k, mass_in(&band_mask(roi, k)))).collect();
    let far = roi.intersection(&band_mask(roi, FAR_INTERIOR_BAND).complement())?;
    let far_interior_fraction = if total == 0.0 { 0.0 } else { mass_in(&far) };
    Ok(IncompReport {
        v_norm2: v.norm2(),
        v,
        neglap_v,
        band_mass_fraction,
        far_interior_fraction,
        neglap_v_norm1: total,
    })
}
