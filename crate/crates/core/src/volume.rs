//! Dense 3D volumes on a regular, physically spaced grid.
//!
//! All arrays use one linear layout: x fastest, then y, then z, so voxel
//! `(i, j, k)` lives at `i + n1 * (j + n2 * k)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible extent along any axis.
pub const MIN_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dims: [usize; 3],
    /// Voxel spacing in millimetres.
    spacing: [f64; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if let Some(d) = dims.iter().find(|&&d| d < MIN_DIM) {
            return Err(Error::InvalidGrid(format!(
                "every extent must be at least {MIN_DIM}, got {d}"
            )));
        }
        if let Some(h) = spacing.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive and finite, got {h}"
            )));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= isize::MAX as usize / 16)
            .ok_or_else(|| Error::InvalidGrid("voxel count overflows the address space".into()))?;
        Ok(Self { dims, spacing })
    }

    pub fn isotropic(n: usize, h: f64) -> Result<Self> {
        Self::new([n; 3], [h; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let [n1, n2, _] = self.dims;
        [idx % n1, (idx / n1) % n2, idx / (n1 * n2)]
    }

    /// Same spacing, every extent multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Result<Self> {
        let d = self.dims;
        Self::new([d[0] * factor, d[1] * factor, d[2] * factor], self.spacing)
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {:?}/{:?} vs {:?}/{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Real-valued field sampled on a [`GridSpec`]. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarVolume {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, data })
    }

    /// Skips the finiteness scan; callers produce data from finite inputs.
    pub(crate) fn from_vec(grid: GridSpec, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_vec(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: GridSpec, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let [n1, n2, n3] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &ScalarVolume) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "dot product")?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_vec(self.grid, self.data.iter().map(|v| alpha * v).collect())
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &ScalarVolume, beta: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "linear combination")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self::from_vec(self.grid, data))
    }

    /// Zero outside the mask.
    pub fn masked(&self, mask: &RoiMask) -> Result<Self> {
        self.grid.ensure_same(mask.grid(), "mask")?;
        let data = self
            .data
            .iter()
            .zip(&mask.member)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect();
        Ok(Self::from_vec(self.grid, data))
    }
}

/// Complex field, e.g. a gradient-echo signal, in the same layout as [`ScalarVolume`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume {
    grid: GridSpec,
    data: Vec<Complex64>,
}

impl ComplexVolume {
    pub fn new(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, data })
    }

    pub(crate) fn from_vec(grid: GridSpec, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn real(&self) -> ScalarVolume {
        ScalarVolume::from_vec(self.grid, self.data.iter().map(|c| c.re).collect())
    }

    pub fn imag(&self) -> ScalarVolume {
        ScalarVolume::from_vec(self.grid, self.data.iter().map(|c| c.im).collect())
    }
}

/// Binary region of interest. `true` marks voxels inside the region.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiMask {
    grid: GridSpec,
    member: Vec<bool>,
}

impl RoiMask {
    pub fn new(grid: GridSpec, member: Vec<bool>) -> Result<Self> {
        if member.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: member.len(),
            });
        }
        Ok(Self { grid, member })
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            member: vec![false; grid.len()],
        }
    }

    pub fn full(grid: GridSpec) -> Self {
        Self {
            grid,
            member: vec![true; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let [n1, n2, n3] = grid.dims();
        let mut member = Vec::with_capacity(grid.len());
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    member.push(f(i, j, k));
                }
            }
        }
        Self { grid, member }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.member
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        self.member[self.grid.index(i, j, k)]
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.member.iter().any(|&m| m)
    }

    pub fn is_subset_of(&self, other: &RoiMask) -> bool {
        self.grid == other.grid && self.member.iter().zip(&other.member).all(|(&a, &b)| !a || b)
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            member: self.member.iter().map(|m| !m).collect(),
        }
    }

    pub fn intersection(&self, other: &RoiMask) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "mask intersection")?;
        let member = self.member.iter().zip(&other.member).map(|(&a, &b)| a && b).collect();
        Ok(Self {
            grid: self.grid,
            member,
        })
    }

    /// `1.0` inside, `0.0` outside.
    pub fn indicator(&self) -> ScalarVolume {
        ScalarVolume::from_vec(
            self.grid,
            self.member.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// Region voxels whose six face neighbours all lie inside the region.
    pub fn interior(&self) -> Self {
        let boundary = boundary_set(self);
        let member = self
            .member
            .iter()
            .zip(&boundary.member)
            .map(|(&m, &b)| m && !b)
            .collect();
        Self {
            grid: self.grid,
            member,
        }
    }
}

/// Voxels of the region with at least one 6-neighbour outside it. The grid
/// edge counts as outside.
pub fn boundary_set(mask: &RoiMask) -> RoiMask {
    let grid = mask.grid;
    let [n1, n2, n3] = grid.dims();
    let inside = |i: usize, j: usize, k: usize| mask.member[grid.index(i, j, k)];
    RoiMask::from_fn(grid, |i, j, k| {
        if !inside(i, j, k) {
            return false;
        }
        if i == 0 || j == 0 || k == 0 || i + 1 == n1 || j + 1 == n2 || k + 1 == n3 {
            return true;
        }
        !(inside(i - 1, j, k)
            && inside(i + 1, j, k)
            && inside(i, j - 1, k)
            && inside(i, j + 1, k)
            && inside(i, j, k - 1)
            && inside(i, j, k + 1))
    })
}

/// Voxels within Chebyshev distance `k` of the region boundary, on either side.
pub fn band_mask(mask: &RoiMask, k: usize) -> RoiMask {
    let mut member = boundary_set(mask).member;
    if k == 0 {
        return RoiMask {
            grid: mask.grid,
            member,
        };
    }
    // The Chebyshev ball is a cube, so dilation separates into three 1D passes.
    let dims = mask.grid.dims();
    for axis in 0..3 {
        member = dilate_axis(&member, dims, axis, k);
    }
    RoiMask {
        grid: mask.grid,
        member,
    }
}

fn dilate_axis(src: &[bool], dims: [usize; 3], axis: usize, radius: usize) -> Vec<bool> {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut out = vec![false; src.len()];
    for start in line_starts(dims, axis) {
        // Sliding count of set voxels in [p - radius, p + radius].
        let at = |p: usize| src[start + p * stride];
        let mut count = (0..=radius.min(n - 1)).filter(|&p| at(p)).count();
        for p in 0..n {
            out[start + p * stride] = count > 0;
            if p >= radius && at(p - radius) {
                count -= 1;
            }
            if p + radius + 1 < n && at(p + radius + 1) {
                count += 1;
            }
        }
    }
    out
}

/// Linear index of the first voxel of every grid line along `axis`.
pub(crate) fn line_starts(dims: [usize; 3], axis: usize) -> impl Iterator<Item = usize> {
    let [n1, n2, n3] = dims;
    let (outer, inner): (usize, usize) = match axis {
        0 => (n3, n2),
        1 => (n3, n1),
        _ => (n2, n1),
    };
    (0..outer).flat_map(move |o| {
        (0..inner).map(move |q| match axis {
            0 => n1 * (q + n2 * o),
            1 => q + n1 * n2 * o,
            _ => q + n1 * o,
        })
    })
}

/// Embed `vol` at the low-index corner of a grid `factor` times larger, zero elsewhere.
pub fn pad_zero(vol: &ScalarVolume, factor: usize) -> Result<ScalarVolume> {
    if factor == 0 {
        return Err(Error::InvalidArgument("padding factor must be at least 1".into()));
    }
    let big = vol.grid.scaled(factor)?;
    let [n1, n2, n3] = vol.grid.dims();
    let mut data = vec![0.0; big.len()];
    for k in 0..n3 {
        for j in 0..n2 {
            let src = vol.grid.index(0, j, k);
            let dst = big.index(0, j, k);
            data[dst..dst + n1].copy_from_slice(&vol.data[src..src + n1]);
        }
    }
    Ok(ScalarVolume::from_vec(big, data))
}

/// Extract the low-index corner region with the extents of `target`.
/// Left inverse of [`pad_zero`].
pub fn crop_corner(vol: &ScalarVolume, target: &GridSpec) -> Result<ScalarVolume> {
    let src = vol.grid.dims();
    let [n1, n2, n3] = target.dims();
    if n1 > src[0] || n2 > src[1] || n3 > src[2] {
        return Err(Error::GridMismatch(format!(
            "crop target {:?} exceeds source {:?}",
            target.dims(),
            src
        )));
    }
    if target.spacing() != vol.grid.spacing() {
        return Err(Error::GridMismatch("crop target has different spacing".into()));
    }
    let mut data = Vec::with_capacity(target.len());
    for k in 0..n3 {
        for j in 0..n2 {
            let s = vol.grid.index(0, j, k);
            data.extend_from_slice(&vol.data[s..s + n1]);
        }
    }
    Ok(ScalarVolume::from_vec(*target, data))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::isotropic(n, 1.0).unwrap()
    }

    fn centered_cube(n: usize, half: usize) -> RoiMask {
        let c = n / 2;
        RoiMask::from_fn(grid(n), |i, j, k| {
            [i, j, k].iter().all(|&x| x + half >= c && x <= c + half)
        })
    }

    #[test]
    fn grid_rejects_small_or_bad_spacing() {
        assert!(GridSpec::new([3, 8, 8], [1.0; 3]).is_err());
        assert!(GridSpec::new([8; 3], [1.0, 0.0, 1.0]).is_err());
        assert!(GridSpec::new([8; 3], [1.0, f64::NAN, 1.0]).is_err());
        assert!(GridSpec::new([usize::MAX / 2, 8, 8], [1.0; 3]).is_err());
    }

    #[test]
    fn volume_rejects_non_finite() {
        let g = grid(4);
        let mut data = vec![0.0; 64];
        data[5] = f64::INFINITY;
        assert!(matches!(ScalarVolume::new(g, data), Err(Error::NonFinite { index: 5 })));
        assert!(ScalarVolume::new(g, vec![0.0; 63]).is_err());
    }

    #[test]
    fn index_and_coords_agree() {
        let g = GridSpec::new([4, 5, 6], [1.0; 3]).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 4);
        assert_eq!(g.index(0, 0, 1), 20);
    }

    #[test]
    fn boundary_of_empty_is_empty() {
        assert!(boundary_set(&RoiMask::empty(grid(8))).is_empty());
    }

    #[test]
    fn boundary_of_full_grid_is_outer_shell() {
        let b = boundary_set(&RoiMask::full(grid(8)));
        assert_eq!(b.count(), 8 * 8 * 8 - 6 * 6 * 6);
        assert_eq!(b.count(), 296);
    }

    #[test]
    fn boundary_of_small_cube_excludes_only_center() {
        let cube = centered_cube(8, 1);
        assert_eq!(cube.count(), 27);
        let b = boundary_set(&cube);
        assert_eq!(b.count(), 26);
        assert!(!b.contains(4, 4, 4));
        assert_eq!(cube.interior().count(), 1);
    }

    fn ball(n: usize, r: f64) -> RoiMask {
        let c = n as f64 / 2.0;
        RoiMask::from_fn(grid(n), |i, j, k| {
            let d2 = [i, j, k].iter().map(|&x| (x as f64 + 0.5 - c).powi(2)).sum::<f64>();
            d2 <= r * r
        })
    }

    fn brute_band(mask: &RoiMask, k: usize) -> RoiMask {
        let g = *mask.grid();
        let b = boundary_set(mask);
        let pts: Vec<[usize; 3]> = (0..g.len()).filter(|&i| b.as_slice()[i]).map(|i| g.coords(i)).collect();
        RoiMask::from_fn(g, |i, j, kk| {
            pts.iter().any(|p| {
                let d = [i.abs_diff(p[0]), j.abs_diff(p[1]), kk.abs_diff(p[2])];
                d.into_iter().max().unwrap() <= k
            })
        })
    }

    #[test]
    fn band_zero_is_boundary() {
        let m = ball(16, 5.0);
        assert_eq!(band_mask(&m, 0), boundary_set(&m));
        assert!(band_mask(&RoiMask::empty(grid(8)), 3).is_empty());
    }

    #[test]
    fn band_matches_brute_force_on_ball() {
        let m = ball(32, 10.0);
        let fast = band_mask(&m, 2);
        let slow = brute_band(&m, 2);
        assert_eq!(fast.count(), slow.count());
        assert_eq!(fast, slow);
    }

    #[test]
    fn pad_crop_inverse() {
        let g = GridSpec::new([4, 5, 6], [1.0, 2.0, 0.5]).unwrap();
        let u = ScalarVolume::from_fn(g, |i, j, k| (i * 31 + j * 7 + k) as f64 * 0.1 - 3.0).unwrap();
        let p = pad_zero(&u, 2).unwrap();
        assert_eq!(p.grid().dims(), [8, 10, 12]);
        assert_eq!(p.sum(), u.sum());
        assert_eq!(crop_corner(&p, &g).unwrap(), u);
        assert_eq!(pad_zero(&ScalarVolume::zeros(g), 3).unwrap().norm_inf(), 0.0);
        assert!(crop_corner(&u, &p.grid().clone()).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = RoiMask> {
        (4usize..10, 4usize..10, 4usize..10)
            .prop_flat_map(|(a, b, c)| {
                proptest::collection::vec(any::<bool>(), a * b * c).prop_map(move |m| (a, b, c, m))
            })
            .prop_map(|(a, b, c, m)| RoiMask::new(GridSpec::new([a, b, c], [1.0; 3]).unwrap(), m).unwrap())
    }

    proptest! {
        #[test]
        fn boundary_is_subset_and_excludes_interior(m in arb_mask()) {
            let b = boundary_set(&m);
            prop_assert!(b.is_subset_of(&m));
            let g = *m.grid();
            let [n1, n2, n3] = g.dims();
            for idx in 0..g.len() {
                let [i, j, k] = g.coords(idx);
                if !m.as_slice()[idx] { continue; }
                let edge = i == 0 || j == 0 || k == 0 || i + 1 == n1 || j + 1 == n2 || k + 1 == n3;
                let all_in = !edge && m.contains(i - 1, j, k) && m.contains(i + 1, j, k)
                    && m.contains(i, j - 1, k) && m.contains(i, j + 1, k)
                    && m.contains(i, j, k - 1) && m.contains(i, j, k + 1);
                prop_assert_eq!(b.as_slice()[idx], !all_in);
            }
        }

        #[test]
        fn band_is_monotone_and_matches_brute(m in arb_mask(), k in 0usize..4) {
            let a = band_mask(&m, k);
            prop_assert!(a.is_subset_of(&band_mask(&m, k + 1)));
            prop_assert_eq!(a, brute_band(&m, k));
        }
    }
}
