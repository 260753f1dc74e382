//! Ellipsoid phantoms with exterior background sources, the total field they
//! induce, and the true local field of the susceptibility inside the ROI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{apply_symbol, dipole_symbol, ConvPolicy};
use crate::volume::{GridSpec, RoiMask, ScalarVolume};

/// Padding factor for every free-space convolution in the simulator.
pub const PAD_FACTOR: usize = 2;

const DEFAULT_SCENE: &str = include_str!("../../data/default_scene.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    /// Millimeters.
    pub center: [f64; 3],
    /// Millimeters.
    pub semi_axes: [f64; 3],
    /// ppm.
    pub chi: f64,
}

impl EllipsoidSpec {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|i| ((p[i] - self.center[i]) / self.semi_axes[i]).powi(2))
            .sum::<f64>()
            <= 1.0
    }

    fn validate(&self, what: &str) -> Result<()> {
        let finite = self.center.iter().chain(&self.semi_axes).all(|v| v.is_finite()) && self.chi.is_finite();
        if !finite {
            return Err(Error::InvalidScene(format!("{what}: non-finite value")));
        }
        if self.semi_axes.iter().any(|&a| a <= 0.0) {
            return Err(Error::InvalidScene(format!("{what}: semi-axes must be positive")));
        }
        Ok(())
    }

    /// Weights and target of `f(u) = Σ w_i (u_i − t_i)²`, the value of `other`'s
    /// quadratic form `Σ ((x − c)/a)²` at `x = center + semi_axes ∘ u`.
    fn form_in(&self, other: &EllipsoidSpec) -> ([f64; 3], [f64; 3]) {
        let w = std::array::from_fn(|i| (self.semi_axes[i] / other.semi_axes[i]).powi(2));
        let t = std::array::from_fn(|i| (other.center[i] - self.center[i]) / self.semi_axes[i]);
        (w, t)
    }
}

/// `min_{|u| ≤ 1} Σ w_i (u_i − t_i)²`: projection onto the unit ball in the `w` metric.
fn min_over_ball(w: [f64; 3], t: [f64; 3]) -> f64 {
    let f = |u: [f64; 3]| (0..3).map(|i| w[i] * (u[i] - t[i]).powi(2)).sum::<f64>();
    if t.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
        return 0.0;
    }
    // Stationarity gives u_i = w_i t_i / (w_i + μ); |u(μ)| decreases in μ.
    let u_of = |mu: f64| -> [f64; 3] { std::array::from_fn(|i| w[i] * t[i] / (w[i] + mu)) };
    let norm2 = |u: [f64; 3]| u.iter().map(|v| v * v).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while norm2(u_of(hi)) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm2(u_of(mid)) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    f(u_of(hi))
}

/// `max_{|u| ≤ 1} Σ w_i (u_i − t_i)²`, a trust-region maximisation that
/// handles the degenerate case where `t` is orthogonal to the top eigenspace.
fn max_over_ball(w: [f64; 3], t: [f64; 3]) -> f64 {
    let f = |u: [f64; 3]| (0..3).map(|i| w[i] * (u[i] - t[i]).powi(2)).sum::<f64>();
    let wmax = w.iter().cloned().fold(f64::MIN, f64::max);
    let top: Vec<usize> = (0..3).filter(|&i| w[i] >= wmax * (1.0 - 1e-14)).collect();
    // Maximisers lie on the sphere with u_i = w_i t_i / (w_i − μ), μ ≥ wmax.
    let u_of =
        |mu: f64| -> [f64; 3] { std::array::from_fn(|i| if mu == w[i] { 0.0 } else { w[i] * t[i] / (w[i] - mu) }) };
    let norm2 = |u: [f64; 3]| u.iter().map(|v| v * v).sum::<f64>();
    if top.iter().all(|&i| t[i] == 0.0) {
        let mut u = u_of(wmax);
        let rest = norm2(u);
        if rest <= 1.0 {
            // Fill the free top-eigenspace direction; either sign gives the same value.
            u[top[0]] = (1.0 - rest).sqrt();
            return f(u);
        }
    }
    let (mut lo, mut hi) = (wmax, wmax + 1.0);
    let bound: f64 = (0..3).map(|i| (w[i] * t[i]).abs()).sum();
    hi += bound;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm2(u_of(mid)) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    f(u_of(hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomScene {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub roi_shape: EllipsoidSpec,
    #[serde(default)]
    pub interior: Vec<EllipsoidSpec>,
    #[serde(default)]
    pub exterior: Vec<EllipsoidSpec>,
    pub magnitude_inside: f64,
}

impl PhantomScene {
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: PhantomScene =
            serde_json::from_str(text).map_err(|e| Error::InvalidScene(format!("malformed scene: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialises")
    }

    /// Interior ellipsoids inside the ROI, exterior ones disjoint from it.
    pub fn validate(&self) -> Result<()> {
        self.roi_shape.validate("roi_shape")?;
        if !(self.magnitude_inside.is_finite() && self.magnitude_inside > 0.0) {
            return Err(Error::InvalidScene("magnitude_inside must be positive".into()));
        }
        for (n, e) in self.interior.iter().enumerate() {
            e.validate(&format!("interior[{n}]"))?;
            let (w, t) = e.form_in(&self.roi_shape);
            if max_over_ball(w, t) > 1.0 + 1e-12 {
                return Err(Error::InvalidScene(format!("interior[{n}] is not inside the ROI")));
            }
        }
        for (n, e) in self.exterior.iter().enumerate() {
            e.validate(&format!("exterior[{n}]"))?;
            let (w, t) = e.form_in(&self.roi_shape);
            if min_over_ball(w, t) <= 1.0 {
                return Err(Error::InvalidScene(format!("exterior[{n}] intersects the ROI")));
            }
        }
        Ok(())
    }
}

/// The shipped 64³ scene.
pub fn default_scene() -> PhantomScene {
    PhantomScene::from_json(DEFAULT_SCENE).expect("shipped scene is valid")
}

/// Grid the default scene is designed for.
pub fn default_grid() -> GridSpec {
    GridSpec::isotropic(64, 1.0).expect("valid grid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rasterized {
    /// ppm.
    pub chi: ScalarVolume,
    pub roi: RoiMask,
    pub magnitude: ScalarVolume,
}

/// Sample the scene at voxel centers `((i + ½) h1, …)`; later ellipsoids win.
pub fn rasterize(scene: &PhantomScene, grid: &GridSpec) -> Result<Rasterized> {
    scene.validate()?;
    let h = grid.spacing();
    let center = |i: usize, j: usize, k: usize| {
        [
            (i as f64 + 0.5) * h[0],
            (j as f64 + 0.5) * h[1],
            (k as f64 + 0.5) * h[2],
        ]
    };
    let roi = RoiMask::from_fn(*grid, |i, j, k| scene.roi_shape.contains(center(i, j, k)));
    if roi.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let layers: Vec<&EllipsoidSpec> = std::iter::once(&scene.roi_shape)
        .chain(&scene.interior)
        .chain(&scene.exterior)
        .collect();
    let chi = ScalarVolume::from_fn(*grid, |i, j, k| {
        let p = center(i, j, k);
        layers.iter().rev().find(|e| e.contains(p)).map_or(0.0, |e| e.chi)
    })?;
    let magnitude = roi.indicator().scale(scene.magnitude_inside);
    Ok(Rasterized { chi, roi, magnitude })
}

/// Total field `b = d ∗ χ` by zero-padded ×2 spectral convolution.
/// Dimensionless in, dimensionless out.
pub fn simulate_total_field(chi: &ScalarVolume) -> Result<ScalarVolume> {
    let padded = chi.grid().scaled(PAD_FACTOR)?;
    apply_symbol(
        &dipole_symbol(&padded),
        chi,
        ConvPolicy::ZeroPadded { factor: PAD_FACTOR },
    )
}

/// Field induced by the susceptibility inside Ω only, `d ∗ (1_Ω χ)` with the
/// same padded convolution as the total field. This is `Φ ∗ 1_Ω P(D) χ`
/// whenever χ vanishes near ∂Ω.
pub fn true_local_field(chi: &ScalarVolume, roi: &RoiMask) -> Result<ScalarVolume> {
    simulate_total_field(&chi.masked(roi)?)
}
