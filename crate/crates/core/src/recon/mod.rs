//! Dipole inversion: TKD, Tikhonov, and the split Bregman family
//! (Frame-Int, Frame-Diff, Frame-HIRE).

mod bregman;
mod direct;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{RoiMask, ScalarVolume};

pub use bregman::{frame_diff, frame_int, run_split_bregman, SolverState, SplitBregman};
pub use direct::{tikhonov, tkd};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tkd,
    Tikhonov,
    FrameInt,
    FrameDiff,
    FrameHire,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Tkd,
        Method::Tikhonov,
        Method::FrameInt,
        Method::FrameDiff,
        Method::FrameHire,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Tkd => "tkd",
            Method::Tikhonov => "tikhonov",
            Method::FrameInt => "frame_int",
            Method::FrameDiff => "frame_diff",
            Method::FrameHire => "frame_hire",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, Method::FrameInt | Method::FrameDiff | Method::FrameHire)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaPolicy {
    #[default]
    Ones,
    Roi,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub method: Method,
    pub hbar: f64,
    pub eps: f64,
    pub nu: f64,
    pub lambda: f64,
    pub beta: f64,
    pub levels: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub sigma_policy: SigmaPolicy,
}

impl ReconConfig {
    /// ħ = 0.125, ε = 0.01, ν = 5e-4 (4e-3 for Frame-Diff), λ = 5ν, β = 0.05,
    /// one Haar level, tolerance 5e-3, at most 200 iterations.
    pub fn standard(method: Method) -> Self {
        let nu = if method == Method::FrameDiff { 4e-3 } else { 5e-4 };
        Self {
            method,
            hbar: 0.125,
            eps: 0.01,
            nu,
            lambda: 5.0 * nu,
            beta: 0.05,
            levels: 1,
            tol: 5e-3,
            max_iter: 200,
            sigma_policy: SigmaPolicy::Ones,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("hbar", self.hbar),
            ("eps", self.eps),
            ("nu", self.nu),
            ("lambda", self.lambda),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        match self.method {
            Method::Tkd if self.hbar <= 0.0 => Err(Error::InvalidArgument("TKD needs hbar > 0".into())),
            Method::Tikhonov if self.eps <= 0.0 => Err(Error::InvalidArgument("Tikhonov needs eps > 0".into())),
            m if m.is_iterative() => {
                if !(self.beta.is_finite() && self.beta > 0.0) {
                    return Err(Error::InvalidArgument("beta must be positive".into()));
                }
                if !(self.tol.is_finite() && self.tol > 0.0) {
                    return Err(Error::InvalidArgument("tol must be positive".into()));
                }
                if self.levels == 0 {
                    return Err(Error::InvalidArgument("levels must be at least 1".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Diagonal data-fidelity weight, non-negative with maximum 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SnrWeight {
    weights: ScalarVolume,
}

impl SnrWeight {
    /// Rescales `weights` so the maximum is 1.
    pub fn new(weights: ScalarVolume) -> Result<Self> {
        if weights.as_slice().iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument("SNR weights must be non-negative".into()));
        }
        let peak = weights.norm_inf();
        if peak == 0.0 {
            return Err(Error::InvalidArgument("SNR weights are identically zero".into()));
        }
        Ok(Self {
            weights: weights.scale(1.0 / peak),
        })
    }

    pub fn ones(grid: crate::volume::GridSpec) -> Self {
        Self {
            weights: ScalarVolume::constant(grid, 1.0).expect("finite"),
        }
    }

    pub fn weights(&self) -> &ScalarVolume {
        &self.weights
    }
}

pub fn build_sigma(policy: SigmaPolicy, roi: &RoiMask, estimated: Option<&ScalarVolume>) -> Result<SnrWeight> {
    match policy {
        SigmaPolicy::Ones => Ok(SnrWeight::ones(*roi.grid())),
        SigmaPolicy::Roi => {
            if roi.is_empty() {
                return Err(Error::EmptyRoi);
            }
            SnrWeight::new(roi.indicator())
        }
        SigmaPolicy::Estimated => {
            let est = estimated.ok_or(Error::MissingEstimate)?;
            roi.grid().ensure_same(est.grid(), "estimated SNR weight")?;
            SnrWeight::new(est.clone())
        }
    }
}

/// One split Bregman sweep, measured after all updates of loop index `iteration`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖χ^{k+1} − χ^k‖ / ‖χ^{k+1}‖`; `0/0` is recorded as 0.
    pub rel_change: f64,
    pub objective: f64,
    /// `‖Wχ − d‖`.
    pub residual_w: f64,
    /// `‖ℒv − e‖`.
    pub residual_l: f64,
    /// `‖Aχ − f‖`.
    pub residual_a: f64,
    /// `‖v − g‖`.
    pub residual_v: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// Objective at the zero initialisation.
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(self.initial_objective, |r| r.objective)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    /// The iteration budget ran out first; the iterate is still returned.
    MaxIterExceeded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconOutput {
    /// ppm, in the units of `b_l`.
    pub chi: ScalarVolume,
    /// Harmonic incompatibility estimate (Frame-HIRE only).
    pub v: Option<ScalarVolume>,
    pub trace: Option<ConvergenceTrace>,
    pub status: SolverStatus,
}

/// Dispatch on `cfg.method`.
pub fn reconstruct(b_l: &ScalarVolume, sigma: &SnrWeight, cfg: &ReconConfig) -> Result<ReconOutput> {
    cfg.validate()?;
    let direct = |chi| ReconOutput {
        chi,
        v: None,
        trace: None,
        status: SolverStatus::Converged,
    };
    match cfg.method {
        Method::Tkd => Ok(direct(tkd(b_l, cfg.hbar)?)),
        Method::Tikhonov => Ok(direct(tikhonov(b_l, cfg.eps)?)),
        Method::FrameInt | Method::FrameDiff | Method::FrameHire => {
            let out = SplitBregman::new(b_l, sigma, cfg)?.run()?;
            Ok(ReconOutput {
                chi: out.chi,
                v: (cfg.method == Method::FrameHire).then_some(out.v),
                trace: Some(out.trace),
                status: out.status,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::GridSpec;

    #[test]
    fn standard_defaults() {
        let c = ReconConfig::standard(Method::FrameHire);
        assert_eq!((c.nu, c.beta, c.levels, c.max_iter), (5e-4, 0.05, 1, 200));
        assert!((c.lambda - 2.5e-3).abs() < 1e-18);
        assert_eq!(ReconConfig::standard(Method::FrameDiff).nu, 4e-3);
        assert_eq!(ReconConfig::standard(Method::Tkd).hbar, 0.125);
        assert_eq!(ReconConfig::standard(Method::Tikhonov).eps, 0.01);
        for m in Method::ALL {
            ReconConfig::standard(m).validate().unwrap();
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("frame-hire".parse::<Method>().unwrap(), Method::FrameHire);
        assert!("tgv".parse::<Method>().is_err());
        let bad = ReconConfig {
            beta: 0.0,
            ..ReconConfig::standard(Method::FrameInt)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sigma_policies() {
        let g = GridSpec::isotropic(6, 1.0).unwrap();
        let roi = RoiMask::from_fn(g, |i, _, _| i < 3);
        let ones = build_sigma(SigmaPolicy::Ones, &roi, None).unwrap();
        assert!(ones.weights().as_slice().iter().all(|&w| w == 1.0));
        let r = build_sigma(SigmaPolicy::Roi, &roi, None).unwrap();
        assert_eq!(r.weights().sum(), roi.count() as f64);
        assert!(matches!(
            build_sigma(SigmaPolicy::Estimated, &roi, None),
            Err(Error::MissingEstimate)
        ));
        let est = ScalarVolume::from_fn(g, |i, _, _| i as f64).unwrap();
        let e = build_sigma(SigmaPolicy::Estimated, &roi, Some(&est)).unwrap();
        assert_eq!(e.weights().norm_inf(), 1.0);
        assert!(matches!(
            build_sigma(SigmaPolicy::Roi, &RoiMask::empty(g), None),
            Err(Error::EmptyRoi)
        ));
    }
}
