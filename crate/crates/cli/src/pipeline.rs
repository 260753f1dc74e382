//! The experiment as a chain of stages. Every stage output is rounded to f32
//! exactly as a QVOL file would store it, so running the stages through files
//! gives the same numbers as running them in memory.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hire_core::bfr::{analyze_incompatibility, lbv_solve};
use hire_core::metrics::{evaluate, EvalReport};
use hire_core::recon::{build_sigma, reconstruct, ConvergenceTrace, ReconConfig, SolverStatus};
use hire_core::sim::{
    add_noise, default_scene, estimate_field, rasterize, simulate_gre, simulate_total_field, true_local_field,
    AcquisitionParams, PhantomScene,
};
use hire_core::{GridSpec, RoiMask, ScalarVolume};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::qvol::{write_mask, write_volume};

/// Fields are stored in ppm; the signal model works on dimensionless fields.
pub const PPM: f64 = 1e-6;

/// Round every sample to the nearest f32.
pub fn quantize(vol: &ScalarVolume) -> ScalarVolume {
    let data = vol.as_slice().iter().map(|&v| v as f32 as f64).collect();
    ScalarVolume::new(*vol.grid(), data).expect("f32 rounding keeps finite values finite")
}

pub fn load_scene(path: Option<&Path>) -> Result<PhantomScene> {
    match path {
        None => Ok(default_scene()),
        Some(p) => Ok(PhantomScene::from_json(
            &std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        )?),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomStage {
    /// ppm.
    pub chi: ScalarVolume,
    pub roi: RoiMask,
    pub magnitude: ScalarVolume,
}

pub fn stage_phantom(scene: &PhantomScene, grid: &GridSpec) -> Result<PhantomStage> {
    let r = rasterize(scene, grid)?;
    Ok(PhantomStage {
        chi: quantize(&r.chi),
        roi: r.roi,
        magnitude: quantize(&r.magnitude),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateStage {
    /// Estimated total field, ppm.
    pub field: ScalarVolume,
    /// Normalised SNR weight from the echo fit.
    pub snr: ScalarVolume,
}

pub fn stage_simulate(chi: &ScalarVolume, magnitude: &ScalarVolume, acq: &AcquisitionParams) -> Result<SimulateStage> {
    acq.validate()?;
    let b = simulate_total_field(&chi.scale(PPM))?;
    let echoes = add_noise(&simulate_gre(&b, magnitude, acq)?);
    let est = estimate_field(&echoes)?;
    Ok(SimulateStage {
        field: quantize(&est.b_hat.scale(1.0 / PPM)),
        snr: quantize(&est.snr_weight),
    })
}

pub fn stage_bfr(field: &ScalarVolume, roi: &RoiMask, tol: f64, max_iter: Option<usize>) -> Result<ScalarVolume> {
    Ok(quantize(&lbv_solve(field, roi, tol, max_iter)?))
}

pub fn stage_truefield(chi: &ScalarVolume, roi: &RoiMask) -> Result<ScalarVolume> {
    Ok(quantize(&true_local_field(chi, roi)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncompSummary {
    /// Keyed by band width `k`.
    pub band_mass_fraction: BTreeMap<usize, f64>,
    pub far_interior_fraction: f64,
    pub v_norm2: f64,
    pub neglap_v_norm1: f64,
}

pub fn stage_incompat(
    local: &ScalarVolume,
    true_local: &ScalarVolume,
    roi: &RoiMask,
    bands: &[usize],
) -> Result<IncompSummary> {
    let r = analyze_incompatibility(local, true_local, roi, bands)?;
    Ok(IncompSummary {
        band_mass_fraction: r.band_mass_fraction,
        far_interior_fraction: r.far_interior_fraction,
        v_norm2: r.v_norm2,
        neglap_v_norm1: r.neglap_v_norm1,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconStage {
    /// ppm.
    pub chi: ScalarVolume,
    pub trace: Option<ConvergenceTrace>,
    pub status: SolverStatus,
}

pub fn stage_recon(
    local: &ScalarVolume,
    roi: &RoiMask,
    snr: Option<&ScalarVolume>,
    cfg: &ReconConfig,
) -> Result<ReconStage> {
    let sigma = build_sigma(cfg.sigma_policy, roi, snr)?;
    let out = reconstruct(local, &sigma, cfg)?;
    Ok(ReconStage {
        chi: quantize(&out.chi),
        trace: out.trace,
        status: out.status,
    })
}

pub fn stage_eval(chi: &ScalarVolume, truth: &ScalarVolume, roi: &RoiMask) -> Result<EvalReport> {
    Ok(evaluate(chi, truth, roi)?)
}

/// What the pipeline records per method, apart from the volume itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub status: SolverStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    pub eval: EvalReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodOutcome {
    pub report: MethodReport,
    pub chi: ScalarVolume,
    pub trace: Option<ConvergenceTrace>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: BTreeMap<String, f64>,
    pub methods: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineResult {
    pub phantom: PhantomStage,
    pub simulate: SimulateStage,
    pub local: ScalarVolume,
    pub true_local: ScalarVolume,
    pub incompat: IncompSummary,
    /// In configuration order.
    pub methods: Vec<MethodOutcome>,
    pub timings: Timings,
}

/// File names inside the output directory.
pub mod files {
    pub const CONFIG: &str = "config.json";
    pub const CHI_TRUE: &str = "chi_true.qvol";
    pub const ROI: &str = "roi.qvol";
    pub const MAGNITUDE: &str = "magnitude.qvol";
    pub const FIELD: &str = "field.qvol";
    pub const SNR: &str = "snr.qvol";
    pub const LOCAL: &str = "local.qvol";
    pub const TRUE_LOCAL: &str = "true_local.qvol";
    pub const INCOMPAT: &str = "incompatibility.json";
    pub const SUMMARY: &str = "summary.json";
    pub const TIMINGS: &str = "timings.json";

    pub fn chi(method: &str) -> String {
        format!("chi_{method}.qvol")
    }

    pub fn report(method: &str) -> String {
        format!("report_{method}.json")
    }

    pub fn trace(method: &str) -> String {
        format!("trace_{method}.json")
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn timed<T>(log: &mut BTreeMap<String, f64>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f();
    log.insert(name.to_string(), t.elapsed().as_secs_f64());
    out
}

fn run_method(
    local: &ScalarVolume,
    truth: &PhantomStage,
    snr: &ScalarVolume,
    cfg: &ReconConfig,
) -> Result<(MethodOutcome, f64)> {
    let t = Instant::now();
    let rec = stage_recon(local, &truth.roi, Some(snr), cfg)?;
    let eval = stage_eval(&rec.chi, &truth.chi, &truth.roi)?;
    let seconds = t.elapsed().as_secs_f64();
    let report = MethodReport {
        method: cfg.method.name().to_string(),
        status: rec.status,
        iterations: rec.trace.as_ref().map(|t| t.records.len()),
        eval,
    };
    Ok((
        MethodOutcome {
            report,
            chi: rec.chi,
            trace: rec.trace,
        },
        seconds,
    ))
}

fn write_method(dir: &Path, m: &MethodOutcome) -> Result<()> {
    let name = &m.report.method;
    write_volume(&m.chi, &dir.join(files::chi(name)))?;
    write_json(&m.report, &dir.join(files::report(name)))?;
    if let Some(t) = &m.trace {
        write_json(t, &dir.join(files::trace(name)))?;
    }
    Ok(())
}

/// Runs every stage and writes all outputs. Wall-clock times go to
/// `timings.json` only, so every other file is reproducible bit for bit.
/// A failing method does not stop the others; the first failure is returned
/// after everything else has been written.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_json(config, &dir.join(files::CONFIG))?;
    let mut timings = Timings::default();
    let st = &mut timings.stages;

    let scene = load_scene(config.scene.as_deref())?;
    let grid = config.grid.spec()?;
    let phantom = timed(st, "phantom", || stage_phantom(&scene, &grid))?;
    write_volume(&phantom.chi, &dir.join(files::CHI_TRUE))?;
    write_mask(&phantom.roi, &dir.join(files::ROI))?;
    write_volume(&phantom.magnitude, &dir.join(files::MAGNITUDE))?;

    let sim = timed(st, "simulate", || {
        stage_simulate(&phantom.chi, &phantom.magnitude, &config.acquisition())
    })?;
    write_volume(&sim.field, &dir.join(files::FIELD))?;
    write_volume(&sim.snr, &dir.join(files::SNR))?;

    let local = timed(st, "bfr", || {
        stage_bfr(&sim.field, &phantom.roi, config.bfr_tol, config.bfr_max_iter)
    })?;
    write_volume(&local, &dir.join(files::LOCAL))?;

    let true_local = timed(st, "truefield", || stage_truefield(&phantom.chi, &phantom.roi))?;
    write_volume(&true_local, &dir.join(files::TRUE_LOCAL))?;
    let incompat = stage_incompat(&local, &true_local, &phantom.roi, &config.bands)?;
    write_json(&incompat, &dir.join(files::INCOMPAT))?;

    let results: Vec<Result<(MethodOutcome, f64)>> = if config.parallel_methods {
        std::thread::scope(|s| {
            let handles: Vec<_> = config
                .methods
                .iter()
                .map(|cfg| s.spawn(|| run_method(&local, &phantom, &sim.snr, cfg)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("method thread panicked"))
                .collect()
        })
    } else {
        config
            .methods
            .iter()
            .map(|cfg| run_method(&local, &phantom, &sim.snr, cfg))
            .collect()
    };

    let mut methods = Vec::new();
    let mut first_err = None;
    for (cfg, r) in config.methods.iter().zip(results) {
        match r.and_then(|(m, secs)| write_method(dir, &m).map(|_| (m, secs))) {
            Ok((m, secs)) => {
                timings.methods.insert(m.report.method.clone(), secs);
                methods.push(m);
            }
            Err(e) => {
                first_err.get_or_insert(CliError::Method {
                    method: cfg.method.name().to_string(),
                    source: Box::new(e),
                });
            }
        }
    }
    let summary: BTreeMap<&str, &MethodReport> =
        methods.iter().map(|m| (m.report.method.as_str(), &m.report)).collect();
    write_json(&summary, &dir.join(files::SUMMARY))?;
    write_json(&timings, &dir.join(files::TIMINGS))?;
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(PipelineResult {
        phantom,
        simulate: sim,
        local,
        true_local,
        incompat,
        methods,
        timings,
    })
}
