use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hire_cli::config::{Overrides, PipelineConfig};
use hire_cli::error::{CliError, Result};
use hire_cli::pipeline::{
    files, load_scene, run_pipeline, stage_bfr, stage_eval, stage_incompat, stage_phantom, stage_recon, stage_simulate,
    stage_truefield, write_json,
};
use hire_cli::qvol::{encode, import_raw, read_mask, read_qvol, read_volume, write_mask, write_volume, Qvol, RawType};
use hire_cli::slice::{export_slice, Axis};
use hire_core::bfr::DEFAULT_LBV_TOL;
use hire_core::recon::{Method, ReconConfig, SigmaPolicy};
use hire_core::sim::AcquisitionParams;
use hire_core::GridSpec;

#[derive(Parser)]
#[command(
    name = "hire",
    version,
    about = "Susceptibility mapping experiments on synthetic phantoms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterise a scene into susceptibility, ROI and magnitude volumes.
    Phantom(PhantomArgs),
    /// Simulate the multi-echo acquisition and estimate the total field.
    Simulate(SimulateArgs),
    /// Remove the background field by the Laplacian boundary value method.
    Bfr(BfrArgs),
    /// Field of the susceptibility inside the ROI, optionally compared with a local field.
    Truefield(TruefieldArgs),
    /// Invert a local field with one method.
    Recon(ReconArgs),
    /// Score a reconstruction against the ground truth.
    Eval(EvalArgs),
    /// Write one windowed slice as an 8-bit PNG.
    ExportSlice(ExportSliceArgs),
    /// Run the full experiment from a configuration file.
    Pipeline(PipelineArgs),
    /// Wrap raw little-endian samples in a QVOL header.
    RawImport(RawImportArgs),
}

fn triple<T: std::str::FromStr>(s: &str) -> std::result::Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got `{s}`"));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(p.trim().parse::<T>().map_err(|_| format!("cannot parse `{p}`"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

fn pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.trim().parse().map_err(|_| format!("cannot parse `{a}`"))?,
            b.trim().parse().map_err(|_| format!("cannot parse `{b}`"))?,
        ]),
        _ => Err(format!("expected `lo,hi`, got `{s}`")),
    }
}

fn method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: hire_core::Error| e.to_string())
}

fn sigma_policy(s: &str) -> std::result::Result<SigmaPolicy, String> {
    match s {
        "ones" => Ok(SigmaPolicy::Ones),
        "roi" => Ok(SigmaPolicy::Roi),
        "estimated" => Ok(SigmaPolicy::Estimated),
        _ => Err(format!("sigma policy must be ones, roi or estimated, got `{s}`")),
    }
}

fn raw_type(s: &str) -> std::result::Result<RawType, String> {
    match s {
        "f32" => Ok(RawType::F32),
        "f64" => Ok(RawType::F64),
        "u8" => Ok(RawType::U8),
        _ => Err(format!("dtype must be f32, f64 or u8, got `{s}`")),
    }
}

#[derive(Args)]
struct PhantomArgs {
    /// Scene JSON; the shipped default scene when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_parser = triple::<usize>, default_value = "64,64,64")]
    dims: [usize; 3],
    #[arg(long, value_parser = triple::<f64>, default_value = "1,1,1")]
    spacing: [f64; 3],
    #[arg(long)]
    chi: PathBuf,
    #[arg(long)]
    roi: PathBuf,
    #[arg(long)]
    magnitude: PathBuf,
}

#[derive(Args)]
struct AcquisitionArgs {
    /// JSON file with acquisition parameters; flags below override it.
    #[arg(long)]
    acquisition: Option<PathBuf>,
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long)]
    gamma_hz_per_tesla: Option<f64>,
    /// Seconds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    echo_times: Option<Vec<f64>>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl AcquisitionArgs {
    fn resolve(&self) -> Result<AcquisitionParams> {
        let mut p = match &self.acquisition {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)
                .map_err(|e| CliError::Config(e.to_string()))?,
            None => AcquisitionParams::default(),
        };
        if let Some(v) = self.b0 {
            p.b0 = v;
        }
        if let Some(v) = self.gamma_hz_per_tesla {
            p.gamma_hz_per_tesla = v;
        }
        if let Some(v) = &self.echo_times {
            p.echo_times = v.clone();
        }
        if let Some(v) = self.noise_sigma {
            p.noise_sigma = v;
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        Ok(p)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Susceptibility, ppm.
    #[arg(long)]
    chi: PathBuf,
    #[arg(long)]
    magnitude: PathBuf,
    #[command(flatten)]
    acq: AcquisitionArgs,
    /// Estimated total field output, ppm.
    #[arg(long)]
    field: PathBuf,
    /// SNR weight output.
    #[arg(long)]
    snr: Option<PathBuf>,
}

#[derive(Args)]
struct BfrArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    roi: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LBV_TOL)]
    tol: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    local: PathBuf,
}

#[derive(Args)]
struct TruefieldArgs {
    #[arg(long)]
    chi: PathBuf,
    #[arg(long)]
    roi: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Local field to compare against; writes the incompatibility report.
    #[arg(long, requires = "report")]
    local: Option<PathBuf>,
    #[arg(long, requires = "local")]
    report: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    bands: Vec<usize>,
}

#[derive(Args)]
struct ReconArgs {
    #[arg(long)]
    local: PathBuf,
    #[arg(long)]
    roi: PathBuf,
    #[arg(long)]
    snr: Option<PathBuf>,
    #[arg(long, value_parser = method)]
    method: Method,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_parser = sigma_policy)]
    sigma_policy: Option<SigmaPolicy>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl ReconArgs {
    fn config(&self) -> ReconConfig {
        let mut c = ReconConfig::standard(self.method);
        if let Some(nu) = self.nu {
            c.nu = nu;
            c.lambda = 5.0 * nu;
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(hbar, eps, lambda, beta, levels, tol, max_iter, sigma_policy);
        c
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    chi: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    roi: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportSliceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    axis: Axis,
    #[arg(long)]
    index: usize,
    /// `lo,hi`.
    #[arg(long, value_parser = pair, allow_hyphen_values = true)]
    window: [f64; 2],
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Configuration JSON; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_parser = triple::<usize>)]
    dims: Option<[usize; 3]>,
    #[arg(long, value_parser = triple::<f64>)]
    spacing: Option<[f64; 3]>,
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long)]
    gamma_hz_per_tesla: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    echo_times: Option<Vec<f64>>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bfr_tol: Option<f64>,
    #[arg(long)]
    bfr_max_iter: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    bands: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = method)]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    parallel_methods: bool,
}

#[derive(Args)]
struct RawImportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = triple::<usize>)]
    dims: [usize; 3],
    #[arg(long, value_parser = triple::<f64>, default_value = "1,1,1")]
    spacing: [f64; 3],
    /// Sample type of the raw file; u8 becomes a mask (nonzero is inside).
    #[arg(long, value_parser = raw_type)]
    dtype: RawType,
    #[arg(long)]
    out: PathBuf,
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Phantom(a) => {
            let scene = load_scene(a.scene.as_deref())?;
            let p = stage_phantom(&scene, &GridSpec::new(a.dims, a.spacing)?)?;
            write_volume(&p.chi, &a.chi)?;
            write_mask(&p.roi, &a.roi)?;
            write_volume(&p.magnitude, &a.magnitude)
        }
        Command::Simulate(a) => {
            let s = stage_simulate(&read_volume(&a.chi)?, &read_volume(&a.magnitude)?, &a.acq.resolve()?)?;
            write_volume(&s.field, &a.field)?;
            match &a.snr {
                Some(p) => write_volume(&s.snr, p),
                None => Ok(()),
            }
        }
        Command::Bfr(a) => {
            let local = stage_bfr(&read_volume(&a.field)?, &read_mask(&a.roi)?, a.tol, a.max_iter)?;
            write_volume(&local, &a.local)
        }
        Command::Truefield(a) => {
            let roi = read_mask(&a.roi)?;
            let t = stage_truefield(&read_volume(&a.chi)?, &roi)?;
            write_volume(&t, &a.out)?;
            if let (Some(local), Some(report)) = (&a.local, &a.report) {
                write_json(&stage_incompat(&read_volume(local)?, &t, &roi, &a.bands)?, report)?;
            }
            Ok(())
        }
        Command::Recon(a) => {
            let snr = a.snr.as_deref().map(read_volume).transpose()?;
            let r = stage_recon(&read_volume(&a.local)?, &read_mask(&a.roi)?, snr.as_ref(), &a.config())?;
            write_volume(&r.chi, &a.out)?;
            if let (Some(path), Some(trace)) = (&a.trace, &r.trace) {
                write_json(trace, path)?;
            }
            Ok(())
        }
        Command::Eval(a) => {
            let report = stage_eval(&read_volume(&a.chi)?, &read_volume(&a.truth)?, &read_mask(&a.roi)?)?;
            match &a.out {
                Some(p) => write_json(&report, p),
                None => {
                    print_json(&report);
                    Ok(())
                }
            }
        }
        Command::ExportSlice(a) => {
            let vol = match read_qvol(&a.input)? {
                Qvol::Volume(v) => v,
                Qvol::Mask(m) => m.indicator(),
            };
            export_slice(&vol, a.axis, a.index, a.window, &a.out)
        }
        Command::Pipeline(a) => {
            let mut cfg = match &a.config {
                Some(p) => PipelineConfig::load(p)?,
                None => PipelineConfig::default(),
            };
            cfg.apply(Overrides {
                scene: a.scene,
                dims: a.dims,
                spacing: a.spacing,
                b0: a.b0,
                gamma_hz_per_tesla: a.gamma_hz_per_tesla,
                echo_times: a.echo_times,
                noise_sigma: a.noise_sigma,
                seed: a.seed,
                bfr_tol: a.bfr_tol,
                bfr_max_iter: a.bfr_max_iter,
                bands: a.bands,
                methods: a.methods,
                output_dir: a.output_dir,
                parallel_methods: a.parallel_methods.then_some(true),
            });
            let result = run_pipeline(&cfg)?;
            let summary: std::collections::BTreeMap<_, _> = result
                .methods
                .iter()
                .map(|m| (m.report.method.clone(), m.report.eval.clone()))
                .collect();
            print_json(&summary);
            eprintln!("outputs in {} ({})", cfg.output_dir.display(), files::SUMMARY);
            Ok(())
        }
        Command::RawImport(a) => {
            let bytes = std::fs::read(&a.input).map_err(|e| CliError::io(&a.input, e))?;
            let q = import_raw(&bytes, GridSpec::new(a.dims, a.spacing)?, a.dtype)?;
            write_bytes(&a.out, &encode(&q))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
