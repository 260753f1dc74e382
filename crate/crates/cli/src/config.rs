//! Experiment configuration. Every key has a default, so `{}` is the full
//! default experiment on the shipped scene.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use hire_core::bfr::DEFAULT_LBV_TOL;
use hire_core::recon::{Method, ReconConfig};
use hire_core::sim::AcquisitionParams;
use hire_core::GridSpec;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dims: [usize; 3],
    /// Millimeters.
    pub spacing: [f64; 3],
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dims: [64; 3],
            spacing: [1.0; 3],
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.dims, self.spacing)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Scene JSON; the shipped default scene when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    pub grid: GridConfig,
    pub acquisition: AcquisitionParams,
    /// Overrides `acquisition.seed` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub bfr_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bfr_max_iter: Option<usize>,
    /// Band widths reported by the incompatibility analysis.
    pub bands: Vec<usize>,
    /// Each entry is a method name or an object whose keys override that
    /// method's standard defaults.
    #[serde(deserialize_with = "methods_de")]
    pub methods: Vec<ReconConfig>,
    pub output_dir: PathBuf,
    pub parallel_methods: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene: None,
            grid: GridConfig::default(),
            acquisition: AcquisitionParams::default(),
            seed: None,
            bfr_tol: DEFAULT_LBV_TOL,
            bfr_max_iter: None,
            bands: vec![0, 1, 2, 3, 4],
            methods: Method::ALL.iter().map(|&m| ReconConfig::standard(m)).collect(),
            output_dir: PathBuf::from("hire-out"),
            parallel_methods: false,
        }
    }
}

/// A method entry merged onto the standard defaults for its method.
pub fn method_entry(entry: Value) -> Result<ReconConfig> {
    let fields = match entry {
        Value::String(name) => return Ok(ReconConfig::standard(parse_method(&name)?)),
        Value::Object(fields) => fields,
        other => {
            return Err(CliError::Config(format!(
                "method entry must be a name or an object, got {other}"
            )))
        }
    };
    let name = fields
        .get("method")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Config("method entry needs a `method` name".into()))?;
    let mut base = serde_json::to_value(ReconConfig::standard(parse_method(name)?)).expect("config serialises");
    let map = base.as_object_mut().expect("object");
    for (k, v) in fields {
        if !map.contains_key(&k) {
            return Err(CliError::Config(format!("unknown method parameter `{k}`")));
        }
        map.insert(k, v);
    }
    serde_json::from_value(base).map_err(|e| CliError::Config(e.to_string()))
}

pub fn parse_method(name: &str) -> Result<Method> {
    name.parse()
        .map_err(|e: hire_core::Error| CliError::Config(e.to_string()))
}

fn methods_de<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<ReconConfig>, D::Error> {
    let entries = Vec::<Value>::deserialize(d)?;
    entries
        .into_iter()
        .map(|e| method_entry(e).map_err(serde::de::Error::custom))
        .collect()
}

/// Command-line values for the same keys; `Some` wins over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub scene: Option<PathBuf>,
    pub dims: Option<[usize; 3]>,
    pub spacing: Option<[f64; 3]>,
    pub b0: Option<f64>,
    pub gamma_hz_per_tesla: Option<f64>,
    pub echo_times: Option<Vec<f64>>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
    pub bfr_tol: Option<f64>,
    pub bfr_max_iter: Option<usize>,
    pub bands: Option<Vec<usize>>,
    pub methods: Option<Vec<Method>>,
    pub output_dir: Option<PathBuf>,
    pub parallel_methods: Option<bool>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Methods named on the command line take their standard defaults unless
    /// the file already configures them.
    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.scene {
            self.scene = Some(v);
        }
        if let Some(v) = o.dims {
            self.grid.dims = v;
        }
        if let Some(v) = o.spacing {
            self.grid.spacing = v;
        }
        if let Some(v) = o.b0 {
            self.acquisition.b0 = v;
        }
        if let Some(v) = o.gamma_hz_per_tesla {
            self.acquisition.gamma_hz_per_tesla = v;
        }
        if let Some(v) = o.echo_times {
            self.acquisition.echo_times = v;
        }
        if let Some(v) = o.noise_sigma {
            self.acquisition.noise_sigma = v;
        }
        if let Some(v) = o.seed {
            self.seed = Some(v);
        }
        if let Some(v) = o.bfr_tol {
            self.bfr_tol = v;
        }
        if let Some(v) = o.bfr_max_iter {
            self.bfr_max_iter = Some(v);
        }
        if let Some(v) = o.bands {
            self.bands = v;
        }
        if let Some(names) = o.methods {
            self.methods = names
                .into_iter()
                .map(|m| {
                    self.methods
                        .iter()
                        .find(|c| c.method == m)
                        .cloned()
                        .unwrap_or_else(|| ReconConfig::standard(m))
                })
                .collect();
        }
        if let Some(v) = o.output_dir {
            self.output_dir = v;
        }
        if let Some(v) = o.parallel_methods {
            self.parallel_methods = v;
        }
    }

    /// Acquisition parameters with the top-level seed applied.
    pub fn acquisition(&self) -> AcquisitionParams {
        let mut a = self.acquisition.clone();
        if let Some(s) = self.seed {
            a.seed = s;
        }
        a
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.scene {
            if !p.is_file() {
                return Err(CliError::Config(format!("scene file {} does not exist", p.display())));
            }
        }
        self.grid.spec()?;
        self.acquisition().validate()?;
        if !(self.bfr_tol > 0.0 && self.bfr_tol < 1.0) {
            return Err(CliError::Config("bfr_tol must lie in (0, 1)".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("at least one method is required".into()));
        }
        let mut seen = BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(m.method) {
                return Err(CliError::Config(format!("method {} is listed twice", m.method)));
            }
            m.validate()?;
        }
        Ok(())
    }
}
