#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hire_cli::config::PipelineConfig;
use hire_core::recon::{Method, ReconConfig};

pub fn small_scene() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/small_scene.json")
}

pub fn small_config(out: &Path, methods: &[Method]) -> PipelineConfig {
    PipelineConfig {
        scene: Some(small_scene()),
        grid: hire_cli::config::GridConfig {
            dims: [24; 3],
            spacing: [1.0; 3],
        },
        methods: methods.iter().map(|&m| ReconConfig::standard(m)).collect(),
        output_dir: out.to_path_buf(),
        seed: Some(7),
        ..PipelineConfig::default()
    }
}

/// Every file in `dir`, sorted by name.
pub fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}
