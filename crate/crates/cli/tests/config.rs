use std::path::PathBuf;

use hire_cli::config::*;
use hire_cli::CliError;
use hire_core::recon::{Method, ReconConfig, SigmaPolicy};

#[test]
fn empty_object_is_the_default_experiment() {
    let c = PipelineConfig::from_json("{}").unwrap();
    assert_eq!(c, PipelineConfig::default());
    assert_eq!(c.methods.len(), 5);
    assert_eq!(c.grid.dims, [64; 3]);
    assert_eq!(c.acquisition.noise_sigma, 0.02);
    c.validate().unwrap();
}

#[test]
fn method_entries_merge_onto_standard_defaults() {
    let c = PipelineConfig::from_json(
        r#"{"methods": ["tkd", {"method": "frame_hire", "nu": 1e-3, "sigma_policy": "estimated"}]}"#,
    )
    .unwrap();
    assert_eq!(c.methods[0], ReconConfig::standard(Method::Tkd));
    let h = &c.methods[1];
    assert_eq!(h.method, Method::FrameHire);
    assert_eq!(h.nu, 1e-3);
    assert_eq!(h.lambda, ReconConfig::standard(Method::FrameHire).lambda);
    assert_eq!(h.sigma_policy, SigmaPolicy::Estimated);
    assert!(PipelineConfig::from_json(r#"{"methods": [{"method": "tkd", "hbr": 0.1}]}"#).is_err());
    assert!(PipelineConfig::from_json(r#"{"methods": ["tvd"]}"#).is_err());
    assert!(PipelineConfig::from_json(r#"{"method": ["tkd"]}"#).is_err());
}

#[test]
fn resolved_config_round_trips() {
    let mut c = PipelineConfig {
        seed: Some(11),
        ..PipelineConfig::default()
    };
    c.methods[2].nu = 7e-4;
    assert_eq!(PipelineConfig::from_json(&c.to_json()).unwrap(), c);
}

#[test]
fn flags_override_file_values() {
    let mut c = PipelineConfig::from_json(
        r#"{"seed": 3, "bfr_tol": 1e-6, "methods": [{"method": "frame_int", "nu": 2e-3}], "acquisition": {"seed": 9, "noise_sigma": 0.01}}"#,
    )
    .unwrap();
    assert_eq!(c.acquisition().seed, 3);
    c.apply(Overrides {
        seed: Some(5),
        noise_sigma: Some(0.0),
        methods: Some(vec![Method::FrameInt, Method::Tkd]),
        output_dir: Some(PathBuf::from("elsewhere")),
        ..Overrides::default()
    });
    assert_eq!(c.acquisition().seed, 5);
    assert_eq!(c.acquisition().noise_sigma, 0.0);
    assert_eq!(c.bfr_tol, 1e-6);
    assert_eq!(c.methods[0].nu, 2e-3);
    assert_eq!(c.methods[1], ReconConfig::standard(Method::Tkd));
    assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
}

#[test]
fn validation() {
    let bad = |f: &dyn Fn(&mut PipelineConfig)| {
        let mut c = PipelineConfig::default();
        f(&mut c);
        c.validate().unwrap_err()
    };
    assert!(matches!(bad(&|c| c.methods.clear()), CliError::Config(_)));
    assert!(matches!(
        bad(&|c| c.methods.push(ReconConfig::standard(Method::Tkd))),
        CliError::Config(_)
    ));
    assert!(matches!(
        bad(&|c| c.scene = Some(PathBuf::from("/no/such/scene.json"))),
        CliError::Config(_)
    ));
    assert!(matches!(bad(&|c| c.bfr_tol = 1.0), CliError::Config(_)));
    assert!(matches!(bad(&|c| c.grid.dims = [2, 64, 64]), CliError::Core(_)));
    assert!(matches!(bad(&|c| c.methods[0].hbar = 0.0), CliError::Core(_)));
}
