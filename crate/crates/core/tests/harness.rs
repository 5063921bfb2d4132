use std::path::Path;
use std::process::Command;

use wasep::analytics::run_ensemble;
use wasep::engine::{EngineState, SimParams};
use wasep::harness::{
    cmd_analyze, cmd_check_model, cmd_ensemble, cmd_simulate, ExperimentConfig, ExperimentKind,
    RunManifest, MANIFEST_FILE, MOMENTS_FILE, SERIES_FILE,
};
use wasep::lattice::{Configuration, ModelDef};
use wasep::observables::{read_series_csv, CurrentTally, FrameShift};
use wasep::Error;

fn small(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        n: 16,
        rho: 0.3,
        horizon: 0.1,
        grid_dt: 0.02,
        ensemble_size: 40,
        seed: 5,
        out: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn ensemble_of_one_matches_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("sim"));
    cmd_simulate(&cfg).unwrap();
    cfg.out = tmp.path().join("ens");
    cfg.ensemble_size = 1;
    cmd_ensemble(&cfg).unwrap();
    let a = std::fs::read(tmp.path().join("sim").join(SERIES_FILE)).unwrap();
    let b = std::fs::read(tmp.path().join("ens").join(SERIES_FILE)).unwrap();
    assert_eq!(a, b);
    let series = read_series_csv(&a[..]).unwrap();
    assert_eq!(series.len(), 1);
    assert_eq!(series[0].times.len(), 6);
}

#[test]
fn moments_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in [1, 3] {
        let mut cfg = small(&tmp.path().join(format!("w{workers}")));
        cfg.workers = Some(workers);
        let run = cmd_ensemble(&cfg).unwrap();
        outputs.push((
            std::fs::read(run.dir.join(MOMENTS_FILE)).unwrap(),
            std::fs::read(run.dir.join(SERIES_FILE)).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn analyze_refuses_incomplete_and_tampered_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let run = cmd_ensemble(&cfg).unwrap();
    let report = cmd_analyze(&run.dir).unwrap();
    assert!(!report.comparisons.is_empty());
    assert!(run.dir.join("report.json").exists());

    let series = run.dir.join(SERIES_FILE);
    let original = std::fs::read(&series).unwrap();
    std::fs::write(&series, b"trajectory_id,field_time,observable_name,value\n").unwrap();
    assert!(cmd_analyze(&run.dir).is_err());
    std::fs::write(&series, original).unwrap();

    std::fs::remove_file(run.dir.join(MANIFEST_FILE)).unwrap();
    assert!(matches!(cmd_analyze(&run.dir), Err(Error::IncompleteRun(_))));
}

#[test]
fn rerun_replaces_stale_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let first = cmd_ensemble(&cfg).unwrap();
    let second = cmd_ensemble(&cfg).unwrap();
    assert_eq!(first.manifest.outputs, second.manifest.outputs);
    let loaded = RunManifest::load_complete(tmp.path()).unwrap();
    assert_eq!(loaded.master_seed, 5);
    assert_eq!(loaded.config.kind, ExperimentKind::Ensemble);
}

#[test]
fn non_gradient_model_fails_check() {
    // c = 1 + η(−1)/2 keeps ν_ρ reversible but admits no local h
    let def = ModelDef {
        name: "left-neighbour".into(),
        window_radius: Some(1),
        builtin: None,
        b: None,
        c_table: Some((0..16).map(|s| 1.0 + 0.5 * (s & 1) as f64).collect()),
        bounds: None,
    };
    let cfg = ExperimentConfig {
        model: def,
        ..ExperimentConfig::default()
    };
    let report = cmd_check_model(&cfg).unwrap();
    assert!(!report.pass);
    assert!(report.hypotheses.gradient_residual > 0.1);
    assert!(report.hypotheses.detailed_balance_residual < 1e-12);
    assert!(cfg.validated_model().is_err());

    let cfg = ExperimentConfig {
        model: ModelDef::gradient(0.3),
        rho: 0.4,
        ..ExperimentConfig::default()
    };
    assert!(cmd_check_model(&cfg).unwrap().pass);
}

#[test]
fn single_particle_drifts_at_frame_speed() {
    // a lone particle jumps right at n²p and left at n²q: mean velocity a n^{2−γ},
    // the low-density limit of the frame velocity n·aβ'(ρ)n^{1−γ}
    let (n, gamma, a, t) = (16usize, 0.5, 1.0, 0.05);
    let params = SimParams::ssep(n, gamma, a, 0.5).unwrap().with_seed(11);
    let len = params.len();
    let velocity = a * (n as f64).powf(2.0 - gamma);
    let outcome = run_ensemble(&["x"], 4000, 1, |id| {
        let mut occ = vec![0u8; len];
        occ[0] = 1;
        let mut engine = EngineState::with_config(&params, Configuration::new(occ)?, id)?;
        let mut tally = CurrentTally::new(len, FrameShift::none(n));
        engine.run_until_with(t, &mut tally)?;
        let displacement: i64 = tally.fixed_counts().iter().sum();
        Ok((vec![displacement as f64], ()))
    })
    .unwrap();
    let acc = outcome.into_complete().unwrap();
    let (mean, se) = acc.estimate("x").unwrap();
    assert!((mean - velocity * t).abs() < 3.0 * se, "{mean} ± {se} vs {}", velocity * t);
}

fn wasep_cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wasep"))
}

#[test]
fn cli_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"n": 16, "horizon": 0.1, "grid_dt": 0.05, "ensemble_size": 8, "rho": 0.4}"#,
    )
    .unwrap();
    let out = tmp.path().join("run");
    let status = wasep_cmd()
        .args(["ensemble", "--config"])
        .arg(&config)
        .args(["--seed", "3", "--out"])
        .arg(&out)
        .env("WASEP_WORKERS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = RunManifest::load_complete(&out).unwrap();
    assert_eq!(manifest.master_seed, 3);
    assert_eq!(manifest.telemetry.workers, 2);
    assert_eq!(manifest.config.rho, 0.4);

    let analyze = wasep_cmd().arg("analyze").arg(&out).output().unwrap();
    assert!(analyze.status.code().is_some_and(|c| c <= 1));
    assert!(out.join("report.csv").exists());

    let sim = tmp.path().join("sim");
    let status = wasep_cmd()
        .args(["simulate", "--jump-log", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&sim)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(sim.join("jumps.bin").exists());

    let check = wasep_cmd().arg("check-model").output().unwrap();
    assert!(check.status.success());
    let report: serde_json::Value = serde_json::from_slice(&check.stdout).unwrap();
    assert_eq!(report["pass"], true);

    let missing = wasep_cmd().arg("analyze").arg(tmp.path().join("nope")).status().unwrap();
    assert_eq!(missing.code(), Some(2));
}
