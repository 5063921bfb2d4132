use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::manifest::{RunManifest, Telemetry};
use super::trajectory::{simulate_trajectory, ObservableSpec, Quantity};
use crate::analytics::{
    bg_second_moment, fbm_covariance, fbm_covariance_conventional, fit_power_law, ou_covariance,
    qv_prediction, run_ensemble, AnalysisReport, BgEstimate, BgOptions, Comparison,
    EnsembleAccumulator, LimitSpec, PowerLawFit, QvForm, ScalePoint,
};
use crate::engine::SimParams;
use crate::error::{Error, Result};
use crate::hydro::{hydro_compare, solve_burgers, DensityProfile, HydroComparison, HydroOptions};
use crate::lattice::{check_hypotheses, HypothesisReport, ThermoFunctions, ValidatedModel};
use crate::observables::{FieldKit, Geometry, Kernel, TestFunction};

pub const SERIES_FILE: &str = "series.csv";
pub const JUMP_LOG_FILE: &str = "jumps.bin";
pub const MOMENTS_FILE: &str = "moments.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_CSV_FILE: &str = "report.csv";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    // a stale manifest would mark a half-written rerun as finished
    let stale = dir.join(super::manifest::MANIFEST_FILE);
    if stale.exists() {
        std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    }
    Ok(())
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckModelReport {
    pub hypotheses: HypothesisReport,
    /// Absent when the model admits no gradient function.
    pub thermo: Option<ThermoFunctions>,
    /// aβ'(ρ), the frame velocity in macroscopic units.
    pub drift: Option<f64>,
    pub pass: bool,
}

/// Hypothesis checks at L ∈ {4, 6, 8}, a ∈ {0, 1}, γ ∈ {1/2, 1}, plus the
/// thermodynamic functions at the configured density.
pub fn cmd_check_model(cfg: &ExperimentConfig) -> Result<CheckModelReport> {
    let model = cfg.model.build()?;
    let lens: Vec<usize> = [4, 6, 8].into_iter().filter(|&l| l >= model.window_width()).collect();
    let hypotheses = check_hypotheses(&model, &lens, cfg.rho)?;
    let pass = hypotheses.passed();
    // thermo needs h; report it for any model that has one so failures can be inspected
    let thermo = match crate::lattice::solve_gradient(&model) {
        Ok(solution) => Some(crate::lattice::thermo(
            &model,
            &solution.h,
            cfg.rho,
            crate::lattice::DEFAULT_ENUMERATION_CAP,
        )?),
        Err(Error::NotGradient { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CheckModelReport {
        drift: thermo.as_ref().map(|t| cfg.a * t.beta_prime),
        hypotheses,
        thermo,
        pass,
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// One trajectory (index 0): series CSV, optional jump log, manifest.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let dir = cfg.out.clone();
    create_dir(&dir)?;
    let mut outputs = vec![SERIES_FILE];
    let run = if cfg.jump_log {
        outputs.push(JUMP_LOG_FILE);
        let mut log = create_file(&dir.join(JUMP_LOG_FILE))?;
        let run = simulate_trajectory(&params, &cfg.observables, &grid, 0, Some(&mut log))?;
        log.flush().map_err(|e| Error::io(dir.join(JUMP_LOG_FILE), e))?;
        run
    } else {
        simulate_trajectory(&params, &cfg.observables, &grid, 0, None)?
    };
    let series_path = dir.join(SERIES_FILE);
    let mut out = create_file(&series_path)?;
    run.series.write_csv(&mut out, true)?;
    out.flush().map_err(|e| Error::io(&series_path, e))?;
    let telemetry = Telemetry {
        wall_seconds: start.elapsed().as_secs_f64(),
        events: run.events,
        trajectories: 1,
        workers: 1,
    };
    let manifest = RunManifest::new(cfg, telemetry).commit(&dir, &outputs)?;
    Ok(RunSummary { dir, manifest })
}

/// A column of the ensemble moments: an observable at a grid time, or a
/// product of two such values.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentColumn {
    Value { obs: String, k: usize },
    Product { left: String, k1: usize, right: String, k2: usize },
}

impl MomentColumn {
    pub fn name(&self, grid: &[f64]) -> String {
        match self {
            MomentColumn::Value { obs, k } => format!("{obs}@{}", grid[*k]),
            MomentColumn::Product { left, k1, right, k2 } => {
                format!("{left}@{}*{right}@{}", grid[*k1], grid[*k2])
            }
        }
    }
}

/// Means and squares of every observable at the report times, plus the configured pairs.
pub fn moment_layout(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<MomentColumn>> {
    let ks = cfg.report_indices(grid)?;
    let mut cols = Vec::new();
    for o in &cfg.observables {
        for &k in &ks {
            cols.push(MomentColumn::Value { obs: o.name.clone(), k });
            cols.push(MomentColumn::Product {
                left: o.name.clone(),
                k1: k,
                right: o.name.clone(),
                k2: k,
            });
        }
    }
    for p in &cfg.pairs {
        cfg.observable(&p.left)?;
        cfg.observable(&p.right)?;
        let at = |t: f64| {
            grid.iter()
                .position(|g| (g - t).abs() <= 1e-9 * t.abs().max(1.0))
                .ok_or_else(|| Error::GridMismatch(format!("pair time {t} is not on the sampling grid")))
        };
        let col = MomentColumn::Product {
            left: p.left.clone(),
            k1: at(p.t)?,
            right: p.right.clone(),
            k2: at(p.s)?,
        };
        if !cols.contains(&col) {
            cols.push(col);
        }
    }
    Ok(cols)
}

fn moment_values(cols: &[MomentColumn], series: &crate::observables::ObservableSeries) -> Result<Vec<f64>> {
    cols.iter()
        .map(|c| match c {
            MomentColumn::Value { obs, k } => Ok(series.column(obs)?[*k]),
            MomentColumn::Product { left, k1, right, k2 } => {
                Ok(series.column(left)?[*k1] * series.column(right)?[*k2])
            }
        })
        .collect()
}

/// Ensemble of `ensemble_size` trajectories: long-format CSV of every
/// trajectory, merged moments, manifest.
pub fn cmd_ensemble(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let params = cfg.params()?;
    let grid = cfg.grid()?;
    let cols = moment_layout(cfg, &grid)?;
    let names: Vec<String> = cols.iter().map(|c| c.name(&grid)).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let dir = cfg.out.clone();
    create_dir(&dir)?;
    let workers = cfg.workers();
    let outcome = run_ensemble(&name_refs, cfg.ensemble_size, workers, |id| {
        let run = simulate_trajectory(&params, &cfg.observables, &grid, id, None)?;
        let values = moment_values(&cols, &run.series)?;
        let mut csv = Vec::new();
        run.series.write_csv(&mut csv, id == 0)?;
        Ok((values, (csv, run.events)))
    })?;

    let series_path = dir.join(SERIES_FILE);
    let mut out = create_file(&series_path)?;
    let mut events = 0;
    let mut header_written = false;
    for (id, (csv, ev)) in &outcome.outputs {
        // trajectory 0 carries the header; if it failed, emit one here
        if !header_written && *id != 0 {
            out.write_all(b"trajectory_id,field_time,observable_name,value\n")
                .map_err(|e| Error::io(&series_path, e))?;
        }
        header_written = true;
        out.write_all(csv).map_err(|e| Error::io(&series_path, e))?;
        events += ev;
    }
    out.flush().map_err(|e| Error::io(&series_path, e))?;
    write_json(&dir.join(MOMENTS_FILE), &outcome.moments)?;
    let telemetry = Telemetry {
        wall_seconds: start.elapsed().as_secs_f64(),
        events,
        trajectories: outcome.moments.count(),
        workers,
    };
    let mut manifest = RunManifest::new(cfg, telemetry);
    manifest.failures = outcome.failures;
    let manifest = manifest.commit(&dir, &[SERIES_FILE, MOMENTS_FILE])?;
    Ok(RunSummary { dir, manifest })
}

/// χ (1/n) Σ_x H(x/n − shift)²: the exact ν_ρ second moment of Y(H).
pub fn static_variance(params: &SimParams, h: &TestFunction, shift: f64) -> Result<f64> {
    let geometry = Geometry::from_params(params);
    let (lo, hi) = geometry.window(h, Kernel::Value, shift, shift)?;
    let taps = Kernel::Value.taps(params.n);
    let sum: f64 = (lo..=hi).map(|j| geometry.weight(h, &taps, j, shift).powi(2)).sum();
    Ok(params.thermo().chi * sum / params.n as f64)
}

fn obs_target(
    params: &SimParams,
    kit: &FieldKit,
    spec: &ObservableSpec,
    t: f64,
) -> Result<Vec<(String, f64)>> {
    let shift = if spec.static_frame { 0.0 } else { kit.frame.d_mac(t) };
    let thermo = params.thermo();
    let limit = LimitSpec::new(&thermo, params.a);
    Ok(match &spec.quantity {
        Quantity::Density { h } => vec![("static variance".into(), static_variance(params, h, shift)?)],
        Quantity::Martingale { h } => vec![
            ("qv prediction".into(), qv_prediction(h, t, params, &thermo, QvForm::AsDisplayed)?),
            (
                "qv prediction, stationary form".into(),
                qv_prediction(h, t, params, &thermo, QvForm::Stationary)?,
            ),
        ],
        Quantity::Current { .. } => vec![
            ("fbm covariance".into(), fbm_covariance(t, t, &limit)),
            ("fbm covariance, conventional".into(), fbm_covariance_conventional(t, t, &limit)),
        ],
        _ => Vec::new(),
    })
}

fn pair_target(
    params: &SimParams,
    left: &ObservableSpec,
    right: &ObservableSpec,
    t: f64,
    s: f64,
) -> Result<Vec<(String, f64)>> {
    let thermo = params.thermo();
    let limit = LimitSpec::new(&thermo, params.a);
    Ok(match (&left.quantity, &right.quantity) {
        (Quantity::Density { h }, Quantity::Density { h: g }) => {
            vec![("ou covariance".into(), ou_covariance(h, g, t, s, &limit))]
        }
        (Quantity::Current { .. }, Quantity::Current { .. }) => vec![
            ("fbm covariance".into(), fbm_covariance(t, s, &limit)),
            ("fbm covariance, conventional".into(), fbm_covariance_conventional(t, s, &limit)),
        ],
        (Quantity::Martingale { h }, Quantity::Martingale { h: g }) if h == g && t == s => {
            vec![("qv prediction".into(), qv_prediction(h, t, params, &thermo, QvForm::AsDisplayed)?)]
        }
        _ => Vec::new(),
    })
}

/// Compare the moments of a finished ensemble run with the analytic targets.
pub fn analyze_moments(
    cfg: &ExperimentConfig,
    params: &SimParams,
    moments: &EnsembleAccumulator,
) -> Result<AnalysisReport> {
    let grid = cfg.grid()?;
    let kit = FieldKit::new(params)?;
    let ctx = serde_json::json!({
        "model": cfg.model.name, "n": cfg.n, "gamma": cfg.gamma, "a": cfg.a, "rho": cfg.rho,
        "torus_multiplier": cfg.torus_multiplier, "trajectories": moments.count(), "seed": cfg.seed,
    });
    let mut report = AnalysisReport::default();
    for col in moment_layout(cfg, &grid)? {
        let name = col.name(&grid);
        let (est, se) = moments.estimate(&name)?;
        match &col {
            MomentColumn::Value { obs, .. } => {
                let spec = cfg.observable(obs)?;
                if matches!(
                    spec.quantity,
                    Quantity::Density { .. } | Quantity::Martingale { .. } | Quantity::Current { .. }
                ) {
                    report.push(Comparison::new(cfg.model.name.clone(), ctx.clone(), format!("E[{name}] vs 0"), est, se, 0.0));
                } else {
                    report.extra.insert(format!("E[{name}]"), serde_json::json!({"estimate": est, "stderr": se}));
                }
            }
            MomentColumn::Product { left, k1, right, k2 } => {
                let (l, r) = (cfg.observable(left)?, cfg.observable(right)?);
                let targets = if left == right && k1 == k2 {
                    obs_target(params, &kit, l, grid[*k1])?
                } else {
                    pair_target(params, l, r, grid[*k1], grid[*k2])?
                };
                if targets.is_empty() {
                    report.extra.insert(format!("E[{name}]"), serde_json::json!({"estimate": est, "stderr": se}));
                }
                for (label, target) in targets {
                    report.push(Comparison::new(
                        cfg.model.name.clone(),
                        ctx.clone(),
                        format!("E[{name}] vs {label}"),
                        est,
                        se,
                        target,
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// Analyze a run directory; refuses runs without a complete manifest.
pub fn cmd_analyze(run_dir: &Path) -> Result<AnalysisReport> {
    let manifest = RunManifest::load_complete(run_dir)?;
    let changed = manifest.verify(run_dir)?;
    if !changed.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "outputs {changed:?} in {} no longer match the manifest digests",
            run_dir.display()
        )));
    }
    let moments_path = run_dir.join(MOMENTS_FILE);
    if !manifest.outputs.contains_key(MOMENTS_FILE) {
        return Err(Error::InvalidParameter(format!(
            "{} holds no ensemble moments; analyze needs an ensemble run",
            run_dir.display()
        )));
    }
    let text = std::fs::read_to_string(&moments_path).map_err(|e| Error::io(&moments_path, e))?;
    let moments: EnsembleAccumulator = serde_json::from_str(&text)?;
    let cfg = &manifest.config;
    let report = analyze_moments(cfg, &cfg.params()?, &moments)?;
    report.write_json(&run_dir.join(REPORT_FILE))?;
    let csv_path = run_dir.join(REPORT_CSV_FILE);
    let mut out = create_file(&csv_path)?;
    report.write_csv(&mut out)?;
    out.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HydroReport {
    pub at_horizon: HydroComparison,
    pub baseline: HydroComparison,
}

/// Ensemble from the configured profile against the Burgers solution, at the
/// horizon and at t = 0.
pub fn cmd_hydro(cfg: &ExperimentConfig) -> Result<(RunSummary, HydroReport)> {
    let start = Instant::now();
    let params = cfg.params()?;
    let profile = cfg.hydro.profile.build(cfg.n, cfg.torus_multiplier)?;
    let dir = cfg.out.clone();
    create_dir(&dir)?;
    let opts = HydroOptions {
        trajectories: cfg.ensemble_size,
        workers: cfg.workers(),
        safety: cfg.hydro.safety,
    };
    let at_horizon = hydro_compare(&params, &profile, cfg.horizon, &opts)?;
    let baseline = hydro_compare(&params, &profile, 0.0, &opts)?;

    let write_profile = |name: &str, p: &DensityProfile| -> Result<()> {
        let path = dir.join(name);
        let mut out = create_file(&path)?;
        p.write_csv(&mut out)?;
        out.flush().map_err(|e| Error::io(&path, e))
    };
    write_profile("initial.csv", &profile)?;
    let pde = solve_burgers(&profile, params.model.polys(), params.a, cfg.horizon, cfg.hydro.safety)?;
    write_profile("pde.csv", &pde)?;
    let block_dx = at_horizon.block_sites as f64 / cfg.n as f64;
    let empirical = DensityProfile::new(block_dx, at_horizon.empirical_blocks.clone())?;
    write_profile("empirical_blocks.csv", &empirical)?;
    let report = HydroReport { at_horizon, baseline };
    write_json(&dir.join(REPORT_FILE), &report)?;
    let telemetry = Telemetry {
        wall_seconds: start.elapsed().as_secs_f64(),
        events: 0,
        trajectories: 2 * cfg.ensemble_size,
        workers: opts.workers,
    };
    let manifest = RunManifest::new(cfg, telemetry).commit(
        &dir,
        &["initial.csv", "pde.csv", "empirical_blocks.csv", REPORT_FILE],
    )?;
    Ok((RunSummary { dir, manifest }, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverVerdict {
    /// Every estimate is exactly zero (a = 0).
    Zero,
    /// Exponent at least 3 stderr below 0.
    Decay,
    /// Exponent within 3 stderr of 0 and every level at least 5 stderr above 0.
    Plateau,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub gamma: f64,
    pub estimates: Vec<BgEstimate>,
    pub fit: Option<PowerLawFit>,
    pub verdict: CrossoverVerdict,
}

pub fn classify(estimates: &[BgEstimate], fit: Option<&PowerLawFit>) -> CrossoverVerdict {
    if estimates.iter().all(|e| e.estimate == 0.0) {
        return CrossoverVerdict::Zero;
    }
    match fit {
        Some(f) if f.exponent <= -3.0 * f.exponent_stderr => CrossoverVerdict::Decay,
        Some(f)
            if f.exponent.abs() <= 3.0 * f.exponent_stderr
                && estimates.iter().all(|e| e.estimate >= 5.0 * e.stderr) =>
        {
            CrossoverVerdict::Plateau
        }
        _ => CrossoverVerdict::Inconclusive,
    }
}

/// E[A_t²] over the (n, γ) grid with a power-law fit per γ.
pub fn crossover_table(
    cfg: &ExperimentConfig,
    model: std::sync::Arc<ValidatedModel>,
) -> Result<Vec<CrossoverRow>> {
    let opts = BgOptions {
        trajectories: cfg.ensemble_size,
        copies: cfg.sweep.copies,
        quadrature: cfg.sweep.quadrature,
        workers: cfg.workers(),
    };
    let mut rows = Vec::new();
    for &gamma in &cfg.sweep.gamma_list {
        if !(gamma == 0.5 || (gamma > 0.5 && gamma <= 1.0)) {
            return Err(Error::InvalidParameter(format!("gamma {gamma} outside {{1/2}} ∪ (1/2, 1]")));
        }
        let mut estimates = Vec::new();
        for &n in &cfg.sweep.n_list {
            let params = SimParams::new(n, gamma, cfg.a, cfg.rho, model.clone())?
                .with_torus(cfg.torus_multiplier)
                .with_horizon(cfg.horizon)
                .with_seed(cfg.seed);
            let est = bg_second_moment(&params, &cfg.sweep.h, cfg.horizon, &opts)?;
            log::info!("gamma {gamma} n {n}: E[A^2] = {} ± {}", est.estimate, est.stderr);
            estimates.push(est);
        }
        let points: Vec<ScalePoint> = estimates
            .iter()
            .map(|e| ScalePoint {
                scale: e.n as f64,
                value: e.estimate,
                stderr: e.stderr,
            })
            .collect();
        let fit = if points.iter().all(|p| p.value > 0.0 && p.stderr > 0.0) {
            Some(fit_power_law(&points)?)
        } else {
            None
        };
        let verdict = classify(&estimates, fit.as_ref());
        rows.push(CrossoverRow {
            gamma,
            estimates,
            fit,
            verdict,
        });
    }
    Ok(rows)
}

pub fn cmd_crossover_sweep(cfg: &ExperimentConfig) -> Result<(RunSummary, Vec<CrossoverRow>)> {
    let start = Instant::now();
    let rows = crossover_table(cfg, cfg.validated_model()?)?;
    let dir = cfg.out.clone();
    create_dir(&dir)?;
    write_json(&dir.join("crossover.json"), &rows)?;
    let telemetry = Telemetry {
        wall_seconds: start.elapsed().as_secs_f64(),
        events: 0,
        trajectories: cfg.ensemble_size * (cfg.sweep.n_list.len() * cfg.sweep.gamma_list.len()) as u64,
        workers: cfg.workers(),
    };
    let manifest = RunManifest::new(cfg, telemetry).commit(&dir, &["crossover.json"])?;
    Ok((RunSummary { dir, manifest }, rows))
}
