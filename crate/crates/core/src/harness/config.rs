use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::trajectory::{ObservableSpec, Quantity};
use crate::analytics::{default_workers, Quadrature};
use crate::engine::SimParams;
use crate::error::{Error, Result};
use crate::hydro::DensityProfile;
use crate::lattice::{ModelDef, ValidatedModel};
use crate::observables::{uniform_grid, TestFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CheckModel,
    Simulate,
    Ensemble,
    Analyze,
    Hydro,
    CrossoverSweep,
}

/// A product moment E[X_t · Y_s] to estimate and compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub left: String,
    pub right: String,
    pub t: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Constant { rho: f64 },
    Step { left: f64, right: f64 },
    /// Two-column (x, rho) CSV.
    File { path: PathBuf },
}

impl ProfileSpec {
    pub fn build(&self, n: usize, multiplier: usize) -> Result<DensityProfile> {
        match self {
            ProfileSpec::Constant { rho } => DensityProfile::constant(n, multiplier, *rho),
            ProfileSpec::Step { left, right } => DensityProfile::step(n, multiplier, *left, *right),
            ProfileSpec::File { path } => {
                let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                DensityProfile::read_csv(f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroSpec {
    pub profile: ProfileSpec,
    pub safety: f64,
}

impl Default for HydroSpec {
    fn default() -> Self {
        HydroSpec {
            profile: ProfileSpec::Step { left: 0.8, right: 0.2 },
            safety: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub n_list: Vec<usize>,
    pub gamma_list: Vec<f64>,
    pub h: TestFunction,
    pub copies: usize,
    pub quadrature: Quadrature,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            n_list: vec![32, 64, 128, 256],
            gamma_list: vec![0.5, 0.75, 1.0],
            h: TestFunction::bump(0.0, 1.0, 4),
            copies: 4,
            quadrature: Quadrature::Exact,
        }
    }
}

/// Everything one run needs. Absent fields take their defaults; CLI flags
/// override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: ModelDef,
    pub n: usize,
    pub gamma: f64,
    pub a: f64,
    pub rho: f64,
    pub torus_multiplier: usize,
    pub horizon: f64,
    pub seed: u64,
    pub observables: Vec<ObservableSpec>,
    pub grid_dt: f64,
    /// Grid times whose values enter the ensemble moments; defaults to the horizon.
    pub report_times: Vec<f64>,
    pub pairs: Vec<PairSpec>,
    pub ensemble_size: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub jump_log: bool,
    pub hydro: HydroSpec,
    pub sweep: SweepSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let h = TestFunction::bump(0.0, 1.0, 4);
        ExperimentConfig {
            kind: ExperimentKind::Ensemble,
            model: ModelDef::ssep(),
            n: 64,
            gamma: 1.0,
            a: 1.0,
            rho: 0.5,
            torus_multiplier: 4,
            horizon: 1.0,
            seed: 0,
            observables: vec![
                ObservableSpec::new("Y", Quantity::Density { h: h.clone() }),
                ObservableSpec::new("M", Quantity::Martingale { h }),
            ],
            grid_dt: 0.01,
            report_times: Vec::new(),
            pairs: Vec::new(),
            ensemble_size: 100,
            workers: None,
            out: PathBuf::from("runs/default"),
            jump_log: false,
            hydro: HydroSpec::default(),
            sweep: SweepSpec::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub jump_log: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// File (or defaults), then CLI overrides, then the command's kind.
    pub fn resolve(file: Option<&Path>, kind: ExperimentKind, cli: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.kind = kind;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(w) = cli.workers {
            cfg.workers = Some(w);
        }
        if let Some(out) = &cli.out {
            cfg.out = out.clone();
        }
        cfg.jump_log |= cli.jump_log;
        Ok(cfg)
    }

    pub fn workers(&self) -> usize {
        self.workers.filter(|&w| w > 0).unwrap_or_else(default_workers)
    }

    pub fn validated_model(&self) -> Result<Arc<ValidatedModel>> {
        Ok(Arc::new(ValidatedModel::new(self.model.build()?)?))
    }

    pub fn params(&self) -> Result<SimParams> {
        self.params_with(self.validated_model()?)
    }

    pub fn params_with(&self, model: Arc<ValidatedModel>) -> Result<SimParams> {
        let p = SimParams::new(self.n, self.gamma, self.a, self.rho, model)?
            .with_torus(self.torus_multiplier)
            .with_horizon(self.horizon)
            .with_seed(self.seed);
        p.validate()?;
        Ok(p)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        uniform_grid(self.horizon, self.grid_dt)
    }

    /// Indices into the grid of the report times.
    pub fn report_indices(&self, grid: &[f64]) -> Result<Vec<usize>> {
        let times = if self.report_times.is_empty() {
            vec![self.horizon]
        } else {
            self.report_times.clone()
        };
        times
            .iter()
            .map(|&t| {
                grid.iter()
                    .position(|g| (g - t).abs() <= 1e-9 * t.abs().max(1.0))
                    .ok_or_else(|| Error::GridMismatch(format!("report time {t} is not on the sampling grid")))
            })
            .collect()
    }

    pub fn observable(&self, name: &str) -> Result<&ObservableSpec> {
        self.observables
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::InvalidParameter(format!("no observable `{name}` in config")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut cfg = ExperimentConfig::default();
        cfg.rho = 0.1 + 0.2;
        cfg.pairs.push(PairSpec {
            left: "Y".into(),
            right: "Y".into(),
            t: 1.0,
            s: 0.5,
        });
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.rho.to_bits(), cfg.rho.to_bits());
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"n": 32, "seed": 5, "workers": 3}"#).unwrap();
        let cli = Overrides {
            seed: Some(11),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(Some(&path), ExperimentKind::Simulate, &cli).unwrap();
        assert_eq!(cfg.n, 32);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.workers(), 3);
        assert_eq!(cfg.gamma, 1.0);
        assert_eq!(cfg.kind, ExperimentKind::Simulate);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"nn": 3}"#).is_err());
    }

    #[test]
    fn report_times_on_grid() {
        let mut cfg = ExperimentConfig::default();
        cfg.report_times = vec![0.5, 1.0];
        let grid = cfg.grid().unwrap();
        assert_eq!(cfg.report_indices(&grid).unwrap(), vec![50, 100]);
        cfg.report_times = vec![0.505];
        assert!(cfg.report_indices(&grid).is_err());
    }
}
