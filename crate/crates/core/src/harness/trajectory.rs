use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineState, JumpLogWriter, SimParams};
use crate::error::{Error, Result};
use crate::observables::{
    CurrentTally, FieldKit, FrameShift, IntegralTerm, IntegralTracker, ObservableSeries, TestFunction,
};

/// What an observable measures along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    /// Y_t(H)
    Density { h: TestFunction },
    /// Integrand of I_t(H) at time t.
    SymmetricRate { h: TestFunction },
    /// Integrand of A_t(H) at time t.
    AsymmetricRate { h: TestFunction },
    /// I_t(H), integrated exactly.
    SymmetricIntegral { h: TestFunction },
    /// A_t(H), integrated exactly.
    AsymmetricIntegral { h: TestFunction },
    /// M_t(H) = Y_t − Y_0 − I_t − A_t.
    Martingale { h: TestFunction },
    /// Z_t = n^{−1/2}(J_t − E J_t) through the bond at macroscopic `origin`.
    Current { origin: f64, moving: bool },
    /// Y_t(i_ε(x))²
    Quadratic { x: f64, eps: f64 },
}

impl Quantity {
    pub fn test_function(&self) -> Option<&TestFunction> {
        match self {
            Quantity::Density { h }
            | Quantity::SymmetricRate { h }
            | Quantity::AsymmetricRate { h }
            | Quantity::SymmetricIntegral { h }
            | Quantity::AsymmetricIntegral { h }
            | Quantity::Martingale { h } => Some(h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub name: String,
    #[serde(flatten)]
    pub quantity: Quantity,
    /// Evaluate in the lattice frame instead of the moving frame.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub static_frame: bool,
}

impl ObservableSpec {
    pub fn new(name: impl Into<String>, quantity: Quantity) -> Self {
        ObservableSpec {
            name: name.into(),
            quantity,
            static_frame: false,
        }
    }

    pub fn in_static_frame(mut self) -> Self {
        self.static_frame = true;
        self
    }
}

/// Bond index of the macroscopic point u.
pub fn bond_at(u: f64, params: &SimParams) -> usize {
    let x = (u * params.n as f64).round() as i64;
    x.rem_euclid(params.len() as i64) as usize
}

/// E[J_t] under ν_ρ for a fixed bond, or for a bond moving with `frame`
/// (the frame passes ρ particles per site on average).
pub fn mean_current(params: &SimParams, frame: &FrameShift, moving: bool, t: f64) -> f64 {
    let fixed = params.stationary_bond_current() * t;
    if moving {
        fixed - params.rho * frame.lattice_offset(t) as f64
    } else {
        fixed
    }
}

enum Probe {
    Density { kit: usize, h: TestFunction },
    SymRate { kit: usize, h: TestFunction },
    AsymRate { kit: usize, h: TestFunction },
    Integral { tracker: usize },
    Martingale { kit: usize, h: TestFunction, y0: f64, i: usize, a: usize },
    Current { slot: usize, moving: bool },
    Quadratic { kit: usize, x: f64, eps: f64 },
}

/// Result of one simulated trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub series: ObservableSeries,
    pub events: u64,
}

/// Simulate trajectory `index` of `params` from ν_ρ and sample every
/// observable on `grid`; jumps go to `jump_log` when given.
pub fn simulate_trajectory(
    params: &SimParams,
    specs: &[ObservableSpec],
    grid: &[f64],
    index: u64,
    jump_log: Option<&mut dyn Write>,
) -> Result<TrajectoryRun> {
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidParameter("sampling grid must be nondecreasing from t >= 0".into()));
    }
    let horizon = grid.last().copied().unwrap_or(0.0);
    let mut engine = EngineState::spawn_trajectory(params, index)?;
    let moving_kit = FieldKit::new(params)?;
    let kits = [moving_kit.clone(), moving_kit.without_frame()];
    let frame = kits[0].frame;

    let mut trackers: Vec<IntegralTracker> = Vec::new();
    let mut fixed_bonds: Vec<usize> = Vec::new();
    let mut moving_origins: Vec<usize> = Vec::new();
    let mut probes = Vec::with_capacity(specs.len());
    let start = engine.config().clone();
    let mut track = |kit: &FieldKit, h: &TestFunction, term| -> Result<usize> {
        trackers.push(IntegralTracker::new(kit, h, term, &start, horizon)?);
        Ok(trackers.len() - 1)
    };
    for spec in specs {
        let k = spec.static_frame as usize;
        let kit = &kits[k];
        let probe = match &spec.quantity {
            Quantity::Density { h } => Probe::Density { kit: k, h: h.clone() },
            Quantity::SymmetricRate { h } => Probe::SymRate { kit: k, h: h.clone() },
            Quantity::AsymmetricRate { h } => Probe::AsymRate { kit: k, h: h.clone() },
            Quantity::SymmetricIntegral { h } => Probe::Integral {
                tracker: track(kit, h, IntegralTerm::Symmetric)?,
            },
            Quantity::AsymmetricIntegral { h } => Probe::Integral {
                tracker: track(kit, h, IntegralTerm::Asymmetric)?,
            },
            Quantity::Martingale { h } => Probe::Martingale {
                kit: k,
                h: h.clone(),
                y0: kit.density_field(&start, h, 0.0)?,
                i: track(kit, h, IntegralTerm::Symmetric)?,
                a: track(kit, h, IntegralTerm::Asymmetric)?,
            },
            Quantity::Current { origin, moving } => {
                let bond = bond_at(*origin, params);
                let moving = *moving && !spec.static_frame;
                let slot = if moving {
                    moving_origins.push(bond);
                    moving_origins.len() - 1
                } else {
                    fixed_bonds.push(bond);
                    bond
                };
                Probe::Current { slot, moving }
            }
            Quantity::Quadratic { x, eps } => Probe::Quadratic { kit: k, x: *x, eps: *eps },
        };
        probes.push(probe);
    }
    let mut tally = if moving_origins.is_empty() && fixed_bonds.is_empty() {
        None
    } else {
        Some(CurrentTally::new(params.len(), frame).with_moving(&moving_origins))
    };
    let mut log = jump_log.map(JumpLogWriter::new);

    let scale = 1.0 / (params.n as f64).sqrt();
    let mut series = ObservableSeries::new(index);
    let mut row: Vec<(&str, f64)> = Vec::with_capacity(specs.len());
    for &t in grid {
        engine.run_until_with(t, &mut (&mut trackers, &mut tally, &mut log))?;
        if let Some(tally) = tally.as_mut() {
            tally.sync(t, engine.config());
        }
        let config = engine.config();
        row.clear();
        for (spec, probe) in specs.iter().zip(&probes) {
            let v = match probe {
                Probe::Density { kit, h } => kits[*kit].density_field(config, h, t)?,
                Probe::SymRate { kit, h } => kits[*kit].i_term_increment(config, h, t)?,
                Probe::AsymRate { kit, h } => kits[*kit].a_term_increment(config, h, t)?,
                Probe::Integral { tracker } => trackers[*tracker].value_at(t)?,
                Probe::Martingale { kit, h, y0, i, a } => {
                    let y = kits[*kit].density_field(config, h, t)?;
                    let i = trackers[*i].value_at(t)?;
                    let a = trackers[*a].value_at(t)?;
                    y - y0 - i - a
                }
                Probe::Current { slot, moving } => {
                    let tally = tally.as_ref().expect("tally exists for current probes");
                    let j = if *moving {
                        tally.current_moving(*slot)?
                    } else {
                        tally.current_fixed(*slot)?
                    };
                    (j as f64 - mean_current(params, &frame, *moving, t)) * scale
                }
                Probe::Quadratic { kit, x, eps } => kits[*kit].quadratic_field(config, *x, *eps, t)?,
            };
            row.push((spec.name.as_str(), v));
        }
        series.record(t, &row)?;
    }
    if let Some(log) = log {
        log.finish().map_err(|e| Error::io("<jump log>", e))?;
    }
    Ok(TrajectoryRun {
        series,
        events: engine.event_count(),
    })
}
