//! Event-driven simulation of the weakly asymmetric exclusion generator.
//!
//! Time is field time: the n² diffusive speed-up is folded into the bond
//! rates, so `run_until(t)` advances the process to η^n_t = η_{tn²}.

mod jumplog;
mod table;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

pub use jumplog::{read_jump_log, replay, JumpLogWriter, JumpRecord, JUMP_RECORD_BYTES};

use crate::error::{Error, Result};
use crate::lattice::{Asymmetry, Configuration, ThermoFunctions, ValidatedModel};
use table::RateTable;

/// Events between full rebuilds of the rate table.
pub const REBUILD_INTERVAL: u64 = 1_000_000;

/// Identifier of the per-trajectory seed derivation, recorded in manifests.
pub const SEED_DERIVATION: &str = "chacha8(seed_from_u64(master)).set_stream(index)";

/// Physics and discretization of one experiment.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub n: usize,
    pub gamma: f64,
    pub a: f64,
    pub rho: f64,
    /// Torus length in macroscopic units; the torus has `torus_multiplier * n` sites.
    pub torus_multiplier: usize,
    pub horizon: f64,
    pub seed: u64,
    pub model: Arc<ValidatedModel>,
}

impl SimParams {
    pub fn new(n: usize, gamma: f64, a: f64, rho: f64, model: Arc<ValidatedModel>) -> Result<Self> {
        let p = SimParams {
            n,
            gamma,
            a,
            rho,
            torus_multiplier: 4,
            horizon: 1.0,
            seed: 0,
            model,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn ssep(n: usize, gamma: f64, a: f64, rho: f64) -> Result<Self> {
        Self::new(n, gamma, a, rho, Arc::new(ValidatedModel::ssep()))
    }

    pub fn with_torus(mut self, multiplier: usize) -> Self {
        self.torus_multiplier = multiplier;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        Asymmetry::new(self.n, self.gamma, self.a)?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("density {} outside [0, 1]", self.rho)));
        }
        if self.torus_multiplier == 0 || self.len() < 2 {
            return Err(Error::InvalidParameter("torus needs at least 2 sites".into()));
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!("horizon {} < 0", self.horizon)));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.torus_multiplier * self.n
    }

    pub fn asymmetry(&self) -> Asymmetry {
        Asymmetry {
            n: self.n,
            gamma: self.gamma,
            a: self.a,
        }
    }

    pub fn p(&self) -> f64 {
        self.asymmetry().p()
    }

    pub fn q(&self) -> f64 {
        self.asymmetry().q()
    }

    pub fn thermo(&self) -> ThermoFunctions {
        self.model.thermo(self.rho)
    }

    /// Mean signed current per unit field time through a fixed bond under ν_ρ.
    pub fn stationary_bond_current(&self) -> f64 {
        let polys = self.model.polys();
        let speed = (self.n * self.n) as f64;
        speed
            * (self.p() * polys.forward_activity.eval(self.rho)
                - self.q() * polys.backward_activity.eval(self.rho))
    }

    /// E_{ν_ρ}[total rate] = n² L (p E[cη(0)(1−η(1))] + q E[cη(1)(1−η(0))]).
    pub fn stationary_total_rate(&self) -> f64 {
        let polys = self.model.polys();
        let speed = (self.n * self.n) as f64;
        speed
            * self.len() as f64
            * (self.p() * polys.forward_activity.eval(self.rho)
                + self.q() * polys.backward_activity.eval(self.rho))
    }

    pub fn require_fluctuation_density(&self) -> Result<()> {
        if self.rho > 0.0 && self.rho < 1.0 {
            Ok(())
        } else {
            Err(Error::DegenerateDensity(self.rho))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// x → x+1
    Forward,
    /// x+1 → x
    Backward,
}

impl Direction {
    #[inline]
    pub fn sign(self) -> i64 {
        match self {
            Direction::Forward => 1,
            Direction::Backward => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    /// Field time at which the jump happened.
    pub time: f64,
    /// Waiting time since the previous event (or since the last sampled time).
    pub dt: f64,
    pub bond: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Jump(JumpEvent),
    /// Every bond rate is zero.
    Frozen,
}

/// Called once per executed jump, after the swap has been applied.
pub trait JumpObserver {
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration);
}

impl JumpObserver for () {
    #[inline]
    fn on_jump(&mut self, _: &JumpEvent, _: &Configuration) {}
}

impl<T: JumpObserver + ?Sized> JumpObserver for &mut T {
    #[inline]
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration) {
        (**self).on_jump(event, config)
    }
}

impl<T: JumpObserver> JumpObserver for Option<T> {
    #[inline]
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration) {
        if let Some(o) = self {
            o.on_jump(event, config);
        }
    }
}

impl<T: JumpObserver> JumpObserver for Vec<T> {
    #[inline]
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration) {
        for o in self.iter_mut() {
            o.on_jump(event, config);
        }
    }
}

impl<A: JumpObserver, B: JumpObserver> JumpObserver for (A, B) {
    #[inline]
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration) {
        self.0.on_jump(event, config);
        self.1.on_jump(event, config);
    }
}

impl<A: JumpObserver, B: JumpObserver, C: JumpObserver> JumpObserver for (A, B, C) {
    #[inline]
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration) {
        self.0.on_jump(event, config);
        self.1.on_jump(event, config);
        self.2.on_jump(event, config);
    }
}

/// Records every jump; handy in tests and for scripted replays.
#[derive(Debug, Default, Clone)]
pub struct JumpRecorder {
    pub events: Vec<JumpEvent>,
}

impl JumpObserver for JumpRecorder {
    fn on_jump(&mut self, event: &JumpEvent, _: &Configuration) {
        self.events.push(*event);
    }
}

/// One trajectory of the process.
#[derive(Debug, Clone)]
pub struct EngineState {
    params: SimParams,
    config: Configuration,
    time: f64,
    rng: ChaCha8Rng,
    table: RateTable,
    /// Absolute time of the next event, already drawn but not yet executed.
    pending: Option<f64>,
    events: u64,
    since_rebuild: u64,
}

impl EngineState {
    /// Trajectory 0 of `params`, started from ν_ρ.
    pub fn init(params: &SimParams) -> Result<Self> {
        Self::spawn_trajectory(params, 0)
    }

    /// Trajectory `index`, started from ν_ρ with the rng stream `index` of the master seed.
    pub fn spawn_trajectory(params: &SimParams, index: u64) -> Result<Self> {
        params.validate()?;
        params.require_fluctuation_density()?;
        let mut rng = trajectory_rng(params.seed, index);
        let config = Configuration::bernoulli_with(params.len(), params.rho, &mut rng)?;
        Self::from_parts(params, config, rng)
    }

    /// Start from a given configuration; no density restriction.
    pub fn with_config(params: &SimParams, config: Configuration, index: u64) -> Result<Self> {
        params.validate()?;
        let rng = trajectory_rng(params.seed, index);
        Self::from_parts(params, config, rng)
    }

    /// Start from a configuration drawn by `sample` out of the trajectory's own stream.
    pub fn with_sampler<F>(params: &SimParams, index: u64, sample: F) -> Result<Self>
    where
        F: FnOnce(&mut ChaCha8Rng) -> Result<Configuration>,
    {
        params.validate()?;
        let mut rng = trajectory_rng(params.seed, index);
        let config = sample(&mut rng)?;
        Self::from_parts(params, config, rng)
    }

    fn from_parts(params: &SimParams, config: Configuration, rng: ChaCha8Rng) -> Result<Self> {
        if config.len() != params.len() {
            return Err(Error::InvalidParameter(format!(
                "configuration has {} sites, parameters need {}",
                config.len(),
                params.len()
            )));
        }
        let asym = params.asymmetry();
        let table = RateTable::new(
            params.model.model(),
            asym.speedup(),
            asym.p(),
            asym.q(),
            &config,
        );
        Ok(EngineState {
            params: params.clone(),
            config,
            time: 0.0,
            rng,
            table,
            pending: None,
            events: 0,
            since_rebuild: 0,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn total_rate(&self) -> f64 {
        self.table.total()
    }

    /// Per-bond (forward, backward) rates as maintained incrementally.
    pub fn bond_rates(&self) -> Vec<(f64, f64)> {
        (0..self.config.len()).map(|b| self.table.bond_rate(b)).collect()
    }

    /// Rates straight from the generator: n² c_x(η) p_n η(x)(1−η(x+1)) and
    /// n² c_x(η) q_n η(x+1)(1−η(x)).
    pub fn recomputed_bond_rates(&self) -> Vec<(f64, f64)> {
        let asym = self.params.asymmetry();
        let model = self.params.model.model();
        (0..self.config.len())
            .map(|x| {
                let c = model.rate_at(&self.config, x as isize);
                let ex = self.config.at(x as isize) as f64;
                let ey = self.config.at(x as isize + 1) as f64;
                (
                    asym.speedup() * c * asym.p() * ex * (1.0 - ey),
                    asym.speedup() * c * asym.q() * ey * (1.0 - ex),
                )
            })
            .collect()
    }

    /// Largest relative deviation between the maintained and recomputed rate tables,
    /// including the cached total.
    pub fn rate_table_deviation(&self) -> f64 {
        let fresh = self.recomputed_bond_rates();
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        let mut worst = 0.0f64;
        let mut sum = 0.0;
        for (b, (f, r)) in fresh.iter().enumerate() {
            let (tf, tr) = self.table.bond_rate(b);
            worst = worst.max(rel(*f, tf)).max(rel(*r, tr));
            sum += f + r;
        }
        worst.max(rel(sum, self.table.total()))
    }

    pub fn rebuild_rates(&mut self) {
        self.table.rebuild(&self.config);
        self.since_rebuild = 0;
    }

    pub fn rate_class_count(&self) -> usize {
        self.table.class_count()
    }

    /// Execute one jump.
    pub fn step(&mut self) -> StepOutcome {
        self.step_with(&mut ())
    }

    pub fn step_with<O: JumpObserver>(&mut self, obs: &mut O) -> StepOutcome {
        let total = self.table.total();
        if total <= 0.0 {
            self.pending = None;
            return StepOutcome::Frozen;
        }
        let next = match self.pending.take() {
            Some(t) => t,
            None => self.time + self.draw_wait(total),
        };
        StepOutcome::Jump(self.execute(next, total, obs))
    }

    #[inline]
    fn draw_wait(&mut self, total: f64) -> f64 {
        let e: f64 = self.rng.sample(Exp1);
        e / total
    }

    #[inline]
    fn execute<O: JumpObserver>(&mut self, at: f64, total: f64, obs: &mut O) -> JumpEvent {
        let u: f64 = self.rng.random();
        let (bond, forward) = self.table.pick(u, total);
        self.config.swap_bond(bond);
        self.table.refresh_around(&self.config, bond);
        let event = JumpEvent {
            time: at,
            dt: at - self.time,
            bond,
            direction: if forward {
                Direction::Forward
            } else {
                Direction::Backward
            },
        };
        self.time = at;
        self.events += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_INTERVAL {
            self.rebuild_rates();
        }
        obs.on_jump(&event, &self.config);
        event
    }

    pub fn run_until(&mut self, target: f64) -> Result<()> {
        self.run_until_with(target, &mut ())
    }

    /// Execute every jump up to `target`, then set the clock to exactly `target`.
    ///
    /// The first event beyond `target` is kept pending, so the trajectory does
    /// not depend on how the time axis is cut into calls.
    pub fn run_until_with<O: JumpObserver>(&mut self, target: f64, obs: &mut O) -> Result<()> {
        if target < self.time {
            return Err(Error::TimeReversal {
                requested: target,
                current: self.time,
            });
        }
        loop {
            let total = self.table.total();
            if total <= 0.0 {
                self.pending = None;
                break;
            }
            let next = match self.pending {
                Some(t) => t,
                None => self.time + self.draw_wait(total),
            };
            if next > target {
                self.pending = Some(next);
                break;
            }
            self.pending = None;
            self.execute(next, total, obs);
        }
        self.time = target;
        Ok(())
    }
}

/// The rng of trajectory `index`: ChaCha8 keyed by the master seed, on stream `index`.
pub fn trajectory_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{RateModel, ValidatedModel};

    fn ssep(n: usize, a: f64, rho: f64) -> SimParams {
        SimParams::ssep(n, 1.0, a, rho).unwrap()
    }

    #[test]
    fn forward_rate_substitution() {
        // n=2, a=1, γ=1: p = 3/4, fwd rate 4 * 1 * 0.75 = 3
        let params = ssep(2, 1.0, 0.5).with_torus(2);
        let config = Configuration::new(vec![1, 0, 0, 0]).unwrap();
        let state = EngineState::with_config(&params, config, 0).unwrap();
        let rates = state.bond_rates();
        assert_eq!(rates[0], (3.0, 0.0));
        assert_eq!(rates[3], (0.0, 1.0));
        assert_eq!(rates[1], (0.0, 0.0));
        assert_eq!(state.total_rate(), 4.0);
    }

    #[test]
    fn full_torus_is_frozen() {
        let params = ssep(4, 1.0, 0.5);
        let config = Configuration::full(params.len()).unwrap();
        let mut state = EngineState::with_config(&params, config, 0).unwrap();
        assert_eq!(state.total_rate(), 0.0);
        assert_eq!(state.step(), StepOutcome::Frozen);
        state.run_until(2.0).unwrap();
        assert_eq!(state.time(), 2.0);
        assert_eq!(state.event_count(), 0);
    }

    #[test]
    fn symmetric_rates_mirror() {
        let params = ssep(8, 0.0, 0.5);
        let state = EngineState::init(&params).unwrap();
        let len = params.len();
        let mirrored = Configuration::new(
            (0..len).map(|x| state.config().get(len - 1 - x)).collect(),
        )
        .unwrap();
        let other = EngineState::with_config(&params, mirrored, 0).unwrap();
        let a = state.bond_rates();
        let b = other.bond_rates();
        for x in 0..len {
            // bond {x, x+1} maps to bond {L-2-x, L-1-x}
            let y = (2 * len - 2 - x) % len;
            assert_eq!(a[x].0, b[y].1);
            assert_eq!(a[x].1, b[y].0);
        }
    }

    #[test]
    fn degenerate_density_refused() {
        assert!(matches!(
            EngineState::init(&ssep(4, 0.0, 0.0)),
            Err(Error::DegenerateDensity(_))
        ));
        assert!(EngineState::init(&ssep(4, 0.0, 1.0)).is_err());
    }

    #[test]
    fn run_until_same_time_is_noop() {
        let params = ssep(8, 1.0, 0.5);
        let mut state = EngineState::init(&params).unwrap();
        state.run_until(0.1).unwrap();
        let before = state.config().clone();
        let events = state.event_count();
        state.run_until(0.1).unwrap();
        assert_eq!(state.config(), &before);
        assert_eq!(state.event_count(), events);
        assert!(state.run_until(0.05).is_err());
    }

    #[test]
    fn determinism_and_grid_independence() {
        let params = ssep(16, 1.0, 0.4).with_seed(7);
        let mut one = EngineState::spawn_trajectory(&params, 3).unwrap();
        let mut rec_one = JumpRecorder::default();
        one.run_until_with(0.5, &mut rec_one).unwrap();

        let mut two = EngineState::spawn_trajectory(&params, 3).unwrap();
        let mut rec_two = JumpRecorder::default();
        for k in 1..=50 {
            two.run_until_with(0.01 * k as f64, &mut rec_two).unwrap();
        }
        two.run_until_with(0.5, &mut rec_two).unwrap();
        assert_eq!(one.config(), two.config());
        assert_eq!(rec_one.events.len(), rec_two.events.len());
        for (a, b) in rec_one.events.iter().zip(&rec_two.events) {
            assert_eq!(a.time.to_bits(), b.time.to_bits());
            assert_eq!((a.bond, a.direction), (b.bond, b.direction));
        }
    }

    #[test]
    fn distinct_indices_distinct_starts() {
        let params = ssep(64, 0.0, 0.5).with_seed(11);
        let a = EngineState::spawn_trajectory(&params, 0).unwrap();
        let b = EngineState::spawn_trajectory(&params, 1).unwrap();
        assert_ne!(a.config(), b.config());
        let c = EngineState::spawn_trajectory(&params, 1).unwrap();
        assert_eq!(b.config(), c.config());
    }

    #[test]
    fn conservation_at_n64() {
        let params = ssep(64, 1.0, 0.5);
        let mut state = EngineState::init(&params).unwrap();
        let n0 = state.config().particle_count();
        state.run_until(1.0).unwrap();
        assert_eq!(state.config().particle_count(), n0);
        assert!(state.event_count() > 0);
    }

    #[test]
    fn table_consistent_after_many_steps() {
        let model = Arc::new(ValidatedModel::new(RateModel::gradient_example(0.5).unwrap()).unwrap());
        let params = SimParams::new(16, 0.5, 1.0, 0.35, model).unwrap();
        let mut state = EngineState::init(&params).unwrap();
        for _ in 0..20_000 {
            state.step();
        }
        assert!(state.rate_table_deviation() < 1e-9);
        // SSEP with rebuild crossing
        let mut s = EngineState::init(&ssep(8, 1.0, 0.5)).unwrap();
        for _ in 0..(REBUILD_INTERVAL + 10) {
            s.step();
        }
        assert!(s.rate_table_deviation() < 1e-9);
    }

    #[test]
    fn single_particle_jump_rate() {
        // a = 0: total rate n² and mean n² jumps per unit time
        let n = 8;
        let params = ssep(n, 0.0, 0.5);
        let mut config = Configuration::empty(params.len()).unwrap();
        config.set(5, 1);
        let mut counts = Vec::new();
        for k in 0..400 {
            let mut s = EngineState::with_config(&params, config.clone(), k).unwrap();
            assert_eq!(s.total_rate(), (n * n) as f64);
            s.run_until(1.0).unwrap();
            counts.push(s.event_count() as f64);
        }
        let m = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / m;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let se = (var / m).sqrt();
        assert!((mean - (n * n) as f64).abs() < 3.0 * se, "mean {mean} se {se}");
    }
}
