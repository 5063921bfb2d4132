use super::field::{FieldKit, Kernel};
use super::TestFunction;
use crate::engine::{JumpEvent, JumpObserver};
use crate::error::{Error, Result};
use crate::lattice::{Configuration, LocalFunction};

/// Which time integral of the martingale decomposition to track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralTerm {
    /// I_t(H) = ∫ (1/2√n) Σ ΔⁿT_sH (τ_x h − φ_h) ds
    Symmetric,
    /// A_t(H) = ∫ n^{1−γ}/√n Σ ∇ⁿT_sH τ_xV_f ds
    Asymmetric,
}

#[derive(Debug, Clone, Copy)]
struct Tracked {
    j: i64,
    value: f64,
    since: f64,
}

/// Exact time integral of a smeared local function along a trajectory.
///
/// Between jumps every τ_x g is constant, and the frame moves at constant
/// speed, so each site's contribution integrates in closed form through the
/// primitive of H. Each jump touches O(window) sites.
#[derive(Debug, Clone)]
pub struct IntegralTracker {
    h: TestFunction,
    g: LocalFunction,
    taps: Vec<(i64, f64)>,
    n: f64,
    len: usize,
    velocity: f64,
    prefactor: f64,
    slot: Vec<u32>,
    sites: Vec<Tracked>,
    static_weight: Vec<f64>,
    acc: f64,
    time: f64,
}

const NONE: u32 = u32::MAX;

impl IntegralTracker {
    /// Start tracking at time 0 from `config`; valid up to `horizon`.
    pub fn new(
        kit: &FieldKit,
        h: &TestFunction,
        term: IntegralTerm,
        config: &Configuration,
        horizon: f64,
    ) -> Result<Self> {
        let (kernel, g, prefactor) = match term {
            IntegralTerm::Symmetric => (Kernel::Laplacian, kit.h_centered.clone(), kit.i_prefactor()),
            IntegralTerm::Asymmetric => {
                let pre = if kit.a == 0.0 { 0.0 } else { kit.a_prefactor() };
                (Kernel::Gradient, kit.v_f.clone(), pre)
            }
        };
        let geometry = kit.geometry;
        let velocity = kit.frame.macro_velocity();
        if velocity != 0.0 {
            h.integral(0.0)?;
        }
        let (s0, s1) = {
            let end = kit.frame.d_mac(horizon);
            (end.min(0.0), end.max(0.0))
        };
        let (j_lo, j_hi) = geometry.window(h, kernel, s0, s1)?;
        let taps = kernel.taps(geometry.n);
        let len = geometry.len;
        let mut slot = vec![NONE; len];
        let mut sites = Vec::with_capacity((j_hi - j_lo + 1) as usize);
        let mut static_weight = Vec::new();
        for j in j_lo..=j_hi {
            let x = j.rem_euclid(len as i64) as usize;
            if velocity == 0.0 {
                let w = geometry.weight(h, &taps, j, 0.0);
                if w == 0.0 {
                    continue;
                }
                static_weight.push(w);
            }
            slot[x] = sites.len() as u32;
            sites.push(Tracked {
                j,
                value: g.eval_at(config, x as isize),
                since: 0.0,
            });
        }
        Ok(IntegralTracker {
            h: h.clone(),
            g,
            taps,
            n: geometry.n as f64,
            len,
            velocity,
            prefactor,
            slot,
            sites,
            static_weight,
            acc: 0.0,
            time: 0.0,
        })
    }

    /// ∫_{t0}^{t1} K[T_sH](j/n) ds
    #[inline]
    fn weight_integral(&self, k: usize, j: i64, t0: f64, t1: f64) -> f64 {
        if self.velocity == 0.0 {
            return self.static_weight[k] * (t1 - t0);
        }
        let v = self.velocity;
        let mut s = 0.0;
        for &(o, c) in &self.taps {
            let u = (j + o) as f64 / self.n;
            // ∫ H(u − v s) ds = −(1/v) 𝓗(u − v s)
            let hi = self.h.integral(u - v * t0).unwrap_or(0.0);
            let lo = self.h.integral(u - v * t1).unwrap_or(0.0);
            s += c * (hi - lo);
        }
        s / v
    }

    #[inline]
    fn settle(&mut self, k: usize, t: f64) {
        let site = self.sites[k];
        if site.value != 0.0 && t > site.since {
            self.acc += site.value * self.weight_integral(k, site.j, site.since, t);
        }
        self.sites[k].since = t;
    }

    /// Integral over [0, t] with the configuration held since the last jump.
    pub fn value_at(&mut self, t: f64) -> Result<f64> {
        if t < self.time {
            return Err(Error::TimeReversal {
                requested: t,
                current: self.time,
            });
        }
        for k in 0..self.sites.len() {
            self.settle(k, t);
        }
        self.time = t;
        Ok(self.prefactor * self.acc)
    }

    pub fn tracked_sites(&self) -> usize {
        self.sites.len()
    }
}

impl JumpObserver for IntegralTracker {
    #[inline]
    fn on_jump(&mut self, event: &JumpEvent, config: &Configuration) {
        let len = self.len as isize;
        let b = event.bond as isize;
        let lo = b - self.g.offset - self.g.width as isize + 1;
        let hi = b + 1 - self.g.offset;
        for x in lo..=hi {
            let site = x.rem_euclid(len) as usize;
            let k = self.slot[site];
            if k == NONE {
                continue;
            }
            let k = k as usize;
            self.settle(k, event.time);
            self.sites[k].value = self.g.eval_at(config, site as isize);
        }
        self.time = self.time.max(event.time);
    }
}
