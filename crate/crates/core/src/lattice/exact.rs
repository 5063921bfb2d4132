//! Full-generator checks on small tori.

use serde::{Deserialize, Serialize};

use super::RateModel;
use crate::error::{Error, Result};

/// Largest torus for which the 2^L-state generator is enumerated.
pub const MAX_EXACT_LEN: usize = 14;

/// Jump bias p_n = (1 + a/n^γ)/2 and the diffusive speed-up n².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymmetry {
    pub n: usize,
    pub gamma: f64,
    pub a: f64,
}

impl Asymmetry {
    pub fn new(n: usize, gamma: f64, a: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n must be >= 2, got {n}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        let s = Asymmetry { n, gamma, a };
        if !(a >= 0.0) || s.bias() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "asymmetry a={a} gives a/n^gamma outside [0, 1]"
            )));
        }
        Ok(s)
    }

    pub fn symmetric(n: usize) -> Self {
        Asymmetry { n, gamma: 1.0, a: 0.0 }
    }

    /// a / n^γ = p_n − q_n.
    #[inline]
    pub fn bias(&self) -> f64 {
        self.a / (self.n as f64).powf(self.gamma)
    }

    #[inline]
    pub fn p(&self) -> f64 {
        0.5 * (1.0 + self.bias())
    }

    #[inline]
    pub fn q(&self) -> f64 {
        1.0 - self.p()
    }

    #[inline]
    pub fn speedup(&self) -> f64 {
        (self.n * self.n) as f64
    }
}

fn check_len(model: &RateModel, len: usize) -> Result<()> {
    if len > MAX_EXACT_LEN {
        return Err(Error::SystemTooLarge {
            len,
            max: MAX_EXACT_LEN,
        });
    }
    if len < model.window_width().max(2) {
        return Err(Error::InvalidParameter(format!(
            "torus of {len} sites is smaller than the rate window of {}",
            model.window_width()
        )));
    }
    Ok(())
}

#[inline]
fn site(state: usize, x: isize, len: usize) -> u8 {
    ((state >> x.rem_euclid(len as isize)) & 1) as u8
}

#[inline]
fn rate_c(model: &RateModel, state: usize, x: usize, len: usize) -> f64 {
    let c = model.local();
    let mut bits = 0;
    for i in 0..c.width {
        bits |= (site(state, x as isize + c.offset + i as isize, len) as usize) << i;
    }
    c.values[bits]
}

fn product_weight(state: usize, len: usize, rho: f64) -> f64 {
    let k = (state & ((1 << len) - 1)).count_ones() as i32;
    rho.powi(k) * (1.0 - rho).powi(len as i32 - k)
}

/// max over states of |(ν_ρ 𝓛_n)(state)| for the full weakly asymmetric generator.
pub fn exact_invariance_residual(
    model: &RateModel,
    len: usize,
    asym: Asymmetry,
    rho: f64,
) -> Result<f64> {
    check_len(model, len)?;
    super::config::check_density(rho)?;
    let states = 1usize << len;
    let (p, q) = (asym.p(), asym.q());
    let speed = asym.speedup();
    let mut flow = vec![0.0f64; states];
    for state in 0..states {
        let w = product_weight(state, len, rho);
        if w == 0.0 {
            continue;
        }
        for x in 0..len {
            let y = (x + 1) % len;
            let (ex, ey) = (site(state, x as isize, len), site(state, y as isize, len));
            if ex == ey {
                continue;
            }
            let dir = if ex == 1 { p } else { q };
            let rate = speed * rate_c(model, state, x, len) * dir;
            let target = state ^ (1 << x) ^ (1 << y);
            flow[target] += w * rate;
            flow[state] -= w * rate;
        }
    }
    Ok(flow.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// max over (η, x) of |ν(η) r(η→η^{x,x+1}) − ν(η^{x,x+1}) r(η^{x,x+1}→η)| at p = q = 1/2.
pub fn detailed_balance_residual(model: &RateModel, rho: f64, len: usize) -> Result<f64> {
    check_len(model, len)?;
    super::config::check_density(rho)?;
    let mut worst = 0.0f64;
    for state in 0..1usize << len {
        for x in 0..len {
            let y = (x + 1) % len;
            if site(state, x as isize, len) == site(state, y as isize, len) {
                continue;
            }
            let target = state ^ (1 << x) ^ (1 << y);
            let forward = product_weight(state, len, rho) * 0.5 * rate_c(model, state, x, len);
            let backward = product_weight(target, len, rho) * 0.5 * rate_c(model, target, x, len);
            worst = worst.max((forward - backward).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_values() {
        let s = Asymmetry::new(2, 1.0, 1.0).unwrap();
        assert_eq!(s.p(), 0.75);
        assert_eq!(s.q(), 0.25);
        let sym = Asymmetry::symmetric(10);
        assert_eq!(sym.p(), 0.5);
        assert_eq!(sym.p(), sym.q());
        assert!(Asymmetry::new(2, 1.0, 3.0).is_err());
        assert!(Asymmetry::new(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn ssep_invariance() {
        let asym = Asymmetry::new(4, 1.0, 1.0).unwrap();
        let r = exact_invariance_residual(&RateModel::ssep(), 6, asym, 0.4).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn empty_state_absorbing() {
        let r = exact_invariance_residual(&RateModel::ssep(), 6, Asymmetry::symmetric(4), 0.0).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(detailed_balance_residual(&RateModel::ssep(), 0.0, 6).unwrap(), 0.0);
    }

    #[test]
    fn ssep_detailed_balance() {
        assert!(detailed_balance_residual(&RateModel::ssep(), 0.3, 6).unwrap() < 1e-15);
    }

    #[test]
    fn exchange_symmetric_neighbourhood_is_reversible() {
        let m = RateModel::gradient_example(0.5).unwrap();
        assert!(detailed_balance_residual(&m, 0.5, 8).unwrap() < 1e-12);
        let sym = Asymmetry::symmetric(4);
        assert!(exact_invariance_residual(&m, 6, sym, 0.3).unwrap() < 1e-12);
    }

    #[test]
    fn rate_depending_on_bond_breaks_reversibility() {
        // c = 1 + η(0): differs before and after the exchange
        let m = RateModel::from_fn("tilted", 0, |o| 1.0 + o[0] as f64).unwrap();
        assert!(detailed_balance_residual(&m, 0.5, 6).unwrap() > 1e-3);
    }

    #[test]
    fn too_large_rejected() {
        assert!(matches!(
            exact_invariance_residual(&RateModel::ssep(), 15, Asymmetry::symmetric(4), 0.5),
            Err(Error::SystemTooLarge { .. })
        ));
        assert!(detailed_balance_residual(&RateModel::gradient_example(0.5).unwrap(), 0.5, 3).is_err());
    }
}
