use serde::{Deserialize, Serialize};

use super::local::{Bernstein, LocalFunction};
use super::RateModel;
use crate::error::{Error, Result};

/// Thermodynamic functions at one density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoFunctions {
    pub rho: f64,
    pub phi_h: f64,
    pub phi_h_prime: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub beta_double_prime: f64,
    pub chi: f64,
}

/// χ(ρ) = ρ(1 − ρ).
#[inline]
pub fn chi(rho: f64) -> f64 {
    rho * (1.0 - rho)
}

/// Exact polynomials in ρ for φ_h, β and the stationary bond fluxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoPolys {
    pub phi_h: Bernstein,
    pub phi_h_prime: Bernstein,
    pub beta: Bernstein,
    pub beta_prime: Bernstein,
    pub beta_double_prime: Bernstein,
    /// E[c η(0)(1 − η(1))]
    pub forward_activity: Bernstein,
    /// E[c η(1)(1 − η(0))]
    pub backward_activity: Bernstein,
    /// E[c (η(1) − η(0))²]
    pub exchange_activity: Bernstein,
}

impl ThermoPolys {
    pub fn new(model: &RateModel, h: &LocalFunction, cap: usize) -> Result<Self> {
        let phi_h = h.expectation(cap)?;
        // β = χ E[c]: append two fresh sites ξ, ξ' and average c ξ (1 − ξ')
        let c = model.local();
        let beta = LocalFunction::from_fn(c.offset, c.width + 2, |o| {
            let w = c.width;
            c.eval_local(&o[..w]) * (o[w] * (1 - o[w + 1])) as f64
        })
        .expectation(cap)?;
        let b0 = (-c.offset) as usize;
        let activity = |g: fn(u8, u8) -> f64| {
            LocalFunction::from_fn(c.offset, c.width, |o| c.eval_local(o) * g(o[b0], o[b0 + 1]))
                .expectation(cap)
        };
        let forward_activity = activity(|e0, e1| (e0 * (1 - e1)) as f64)?;
        let backward_activity = activity(|e0, e1| (e1 * (1 - e0)) as f64)?;
        let exchange_activity = activity(|e0, e1| (e1 as f64 - e0 as f64).powi(2))?;
        let phi_h_prime = phi_h.derivative();
        let beta_prime = beta.derivative();
        let beta_double_prime = beta_prime.derivative();
        Ok(ThermoPolys {
            phi_h,
            phi_h_prime,
            beta,
            beta_prime,
            beta_double_prime,
            forward_activity,
            backward_activity,
            exchange_activity,
        })
    }

    pub fn at(&self, rho: f64) -> ThermoFunctions {
        ThermoFunctions {
            rho,
            phi_h: self.phi_h.eval(rho),
            phi_h_prime: self.phi_h_prime.eval(rho),
            beta: self.beta.eval(rho),
            beta_prime: self.beta_prime.eval(rho),
            beta_double_prime: self.beta_double_prime.eval(rho),
            chi: chi(rho),
        }
    }
}

/// All six thermodynamic functions at `rho` by exact enumeration.
pub fn thermo(model: &RateModel, h: &LocalFunction, rho: f64, cap: usize) -> Result<ThermoFunctions> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::DegenerateDensity(rho));
    }
    Ok(ThermoPolys::new(model, h, cap)?.at(rho))
}
