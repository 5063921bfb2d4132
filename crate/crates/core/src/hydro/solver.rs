use crate::error::{Error, Result};
use crate::lattice::{Bernstein, ThermoPolys};

use super::DensityProfile;

/// Monomial coefficients, lowest order first, evaluated by Horner's rule.
#[derive(Debug, Clone)]
struct Poly(Vec<f64>);

impl Poly {
    fn from_bernstein(b: &Bernstein) -> Self {
        Poly(b.to_monomial())
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Upper bound of |p| on [0, 1]: the largest Bernstein coefficient.
fn bernstein_bound(b: &Bernstein) -> f64 {
    b.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

/// Time step and step count chosen for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub steps: usize,
    /// The monotone-scheme limit 1/(max φ'/Δx² + |a| max|β'|/Δx).
    pub limit: f64,
}

/// dt = safety · min(Δx²/max φ', Δx/(|a| max|β'|)), shrunk to land on `t`.
pub fn plan_steps(polys: &ThermoPolys, a: f64, t: f64, dx: f64, safety: f64) -> Result<StepPlan> {
    if !(safety > 0.0) || !(t >= 0.0) || !(dx > 0.0) {
        return Err(Error::InvalidParameter(format!("safety {safety}, horizon {t}, dx {dx}")));
    }
    let diff = bernstein_bound(&polys.phi_h_prime) / (dx * dx);
    let adv = a.abs() * bernstein_bound(&polys.beta_prime) / dx;
    let rate = diff + adv;
    if rate == 0.0 {
        return Ok(StepPlan {
            dt: t,
            steps: if t > 0.0 { 1 } else { 0 },
            limit: f64::INFINITY,
        });
    }
    let limit = 1.0 / rate;
    let base = [diff, adv]
        .iter()
        .filter(|r| **r > 0.0)
        .map(|r| 1.0 / r)
        .fold(f64::INFINITY, f64::min);
    let dt = safety * base;
    if dt > limit {
        return Err(Error::Cfl { dt, limit });
    }
    let steps = (t / dt).ceil() as usize;
    Ok(StepPlan {
        dt: if steps > 0 { t / steps as f64 } else { dt },
        steps,
        limit,
    })
}

/// ∂_tρ = ½Δφ_h(ρ) − a∇β(ρ) on the periodic grid of `profile`.
///
/// Conservative explicit update: centered second difference of φ_h, upwind
/// flux of aβ with the direction taken from aβ' at the interface midpoint.
pub fn solve_burgers(
    profile: &DensityProfile,
    polys: &ThermoPolys,
    a: f64,
    t: f64,
    safety: f64,
) -> Result<DensityProfile> {
    let plan = plan_steps(polys, a, t, profile.dx, safety)?;
    evolve(profile, polys, a, plan)
}

pub fn evolve(profile: &DensityProfile, polys: &ThermoPolys, a: f64, plan: StepPlan) -> Result<DensityProfile> {
    if plan.dt > plan.limit {
        return Err(Error::Cfl {
            dt: plan.dt,
            limit: plan.limit,
        });
    }
    let phi = Poly::from_bernstein(&polys.phi_h);
    let beta = Poly::from_bernstein(&polys.beta);
    let beta_prime = Poly::from_bernstein(&polys.beta_prime);
    let dx = profile.dx;
    let len = profile.len();
    let diff = 0.5 * plan.dt / (dx * dx);
    let adv = plan.dt / dx;

    let mut rho = profile.values.clone();
    let mut phi_v = vec![0.0; len];
    let mut flux_v = vec![0.0; len];
    // flux[i] sits on the interface i + 1/2
    let mut flux = vec![0.0; len];
    for step in 0..plan.steps {
        for i in 0..len {
            phi_v[i] = phi.eval(rho[i]);
            flux_v[i] = a * beta.eval(rho[i]);
        }
        if a != 0.0 {
            for i in 0..len {
                let j = if i + 1 == len { 0 } else { i + 1 };
                let speed = a * beta_prime.eval(0.5 * (rho[i] + rho[j]));
                flux[i] = if speed >= 0.0 { flux_v[i] } else { flux_v[j] };
            }
        }
        for i in 0..len {
            let l = if i == 0 { len - 1 } else { i - 1 };
            let r = if i + 1 == len { 0 } else { i + 1 };
            rho[i] += diff * (phi_v[r] - 2.0 * phi_v[i] + phi_v[l]) - adv * (flux[i] - flux[l]);
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
    }
    Ok(DensityProfile { dx, values: rho })
}
