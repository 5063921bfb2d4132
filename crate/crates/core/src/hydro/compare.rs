use serde::{Deserialize, Serialize};

use super::{sample_profile_with, solve_burgers, DensityProfile};
use crate::analytics::run_ensemble;
use crate::engine::{EngineState, SimParams};
use crate::error::{Error, Result};
use crate::lattice::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroOptions {
    pub trajectories: u64,
    pub workers: usize,
    /// CFL safety factor of the PDE solve.
    pub safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroComparison {
    /// Window-normalized L¹ distance between the ensemble-mean block profile and the PDE.
    pub l1: f64,
    /// E|noise| of the ensemble-mean blocks, in the same norm: the value `l1` takes for a perfect PDE.
    pub noise_floor: f64,
    /// Mean over trajectories of the single-trajectory L¹ distance.
    pub trajectory_l1: f64,
    pub trajectory_l1_stderr: f64,
    pub block_sites: usize,
    pub blocks_used: usize,
    /// Macroscopic window [lo, hi] kept away from the wrap point.
    pub window: (f64, f64),
    pub trajectories: u64,
    /// Block averages of the PDE solution over all full blocks.
    pub pde_blocks: Vec<f64>,
    /// Ensemble-mean block averages over all full blocks.
    pub empirical_blocks: Vec<f64>,
}

/// Averages over consecutive blocks of `block` sites; a trailing partial block is dropped.
pub fn block_average(values: impl Fn(usize) -> f64, len: usize, block: usize) -> Vec<f64> {
    (0..len / block)
        .map(|b| (b * block..(b + 1) * block).map(&values).sum::<f64>() / block as f64)
        .collect()
}

fn config_blocks(config: &Configuration, block: usize) -> Vec<f64> {
    block_average(|x| config.get(x) as f64, config.len(), block)
}

/// Ensemble from the product measure of `profile`, compared at time `t` with
/// the Burgers solution on the lattice grid Δx = 1/n.
pub fn hydro_compare(
    params: &SimParams,
    profile: &DensityProfile,
    t: f64,
    opts: &HydroOptions,
) -> Result<HydroComparison> {
    if params.gamma != 1.0 {
        log::warn!("hydro comparison at gamma = {} is exploratory; the limit is stated for gamma = 1", params.gamma);
    }
    let (n, m) = (params.n, params.torus_multiplier);
    let len = params.len();
    let nf = n as f64;
    if (profile.period() - m as f64).abs() > 1e-9 * m as f64 {
        return Err(Error::GridMismatch(format!(
            "profile period {} does not match the torus length {m}",
            profile.period()
        )));
    }
    let lattice_profile = if profile.len() == len {
        profile.clone()
    } else {
        DensityProfile::from_fn(n, m, |u| profile.at(u))?
    };
    let polys = params.model.polys();
    let pde = solve_burgers(&lattice_profile, polys, params.a, t, opts.safety)?;

    let block = (nf.sqrt().ceil() as usize).max(1);
    let pde_blocks = block_average(|x| pde.values[x], len, block);
    let nb = pde_blocks.len();
    let diffusivity = polys.phi_h_prime.coeffs().iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let margin = 2.0 * (diffusivity * t).sqrt();
    let window = (margin, m as f64 - margin);
    let width = block as f64 / nf;
    let used: Vec<usize> = (0..nb)
        .filter(|&b| b as f64 * width >= window.0 && (b + 1) as f64 * width <= window.1)
        .collect();
    if used.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "comparison window {window:?} holds no full block; enlarge the torus"
        )));
    }
    let window_len = used.len() as f64 * width;

    let mut names: Vec<String> = (0..nb).map(|b| format!("b{b}")).collect();
    names.push("l1".into());
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let outcome = run_ensemble(&name_refs, opts.trajectories, opts.workers, |id| {
        let mut engine =
            EngineState::with_sampler(params, id, |rng| sample_profile_with(&lattice_profile, n, m, rng))?;
        engine.run_until(t)?;
        let mut values = config_blocks(engine.config(), block);
        let l1 = used.iter().map(|&b| (values[b] - pde_blocks[b]).abs()).sum::<f64>() * width / window_len;
        values.push(l1);
        Ok((values, ()))
    })?
    .into_complete()?;

    let empirical_blocks: Vec<f64> = (0..nb).map(|b| outcome.mean(b)).collect();
    let l1 = used
        .iter()
        .map(|&b| (empirical_blocks[b] - pde_blocks[b]).abs())
        .sum::<f64>()
        * width
        / window_len;
    let noise_floor = used
        .iter()
        .map(|&b| (2.0 / std::f64::consts::PI).sqrt() * outcome.stderr(b))
        .sum::<f64>()
        * width
        / window_len;
    let (trajectory_l1, trajectory_l1_stderr) = outcome.estimate("l1")?;
    Ok(HydroComparison {
        l1,
        noise_floor,
        trajectory_l1,
        trajectory_l1_stderr,
        block_sites: block,
        blocks_used: used.len(),
        window,
        trajectories: opts.trajectories,
        pde_blocks,
        empirical_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks() {
        let b = block_average(|x| x as f64, 7, 3);
        assert_eq!(b, vec![1.0, 4.0]);
    }

    #[test]
    fn constant_profile_small_distance() {
        let params = SimParams::ssep(64, 1.0, 1.0, 0.5).unwrap().with_torus(4).with_seed(2);
        let p = DensityProfile::constant(64, 4, 0.4).unwrap();
        let opts = HydroOptions {
            trajectories: 16,
            workers: 1,
            safety: 0.4,
        };
        let cmp = hydro_compare(&params, &p, 0.05, &opts).unwrap();
        assert!(cmp.pde_blocks.iter().all(|v| (v - 0.4).abs() < 1e-12));
        // pure noise: within a few noise floors
        assert!(cmp.l1 < 3.0 * cmp.noise_floor, "{cmp:?}");
    }
}
