use serde::{Deserialize, Serialize};

use super::ensemble::run_ensemble;
use crate::engine::{EngineState, SimParams};
use crate::error::{Error, Result};
use crate::observables::{FieldKit, IntegralTerm, IntegralTracker, TestFunction};

/// How the time integral in A_t is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quadrature {
    /// Event-by-event closed form; no discretization error.
    Exact,
    /// Trapezoid on a uniform grid of spacing `dt`, checked against `dt/2`.
    Trapezoid { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgOptions {
    pub trajectories: u64,
    /// Translated copies of H averaged per trajectory.
    pub copies: usize,
    pub quadrature: Quadrature,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BgEstimate {
    pub n: usize,
    pub gamma: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Trapezoid only: the estimate on the coarse grid.
    pub coarse_estimate: Option<f64>,
    /// Set when halving the grid moved the estimate by more than one stderr.
    pub flagged: bool,
}

/// H translated by multiples of (torus length)/copies.
pub fn translated_copies(h: &TestFunction, params: &SimParams, copies: usize) -> Vec<TestFunction> {
    let m = params.torus_multiplier as f64;
    (0..copies.max(1))
        .map(|k| {
            if k == 0 {
                h.clone()
            } else {
                h.clone().shifted(k as f64 * m / copies as f64)
            }
        })
        .collect()
}

/// Monte Carlo estimate of E[(A_t(H))²] under ν_ρ.
pub fn bg_second_moment(params: &SimParams, h: &TestFunction, t: f64, opts: &BgOptions) -> Result<BgEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {t} must be positive")));
    }
    let mut out = BgEstimate {
        n: params.n,
        gamma: params.gamma,
        estimate: 0.0,
        stderr: 0.0,
        coarse_estimate: None,
        flagged: false,
    };
    if params.a == 0.0 {
        return Ok(out);
    }
    let kit = FieldKit::new(params)?;
    let copies = translated_copies(h, params, opts.copies);
    match opts.quadrature {
        Quadrature::Exact => {
            let res = run_ensemble(&["A2"], opts.trajectories, opts.workers, |id| {
                let mut engine = EngineState::spawn_trajectory(params, id)?;
                let mut trackers = copies
                    .iter()
                    .map(|g| IntegralTracker::new(&kit, g, IntegralTerm::Asymmetric, engine.config(), t))
                    .collect::<Result<Vec<_>>>()?;
                engine.run_until_with(t, &mut trackers)?;
                let mut sq = 0.0;
                for tr in &mut trackers {
                    sq += tr.value_at(t)?.powi(2);
                }
                Ok((vec![sq / copies.len() as f64], ()))
            })?
            .into_complete()?;
            (out.estimate, out.stderr) = res.estimate("A2")?;
        }
        Quadrature::Trapezoid { dt } => {
            let fine = dt / 2.0;
            let steps = (t / fine).round() as usize;
            if !(dt > 0.0) || ((steps as f64) * fine - t).abs() > 1e-9 * t {
                return Err(Error::InvalidParameter(format!(
                    "horizon {t} is not a multiple of the grid spacing {dt}"
                )));
            }
            let res = run_ensemble(&["A2", "A2_coarse"], opts.trajectories, opts.workers, |id| {
                let mut engine = EngineState::spawn_trajectory(params, id)?;
                let mut rates = vec![vec![0.0; steps + 1]; copies.len()];
                for k in 0..=steps {
                    let s = k as f64 * fine;
                    engine.run_until(s)?;
                    for (c, g) in copies.iter().enumerate() {
                        rates[c][k] = kit.a_term_increment(engine.config(), g, s)?;
                    }
                }
                let (mut sq_fine, mut sq_coarse) = (0.0, 0.0);
                for r in &rates {
                    let a_fine = trapezoid(r, 1, fine);
                    // odd step counts end the coarse grid with one fine step
                    let a_coarse = trapezoid(r, 2, dt)
                        + if steps % 2 == 1 {
                            0.5 * fine * (r[steps - 1] + r[steps])
                        } else {
                            0.0
                        };
                    sq_fine += a_fine * a_fine;
                    sq_coarse += a_coarse * a_coarse;
                }
                let k = copies.len() as f64;
                Ok((vec![sq_fine / k, sq_coarse / k], ()))
            })?
            .into_complete()?;
            (out.estimate, out.stderr) = res.estimate("A2")?;
            let coarse = res.estimate("A2_coarse")?.0;
            out.coarse_estimate = Some(coarse);
            out.flagged = (coarse - out.estimate).abs() > out.stderr;
        }
    }
    Ok(out)
}

/// Trapezoid over every `stride`-th sample, spacing `h` between used samples.
fn trapezoid(values: &[f64], stride: usize, h: f64) -> f64 {
    let used: Vec<f64> = values.iter().step_by(stride).copied().collect();
    used.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_without_asymmetry() {
        let params = SimParams::ssep(16, 1.0, 0.0, 0.5).unwrap();
        let opts = BgOptions {
            trajectories: 4,
            copies: 2,
            quadrature: Quadrature::Exact,
            workers: 1,
        };
        let est = bg_second_moment(&params, &TestFunction::bump(0.0, 1.0, 4), 1.0, &opts).unwrap();
        assert_eq!((est.estimate, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn trapezoid_close_to_exact() {
        let params = SimParams::ssep(16, 0.5, 1.0, 0.5).unwrap().with_seed(3);
        let h = TestFunction::bump(0.0, 1.0, 4);
        let mut opts = BgOptions {
            trajectories: 32,
            copies: 2,
            quadrature: Quadrature::Exact,
            workers: 1,
        };
        let exact = bg_second_moment(&params, &h, 0.2, &opts).unwrap();
        opts.quadrature = Quadrature::Trapezoid { dt: 0.0005 };
        let trap = bg_second_moment(&params, &h, 0.2, &opts).unwrap();
        // same trajectories: only the quadrature differs
        assert!(exact.estimate > 0.0);
        assert!((trap.estimate - exact.estimate).abs() < 0.05 * exact.estimate, "{trap:?} vs {exact:?}");
        assert!(trap.coarse_estimate.is_some());
    }

    #[test]
    fn trapezoid_stride() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert!((trapezoid(&v, 1, 0.25) - 2.0 * 1.0).abs() < 1e-15);
        assert!((trapezoid(&v, 2, 0.5) - 2.0).abs() < 1e-15);
    }
}
