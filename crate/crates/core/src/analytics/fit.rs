use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measured point of a scaling law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub scale: f64,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub exponent_stderr: f64,
    pub log_prefactor_stderr: f64,
    /// Weighted residual sum of squares; ≈ points − 2 when the error model is right.
    pub chi2: f64,
}

/// Fit value ≈ prefactor · scale^exponent by weighted least squares in log-log
/// coordinates, with σ(log value) = stderr / value.
///
/// Quoted errors come from the supplied stderrs, not from the residuals. When
/// every stderr is zero the fit is unweighted and the errors are zero.
pub fn fit_power_law(points: &[ScalePoint]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for p in points {
        if !(p.value > 0.0) || !(p.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power-law fit needs positive data, got scale {} value {}",
                p.scale, p.value
            )));
        }
        if !(p.stderr >= 0.0) {
            return Err(Error::InvalidParameter(format!("stderr {} < 0", p.stderr)));
        }
    }
    let exact = points.iter().all(|p| p.stderr == 0.0);
    if !exact && points.iter().any(|p| p.stderr == 0.0) {
        return Err(Error::InvalidParameter(
            "power-law fit mixes exact and noisy points".into(),
        ));
    }

    let rows: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| {
            let w = if exact { 1.0 } else { (p.value / p.stderr).powi(2) };
            (p.scale.ln(), p.value.ln(), w)
        })
        .collect();
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in &rows {
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::InvalidParameter("power-law fit needs at least two distinct scales".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = rows
        .iter()
        .map(|&(x, y, w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let (exponent_stderr, log_prefactor_stderr) = if exact {
        (0.0, 0.0)
    } else {
        ((sw / det).sqrt(), (sxx / det).sqrt())
    };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        exponent_stderr,
        log_prefactor_stderr,
        chi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn exact(f: impl Fn(f64) -> f64) -> Vec<ScalePoint> {
        [32.0, 64.0, 128.0, 256.0]
            .iter()
            .map(|&s| ScalePoint {
                scale: s,
                value: f(s),
                stderr: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_square_root() {
        let fit = fit_power_law(&exact(|s| 2.0 * s.sqrt())).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!((fit.prefactor - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_constant() {
        let fit = fit_power_law(&exact(|_| 3.5)).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut pts = exact(|s| s);
        pts[1].value = 0.0;
        assert!(fit_power_law(&pts).is_err());
        assert!(fit_power_law(&exact(|s| s)[..2]).is_err());
    }

    #[test]
    fn quoted_error_is_calibrated() {
        // 1000 noisy square-root laws with 5% relative noise
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let reps = 1000;
        let (mut within1, mut within2, mut within3) = (0, 0, 0);
        for _ in 0..reps {
            let pts: Vec<ScalePoint> = [0.25, 0.5, 1.0, 2.0, 4.0]
                .iter()
                .map(|&s| {
                    let truth = 0.3 * f64::sqrt(s);
                    let se = 0.05 * truth;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    ScalePoint {
                        scale: s,
                        value: truth + se * z,
                        stderr: se,
                    }
                })
                .collect();
            let fit = fit_power_law(&pts).unwrap();
            let z = ((fit.exponent - 0.5) / fit.exponent_stderr).abs();
            within1 += (z <= 1.0) as u32;
            within2 += (z <= 2.0) as u32;
            within3 += (z <= 3.0) as u32;
        }
        let frac = |k: u32| k as f64 / reps as f64;
        assert!((0.64..=0.72).contains(&frac(within1)), "{}", frac(within1));
        assert!(frac(within2) >= 0.93, "{}", frac(within2));
        assert!(frac(within3) >= 0.99, "{}", frac(within3));
    }
}
