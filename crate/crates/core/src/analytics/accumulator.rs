use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running means and co-moments of a fixed list of observables.
///
/// Uses Welford updates and the Chan et al. pairwise merge, so shards built
/// by different workers combine into the same moments up to rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAccumulator {
    names: Vec<String>,
    count: u64,
    mean: Vec<f64>,
    /// Row-major k×k matrix of Σ (x_i − mean_i)(x_j − mean_j).
    comoment: Vec<f64>,
}

impl EnsembleAccumulator {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let k = names.len();
        EnsembleAccumulator {
            names,
            count: 0,
            mean: vec![0.0; k],
            comoment: vec![0.0; k * k],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidParameter(format!("no observable `{name}` in accumulator")))
    }

    /// Add one trajectory's values, in the order of `names`.
    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        let k = self.names.len();
        if values.len() != k {
            return Err(Error::InvalidParameter(format!(
                "expected {k} values, got {}",
                values.len()
            )));
        }
        self.count += 1;
        let c = self.count as f64;
        let delta: Vec<f64> = values.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for i in 0..k {
            self.mean[i] += delta[i] / c;
        }
        for i in 0..k {
            let after_i = values[i] - self.mean[i];
            for j in 0..k {
                self.comoment[i * k + j] += delta[j] * after_i;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if self.names != other.names {
            return Err(Error::InvalidParameter("merging accumulators with different observables".into()));
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let k = self.names.len();
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..k {
            for j in 0..k {
                self.comoment[i * k + j] +=
                    other.comoment[i * k + j] + delta[i] * delta[j] * na * nb / total;
            }
        }
        for i in 0..k {
            self.mean[i] += delta[i] * nb / total;
        }
        self.count += other.count;
        Ok(())
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.comoment[i * self.names.len() + j] / (self.count - 1) as f64
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i)
    }

    /// Standard error of the mean of observable `i`.
    pub fn stderr(&self, i: usize) -> f64 {
        (self.variance(i) / self.count as f64).sqrt()
    }

    /// Mean and standard error by name.
    pub fn estimate(&self, name: &str) -> Result<(f64, f64)> {
        let i = self.index(name)?;
        Ok((self.mean(i), self.stderr(i)))
    }

    /// Largest difference in means and co-moments, each relative to its own
    /// magnitude or to the natural scale of the data, whichever is larger.
    pub fn relative_difference(&self, other: &EnsembleAccumulator) -> f64 {
        if self.names != other.names || self.count != other.count {
            return f64::INFINITY;
        }
        let k = self.names.len();
        let rel = |a: f64, b: f64, scale: f64| {
            let s = a.abs().max(b.abs()).max(scale);
            if s == 0.0 {
                0.0
            } else {
                (a - b).abs() / s
            }
        };
        let diag = |i: usize| self.comoment[i * k + i].abs();
        let mut worst = 0.0f64;
        for i in 0..k {
            let spread = (diag(i) / self.count as f64).sqrt();
            worst = worst.max(rel(self.mean[i], other.mean[i], spread));
            for j in 0..k {
                let scale = (diag(i) * diag(j)).sqrt();
                worst = worst.max(rel(self.comoment[i * k + j], other.comoment[i * k + j], scale));
            }
        }
        worst
    }
}
