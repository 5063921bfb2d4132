use rayon::prelude::*;

use super::EnsembleAccumulator;
use crate::error::{Error, Result};

/// Trajectories per shard. Shards are the unit of work and of merging, so the
/// merged moments do not depend on how many workers ran them.
pub const CHUNK_SIZE: u64 = 16;

/// Worker count from `WASEP_WORKERS`, else the number of available cores.
pub fn default_workers() -> usize {
    std::env::var("WASEP_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Merged moments plus per-trajectory side outputs in trajectory order.
#[derive(Debug)]
pub struct EnsembleOutcome<T> {
    pub moments: EnsembleAccumulator,
    pub outputs: Vec<(u64, T)>,
    /// Trajectories that failed, with the error text. Their shards keep the
    /// trajectories that succeeded.
    pub failures: Vec<(u64, String)>,
}

impl<T> EnsembleOutcome<T> {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Moments, or the first failure.
    pub fn into_complete(self) -> Result<EnsembleAccumulator> {
        match self.failures.into_iter().next() {
            None => Ok(self.moments),
            Some((id, msg)) => Err(Error::InvalidParameter(format!("trajectory {id} failed: {msg}"))),
        }
    }
}

struct Shard<T> {
    acc: EnsembleAccumulator,
    outputs: Vec<(u64, T)>,
    failures: Vec<(u64, String)>,
}

/// Run trajectories `0..count` on `workers` threads. `run(index)` returns the
/// observable values in the order of `names` and a side output.
pub fn run_ensemble<T, F>(names: &[&str], count: u64, workers: usize, run: F) -> Result<EnsembleOutcome<T>>
where
    T: Send,
    F: Fn(u64) -> Result<(Vec<f64>, T)> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let chunks: Vec<u64> = (0..count.div_ceil(CHUNK_SIZE)).collect();
    let shards: Vec<Shard<T>> = pool.install(|| {
        chunks
            .par_iter()
            .map(|&c| {
                let mut shard = Shard {
                    acc: EnsembleAccumulator::new(names.iter().copied()),
                    outputs: Vec::new(),
                    failures: Vec::new(),
                };
                for id in c * CHUNK_SIZE..((c + 1) * CHUNK_SIZE).min(count) {
                    match run(id).and_then(|(values, out)| shard.acc.push(&values).map(|_| out)) {
                        Ok(out) => shard.outputs.push((id, out)),
                        Err(e) => shard.failures.push((id, e.to_string())),
                    }
                }
                shard
            })
            .collect()
    });
    let mut outcome = EnsembleOutcome {
        moments: EnsembleAccumulator::new(names.iter().copied()),
        outputs: Vec::with_capacity(count as usize),
        failures: Vec::new(),
    };
    for shard in shards {
        outcome.moments.merge(&shard.acc)?;
        outcome.outputs.extend(shard.outputs);
        outcome.failures.extend(shard.failures);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::trajectory_rng;
    use rand::Rng;

    fn noisy(id: u64) -> Result<(Vec<f64>, u64)> {
        let mut rng = trajectory_rng(7, id);
        let x: f64 = rng.random();
        Ok((vec![x, x * x + rng.random::<f64>()], id))
    }

    #[test]
    fn bit_identical_across_worker_counts() {
        let one = run_ensemble(&["x", "y"], 101, 1, noisy).unwrap();
        let four = run_ensemble(&["x", "y"], 101, 4, noisy).unwrap();
        assert_eq!(one.moments, four.moments);
        assert_eq!(one.outputs, four.outputs);
        assert_eq!(one.moments.count(), 101);
    }

    #[test]
    fn failures_are_kept_apart() {
        let out = run_ensemble(&["x"], 40, 2, |id| {
            if id == 17 {
                Err(Error::InvalidParameter("boom".into()))
            } else {
                Ok((vec![id as f64], ()))
            }
        })
        .unwrap();
        assert!(!out.is_complete());
        assert_eq!(out.moments.count(), 39);
        assert_eq!(out.failures[0].0, 17);
        assert!(out.into_complete().is_err());
    }
}
