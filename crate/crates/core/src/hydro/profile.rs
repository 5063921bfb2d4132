use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::trajectory_rng;
use crate::error::{Error, Result};
use crate::lattice::Configuration;

/// Density values on a periodic macroscopic grid x_i = i·dx, i < len.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub dx: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    x: f64,
    rho: f64,
}

impl DensityProfile {
    pub fn new(dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "profile needs dx > 0 and at least 2 cells (dx {dx}, {} cells)",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("profile value {v} at cell {i} outside [0, 1]")));
        }
        Ok(DensityProfile { dx, values })
    }

    /// Sample ρ₀ at the lattice points x/n of a torus of `multiplier`·n sites.
    pub fn from_fn(n: usize, multiplier: usize, rho0: impl Fn(f64) -> f64) -> Result<Self> {
        let dx = 1.0 / n as f64;
        Self::new(dx, (0..n * multiplier).map(|i| rho0(i as f64 * dx)).collect())
    }

    pub fn constant(n: usize, multiplier: usize, rho: f64) -> Result<Self> {
        Self::from_fn(n, multiplier, |_| rho)
    }

    /// `left` on the first half of the torus, `right` on the second.
    pub fn step(n: usize, multiplier: usize, left: f64, right: f64) -> Result<Self> {
        let half = multiplier as f64 / 2.0;
        Self::from_fn(n, multiplier, |x| if x < half { left } else { right })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Length of the periodic domain.
    pub fn period(&self) -> f64 {
        self.dx * self.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Piecewise-constant periodic lookup: the cell containing u.
    pub fn at(&self, u: f64) -> f64 {
        let i = (u / self.dx).floor() as i64;
        self.values[i.rem_euclid(self.len() as i64) as usize]
    }

    /// Σ ρ_i dx
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, &rho) in self.values.iter().enumerate() {
            w.serialize(ProfileRow { x: self.x(i), rho })?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Read an (x, rho) CSV on a uniform grid starting at 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let rows: Vec<ProfileRow> = csv::Reader::from_reader(input)
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        if rows.len() < 2 {
            return Err(Error::InvalidParameter("profile CSV needs at least 2 rows".into()));
        }
        let dx = rows[1].x - rows[0].x;
        for (i, r) in rows.iter().enumerate() {
            if (r.x - i as f64 * dx).abs() > 1e-9 * dx.max(1.0) * (i as f64 + 1.0) {
                return Err(Error::GridMismatch(format!("profile row {i}: x = {} off the uniform grid", r.x)));
            }
        }
        Self::new(dx, rows.into_iter().map(|r| r.rho).collect())
    }
}

/// Product measure with P(η(x) = 1) = ρ₀(x/n) on a torus of `multiplier`·n sites.
pub fn sample_profile_measure(
    profile: &DensityProfile,
    n: usize,
    multiplier: usize,
    seed: u64,
) -> Result<Configuration> {
    let mut rng = trajectory_rng(seed, 0);
    sample_profile_with(profile, n, multiplier, &mut rng)
}

pub fn sample_profile_with<R: Rng + ?Sized>(
    profile: &DensityProfile,
    n: usize,
    multiplier: usize,
    rng: &mut R,
) -> Result<Configuration> {
    let torus = multiplier as f64;
    if (profile.period() - torus).abs() > 1e-9 * torus {
        return Err(Error::GridMismatch(format!(
            "profile period {} does not match the torus length {torus}",
            profile.period()
        )));
    }
    let nf = n as f64;
    // exact cell lookup when the grid is the lattice itself
    let lattice = profile.len() == n * multiplier;
    Configuration::from_profile_with(
        n * multiplier,
        |x| if lattice { profile.values[x] } else { profile.at(x as f64 / nf) },
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            DensityProfile::new(0.5, vec![0.2, 1.2]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn zero_profile_is_empty() {
        let p = DensityProfile::constant(16, 2, 0.0).unwrap();
        let c = sample_profile_measure(&p, 16, 2, 4).unwrap();
        assert_eq!(c.particle_count(), 0);
    }

    #[test]
    fn constant_profile_is_bernoulli() {
        // same stream, same draws as the equilibrium sampler
        let p = DensityProfile::constant(32, 4, 0.3).unwrap();
        let c = sample_profile_measure(&p, 32, 4, 11).unwrap();
        let mut rng = trajectory_rng(11, 0);
        assert_eq!(c, Configuration::bernoulli_with(128, 0.3, &mut rng).unwrap());
    }

    #[test]
    fn step_profile_half_mean() {
        let (n, m) = (512, 8);
        let p = DensityProfile::step(n, m, 0.8, 0.2).unwrap();
        let c = sample_profile_measure(&p, n, m, 5).unwrap();
        let half = n * m / 2;
        let left = (0..half).map(|x| c.get(x) as f64).sum::<f64>() / half as f64;
        assert!((left - 0.8).abs() < 3.0 * (0.16 / half as f64).sqrt(), "{left}");
    }

    #[test]
    fn csv_round_trip() {
        let p = DensityProfile::step(8, 2, 0.75, 0.25).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x,rho\n"));
        assert_eq!(DensityProfile::read_csv(&buf[..]).unwrap(), p);
    }

    #[test]
    fn period_mismatch() {
        let p = DensityProfile::constant(16, 2, 0.5).unwrap();
        assert!(matches!(sample_profile_measure(&p, 16, 4, 0), Err(Error::GridMismatch(_))));
    }
}
