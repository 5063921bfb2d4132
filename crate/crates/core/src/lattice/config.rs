use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Occupation state on a discrete torus of `len` sites.
///
/// Site indices are taken modulo `len`; every occupation is 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    occ: Vec<u8>,
}

impl Configuration {
    pub fn new(occ: Vec<u8>) -> Result<Self> {
        if occ.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "torus needs at least 2 sites, got {}",
                occ.len()
            )));
        }
        if let Some(bad) = occ.iter().position(|&v| v > 1) {
            return Err(Error::InvalidParameter(format!(
                "occupation at site {bad} is {}, expected 0 or 1",
                occ[bad]
            )));
        }
        Ok(Configuration { occ })
    }

    pub fn empty(len: usize) -> Result<Self> {
        Self::new(vec![0; len])
    }

    pub fn full(len: usize) -> Result<Self> {
        Self::new(vec![1; len])
    }

    /// Independent Bernoulli(`rho`) occupations, reproducible from `seed`.
    pub fn bernoulli(len: usize, rho: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::bernoulli_with(len, rho, &mut rng)
    }

    pub fn bernoulli_with<R: Rng + ?Sized>(len: usize, rho: f64, rng: &mut R) -> Result<Self> {
        check_density(rho)?;
        Self::from_profile_with(len, |_| rho, rng)
    }

    /// Independent occupations with site-dependent probabilities `prob(x)`.
    pub fn from_profile_with<R, F>(len: usize, prob: F, rng: &mut R) -> Result<Self>
    where
        R: Rng + ?Sized,
        F: Fn(usize) -> f64,
    {
        if len < 2 {
            return Err(Error::InvalidParameter(format!(
                "torus needs at least 2 sites, got {len}"
            )));
        }
        let mut occ = Vec::with_capacity(len);
        for x in 0..len {
            let p = prob(x);
            check_density(p)?;
            // one uniform per site keeps the stream position independent of p
            let u: f64 = rng.random();
            occ.push(u8::from(u < p));
        }
        Ok(Configuration { occ })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.occ.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    #[inline]
    pub fn wrap(&self, x: isize) -> usize {
        x.rem_euclid(self.occ.len() as isize) as usize
    }

    /// Occupation at site `x` taken modulo the torus length.
    #[inline]
    pub fn at(&self, x: isize) -> u8 {
        self.occ[self.wrap(x)]
    }

    #[inline]
    pub fn get(&self, x: usize) -> u8 {
        self.occ[x]
    }

    pub fn set(&mut self, x: usize, value: u8) {
        assert!(value <= 1, "occupation must be 0 or 1");
        self.occ[x] = value;
    }

    /// Exchange the occupations of `x` and `x+1` (the swap η → η^{x,x+1}).
    #[inline]
    pub fn swap_bond(&mut self, x: usize) {
        let y = if x + 1 == self.occ.len() { 0 } else { x + 1 };
        self.occ.swap(x, y);
    }

    pub fn particle_count(&self) -> usize {
        self.occ.iter().map(|&v| v as usize).sum()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.occ
    }

    /// τ_x η, i.e. (τ_x η)(y) = η(y + x).
    pub fn translated(&self, x: isize) -> Configuration {
        let len = self.occ.len();
        let occ = (0..len).map(|y| self.at(y as isize + x)).collect();
        Configuration { occ }
    }

    /// Bits η(x+offset), …, η(x+offset+width-1) packed little-endian.
    #[inline]
    pub fn pattern(&self, x: isize, offset: isize, width: usize) -> usize {
        let mut bits = 0usize;
        for i in 0..width {
            bits |= (self.at(x + offset + i as isize) as usize) << i;
        }
        bits
    }
}

pub(crate) fn check_density(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "density {rho} outside [0, 1]"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_densities() {
        let empty = Configuration::bernoulli(8, 0.0, 1).unwrap();
        assert_eq!(empty.particle_count(), 0);
        let full = Configuration::bernoulli(8, 1.0, 1).unwrap();
        assert_eq!(full.particle_count(), 8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Configuration::bernoulli(1, 0.5, 0).is_err());
        assert!(Configuration::bernoulli(8, 1.5, 0).is_err());
        assert!(Configuration::bernoulli(8, -0.1, 0).is_err());
        assert!(Configuration::new(vec![0, 2, 1]).is_err());
    }

    #[test]
    fn particle_count_within_binomial_band() {
        // 3 sd of Binomial(10000, 1/2) is 150
        let mut hits = 0;
        for seed in 0..200 {
            let c = Configuration::bernoulli(10_000, 0.5, seed).unwrap();
            if (c.particle_count() as i64 - 5000).abs() <= 150 {
                hits += 1;
            }
        }
        // P(outside) ~ 0.003 per draw
        assert!(hits >= 195, "only {hits}/200 within 3 sd");
    }

    #[test]
    fn same_seed_same_config() {
        let a = Configuration::bernoulli(64, 0.3, 42).unwrap();
        let b = Configuration::bernoulli(64, 0.3, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn translation_is_cyclic_shift() {
        let c = Configuration::new(vec![1, 0, 0, 1, 1]).unwrap();
        let t = c.translated(2);
        assert_eq!(t.as_slice(), &[0, 1, 1, 1, 0]);
        assert_eq!(c.translated(-3), t);
        assert_eq!(c.pattern(4, 0, 3), 0b011);
    }

    proptest! {
        #[test]
        fn swaps_conserve_particles(occ in proptest::collection::vec(0u8..2, 2..64),
                                    bonds in proptest::collection::vec(0usize..1000, 0..200)) {
            let mut c = Configuration::new(occ).unwrap();
            let before = c.particle_count();
            for b in bonds {
                let x = b % c.len();
                c.swap_bond(x);
            }
            prop_assert_eq!(c.particle_count(), before);
        }
    }
}
