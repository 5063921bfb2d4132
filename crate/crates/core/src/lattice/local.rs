use serde::{Deserialize, Serialize};

use super::Configuration;
use crate::error::{Error, Result};

/// Default cap on the number of local states enumerated for exact expectations.
pub const DEFAULT_ENUMERATION_CAP: usize = 1 << 24;

/// A function of the occupations on the window `{offset, …, offset+width-1}`.
///
/// `values[σ]` is the value on the local configuration whose bit `i` is the
/// occupation of site `offset + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFunction {
    pub offset: isize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl LocalFunction {
    pub fn new(offset: isize, width: usize, values: Vec<f64>) -> Result<Self> {
        if width >= usize::BITS as usize - 1 || values.len() != 1usize << width {
            return Err(Error::InvalidParameter(format!(
                "local function on {width} sites needs 2^{width} values, got {}",
                values.len()
            )));
        }
        Ok(LocalFunction {
            offset,
            width,
            values,
        })
    }

    /// Tabulate `f(occ)` where `occ[i]` is the occupation of site `offset + i`.
    pub fn from_fn(offset: isize, width: usize, f: impl Fn(&[u8]) -> f64) -> Self {
        let mut occ = vec![0u8; width];
        let values = (0..1usize << width)
            .map(|bits| {
                for (i, o) in occ.iter_mut().enumerate() {
                    *o = ((bits >> i) & 1) as u8;
                }
                f(&occ)
            })
            .collect();
        LocalFunction {
            offset,
            width,
            values,
        }
    }

    /// η(0).
    pub fn occupation() -> Self {
        LocalFunction::from_fn(0, 1, |o| o[0] as f64)
    }

    pub fn constant(value: f64) -> Self {
        LocalFunction::from_fn(0, 0, |_| value)
    }

    pub fn end(&self) -> isize {
        self.offset + self.width as isize
    }

    /// Value at a local configuration written site-by-site from `offset`.
    pub fn eval_local(&self, occ: &[u8]) -> f64 {
        debug_assert_eq!(occ.len(), self.width);
        let bits = occ
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &o)| acc | ((o as usize) << i));
        self.values[bits]
    }

    /// τ_x g(η) on a torus configuration.
    #[inline]
    pub fn eval_at(&self, config: &Configuration, x: isize) -> f64 {
        self.values[config.pattern(x, self.offset, self.width)]
    }

    /// Re-express on a wider window `{offset, …, offset+width-1}` that contains this one.
    pub fn extend_to(&self, offset: isize, width: usize) -> Result<Self> {
        let shift = self.offset - offset;
        if shift < 0 || shift as usize + self.width > width {
            return Err(Error::InvalidParameter(format!(
                "window [{offset}, {}) does not contain [{}, {})",
                offset + width as isize,
                self.offset,
                self.end()
            )));
        }
        let shift = shift as usize;
        let mask = (1usize << self.width) - 1;
        Ok(LocalFunction::from_fn(offset, width, |occ| {
            let bits = occ
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &o)| acc | ((o as usize) << i));
            self.values[(bits >> shift) & mask]
        }))
    }

    /// Exact ν_ρ-expectation as a polynomial in ρ.
    pub fn expectation(&self, cap: usize) -> Result<Bernstein> {
        if self.values.len() > cap {
            return Err(Error::WindowTooLarge {
                sites: self.width,
                cap,
            });
        }
        let mut sums = vec![0.0; self.width + 1];
        for (bits, v) in self.values.iter().enumerate() {
            sums[bits.count_ones() as usize] += v;
        }
        let coeffs = sums
            .into_iter()
            .enumerate()
            .map(|(k, s)| s / binomial(self.width, k))
            .collect();
        Ok(Bernstein { coeffs })
    }

    /// Pointwise combination on the union window.
    pub fn combine(&self, other: &LocalFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let lo = self.offset.min(other.offset);
        let hi = self.end().max(other.end());
        let width = (hi - lo) as usize;
        let a = self.extend_to(lo, width)?;
        let b = other.extend_to(lo, width)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| op(*x, *y))
            .collect();
        LocalFunction::new(lo, width, values)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Polynomial in Bernstein form: Σ_k b_k C(d,k) ρ^k (1-ρ)^{d-k}.
///
/// ν_ρ-expectations of local functions come out in this basis directly, and
/// derivatives stay in it without cancellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bernstein {
    coeffs: Vec<f64>,
}

impl Bernstein {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "Bernstein polynomial needs a coefficient");
        Bernstein { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// de Casteljau evaluation.
    pub fn eval(&self, rho: f64) -> f64 {
        let mut work = self.coeffs.clone();
        let d = work.len();
        for level in 1..d {
            for k in 0..d - level {
                work[k] = (1.0 - rho) * work[k] + rho * work[k + 1];
            }
        }
        work[0]
    }

    pub fn derivative(&self) -> Bernstein {
        let d = self.degree();
        if d == 0 {
            return Bernstein { coeffs: vec![0.0] };
        }
        let coeffs = self
            .coeffs
            .windows(2)
            .map(|w| d as f64 * (w[1] - w[0]))
            .collect();
        Bernstein { coeffs }
    }

    /// Coefficients in the monomial basis, lowest order first.
    pub fn to_monomial(&self) -> Vec<f64> {
        let d = self.degree();
        let mut out = vec![0.0; d + 1];
        for (k, b) in self.coeffs.iter().enumerate() {
            // C(d,k) ρ^k (1-ρ)^{d-k} = Σ_j C(d,k) C(d-k,j) (-1)^j ρ^{k+j}
            let ck = binomial(d, k);
            for j in 0..=d - k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                out[k + j] += b * ck * binomial(d - k, j) * sign;
            }
        }
        out
    }
}
