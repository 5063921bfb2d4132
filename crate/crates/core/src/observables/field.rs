use serde::{Deserialize, Serialize};

use super::TestFunction;
use crate::engine::SimParams;
use crate::error::{Error, Result};
use crate::lattice::{Configuration, LocalFunction, ThermoFunctions};

/// The moving reference frame of the fluctuation field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameShift {
    /// a·β'(ρ)
    pub velocity: f64,
    pub n: usize,
    pub gamma: f64,
}

impl FrameShift {
    pub fn none(n: usize) -> Self {
        FrameShift {
            velocity: 0.0,
            n,
            gamma: 1.0,
        }
    }

    pub fn from_params(params: &SimParams) -> Self {
        FrameShift {
            velocity: params.a * params.thermo().beta_prime,
            n: params.n,
            gamma: params.gamma,
        }
    }

    /// d/dt of the macroscopic displacement: a β'(ρ) n^{1−γ}.
    #[inline]
    pub fn macro_velocity(&self) -> f64 {
        self.velocity * (self.n as f64).powf(1.0 - self.gamma)
    }

    #[inline]
    pub fn d_mac(&self, t: f64) -> f64 {
        self.macro_velocity() * t
    }

    /// Lattice displacement, defined as n·d_mac so the two never disagree.
    #[inline]
    pub fn d_lat(&self, t: f64) -> f64 {
        self.n as f64 * self.d_mac(t)
    }

    /// Integer position ⌊d_lat(t)⌋ of the moving bond relative to its origin.
    #[inline]
    pub fn lattice_offset(&self, t: f64) -> i64 {
        self.d_lat(t).floor() as i64
    }

    pub fn is_static(&self) -> bool {
        self.macro_velocity() == 0.0
    }
}

/// Which finite-difference operator is applied to the test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// H(x/n)
    Value,
    /// ∇ⁿH(x/n) = n(H((x+1)/n) − H(x/n))
    Gradient,
    /// ΔⁿH(x/n) = n²(H((x+1)/n) + H((x−1)/n) − 2H(x/n))
    Laplacian,
}

impl Kernel {
    pub(crate) fn taps(self, n: usize) -> Vec<(i64, f64)> {
        let n = n as f64;
        match self {
            Kernel::Value => vec![(0, 1.0)],
            Kernel::Gradient => vec![(1, n), (0, -n)],
            Kernel::Laplacian => vec![(1, n * n), (-1, n * n), (0, -2.0 * n * n)],
        }
    }
}

/// Lattice geometry needed to smear a test function over the torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub n: usize,
    pub len: usize,
}

impl Geometry {
    pub fn new(n: usize, len: usize) -> Self {
        Geometry { n, len }
    }

    pub fn from_params(params: &SimParams) -> Self {
        Geometry {
            n: params.n,
            len: params.len(),
        }
    }

    pub fn torus(&self) -> f64 {
        self.len as f64 / self.n as f64
    }

    /// Weight of unwrapped lattice point `j` under `kernel`, with the
    /// argument shifted by `shift`.
    #[inline]
    pub fn weight(&self, h: &TestFunction, taps: &[(i64, f64)], j: i64, shift: f64) -> f64 {
        let n = self.n as f64;
        taps.iter()
            .map(|&(o, c)| c * h.eval((j + o) as f64 / n - shift))
            .sum()
    }

    /// Unwrapped lattice range [j_lo, j_hi] carrying every nonzero weight
    /// for frame displacements in [shift_lo, shift_hi]. Fails if the range
    /// would visit some torus site twice.
    pub fn window(
        &self,
        h: &TestFunction,
        kernel: Kernel,
        shift_lo: f64,
        shift_hi: f64,
    ) -> Result<(i64, i64)> {
        let (lo, hi) = h.support();
        if lo > hi {
            // identically zero: empty range
            return Ok((0, -1));
        }
        h.check_fits(self.torus())?;
        let n = self.n as f64;
        let taps = kernel.taps(self.n);
        let max_off = taps.iter().map(|t| t.0).max().unwrap();
        let min_off = taps.iter().map(|t| t.0).min().unwrap();
        let mut j_lo = (n * (lo + shift_lo)).floor() as i64 - max_off - 1;
        let mut j_hi = (n * (hi + shift_hi)).ceil() as i64 - min_off + 1;
        if shift_lo == shift_hi {
            // trim lattice points whose weight is exactly zero
            while j_lo < j_hi && self.weight(h, &taps, j_lo, shift_lo) == 0.0 {
                j_lo += 1;
            }
            while j_hi > j_lo && self.weight(h, &taps, j_hi, shift_lo) == 0.0 {
                j_hi -= 1;
            }
        } else {
            j_lo += 1;
            j_hi -= 1;
        }
        if j_hi - j_lo + 1 > self.len as i64 {
            return Err(Error::SupportViolation(format!(
                "{} lattice points needed on a torus of {} sites",
                j_hi - j_lo + 1,
                self.len
            )));
        }
        Ok((j_lo, j_hi))
    }

    /// Σ_x K[H](x/n − shift) g(x), every site counted once.
    pub fn smear(
        &self,
        h: &TestFunction,
        kernel: Kernel,
        shift: f64,
        mut g: impl FnMut(usize) -> f64,
    ) -> Result<f64> {
        let (j_lo, j_hi) = self.window(h, kernel, shift, shift)?;
        let taps = kernel.taps(self.n);
        let len = self.len as i64;
        let mut acc = 0.0;
        for j in j_lo..=j_hi {
            let w = self.weight(h, &taps, j, shift);
            if w != 0.0 {
                acc += w * g(j.rem_euclid(len) as usize);
            }
        }
        Ok(acc)
    }

    /// (1/n) Σ_x H(x/n)²
    pub fn lattice_l2(&self, h: &TestFunction) -> Result<f64> {
        self.lattice_energy(h, Kernel::Value)
    }

    /// (1/n) Σ_x (∇ⁿH(x/n))²
    pub fn gradient_energy(&self, h: &TestFunction) -> Result<f64> {
        self.lattice_energy(h, Kernel::Gradient)
    }

    fn lattice_energy(&self, h: &TestFunction, kernel: Kernel) -> Result<f64> {
        let (j_lo, j_hi) = self.window(h, kernel, 0.0, 0.0)?;
        let taps = kernel.taps(self.n);
        let sum: f64 = (j_lo..=j_hi)
            .map(|j| self.weight(h, &taps, j, 0.0).powi(2))
            .sum();
        Ok(sum / self.n as f64)
    }
}

/// Everything needed to evaluate the fields and martingale integrands of one experiment.
#[derive(Debug, Clone)]
pub struct FieldKit {
    pub geometry: Geometry,
    pub rho: f64,
    pub gamma: f64,
    pub a: f64,
    pub frame: FrameShift,
    pub thermo: ThermoFunctions,
    /// τ_0 V_f = f − aβ − aβ'(η(0) − ρ)
    pub v_f: LocalFunction,
    /// h − φ_h(ρ)
    pub h_centered: LocalFunction,
}

impl FieldKit {
    pub fn new(params: &SimParams) -> Result<Self> {
        params.require_fluctuation_density()?;
        let thermo = params.thermo();
        let model = params.model.model();
        let c = model.local();
        let b0 = (-c.offset) as usize;
        let (a, rho) = (params.a, params.rho);
        let v_f = LocalFunction::from_fn(c.offset, c.width, |o| {
            let e0 = o[b0] as f64;
            let e1 = o[b0 + 1] as f64;
            a * c.eval_local(o) * (e1 - e0).powi(2) / 2.0
                - a * thermo.beta
                - a * thermo.beta_prime * (e0 - rho)
        });
        let h = params.model.h();
        let h_centered = LocalFunction::new(
            h.offset,
            h.width,
            h.values.iter().map(|v| v - thermo.phi_h).collect(),
        )?;
        Ok(FieldKit {
            geometry: Geometry::from_params(params),
            rho,
            gamma: params.gamma,
            a,
            frame: FrameShift::from_params(params),
            thermo,
            v_f,
            h_centered,
        })
    }

    pub fn with_frame(mut self, frame: FrameShift) -> Self {
        self.frame = frame;
        self
    }

    pub fn without_frame(self) -> Self {
        let n = self.geometry.n;
        self.with_frame(FrameShift::none(n))
    }

    fn sqrt_n(&self) -> f64 {
        (self.geometry.n as f64).sqrt()
    }

    /// n^{1−γ}/√n
    pub fn a_prefactor(&self) -> f64 {
        (self.geometry.n as f64).powf(1.0 - self.gamma) / self.sqrt_n()
    }

    /// 1/(2√n)
    pub fn i_prefactor(&self) -> f64 {
        0.5 / self.sqrt_n()
    }

    /// Y_t(H) = n^{−1/2} Σ_x H(x/n − d_mac(t)) (η(x) − ρ)
    pub fn density_field(&self, config: &Configuration, h: &TestFunction, t: f64) -> Result<f64> {
        self.check_len(config)?;
        let occ = config.as_slice();
        let rho = self.rho;
        let s = self
            .geometry
            .smear(h, Kernel::Value, self.frame.d_mac(t), |x| occ[x] as f64 - rho)?;
        Ok(s / self.sqrt_n())
    }

    /// (1/2√n) Σ_x ΔⁿT_tH(x/n) (τ_x h − φ_h(ρ))
    pub fn i_term_increment(&self, config: &Configuration, h: &TestFunction, t: f64) -> Result<f64> {
        self.check_len(config)?;
        let s = self.geometry.smear(h, Kernel::Laplacian, self.frame.d_mac(t), |x| {
            self.h_centered.eval_at(config, x as isize)
        })?;
        Ok(self.i_prefactor() * s)
    }

    /// n^{1−γ}/√n Σ_x ∇ⁿT_tH(x/n) τ_xV_f(η)
    pub fn a_term_increment(&self, config: &Configuration, h: &TestFunction, t: f64) -> Result<f64> {
        self.check_len(config)?;
        if self.a == 0.0 {
            return Ok(0.0);
        }
        let s = self.geometry.smear(h, Kernel::Gradient, self.frame.d_mac(t), |x| {
            self.v_f.eval_at(config, x as isize)
        })?;
        Ok(self.a_prefactor() * s)
    }

    /// Y_t(i_ε(x))², the squared box-averaged fluctuation.
    pub fn quadratic_field(&self, config: &Configuration, x: f64, eps: f64, t: f64) -> Result<f64> {
        let n = self.geometry.n as f64;
        if !(eps * n >= 1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "box width {eps} is below one lattice spacing 1/{n}"
            )));
        }
        let boxed = TestFunction::indicator_box(x, eps);
        let shift = self.frame.d_mac(t);
        let (j_lo, j_hi) = self.geometry.window(&boxed, Kernel::Value, shift, shift)?;
        if boxed.eval(j_lo as f64 / n - shift) == 0.0 && j_lo == j_hi {
            return Err(Error::InvalidParameter(format!(
                "box ({x}, {x}+{eps}] holds no lattice site"
            )));
        }
        Ok(self.density_field(config, &boxed, t)?.powi(2))
    }

    fn check_len(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.geometry.len {
            return Err(Error::InvalidParameter(format!(
                "configuration has {} sites, expected {}",
                config.len(),
                self.geometry.len
            )));
        }
        Ok(())
    }
}

/// n^{−1/2} Σ_x H(x/n − d_mac(t)) (η(x) − ρ) on the torus of `params`.
pub fn density_field(
    config: &Configuration,
    h: &TestFunction,
    t: f64,
    params: &SimParams,
    frame: &FrameShift,
) -> Result<f64> {
    FieldKit::new(params)?.with_frame(*frame).density_field(config, h, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kit(n: usize, a: f64, rho: f64) -> FieldKit {
        FieldKit::new(&SimParams::ssep(n, 1.0, a, rho).unwrap()).unwrap()
    }

    #[test]
    fn two_site_hand_computation() {
        // n=2, M=1: sites 0, 1 at u = 0, 1/2; H = 1 on [0, 1): both sites weigh 1
        let params = SimParams::ssep(2, 1.0, 0.0, 0.5).unwrap().with_torus(1);
        let k = FieldKit::new(&params).unwrap();
        let h = TestFunction::indicator_box(-0.25, 1.0);
        let config = Configuration::new(vec![1, 0]).unwrap();
        let y = k.density_field(&config, &h, 0.0).unwrap();
        assert_eq!(y, 0.0);
        let config = Configuration::new(vec![1, 1]).unwrap();
        let y = k.density_field(&config, &h, 0.0).unwrap();
        assert!((y - 2f64.sqrt() * 0.5).abs() < 1e-15);
    }

    #[test]
    fn frame_matches_preshifted_function_bitwise() {
        let params = SimParams::ssep(64, 1.0, 1.0, 0.3).unwrap();
        let framed = FieldKit::new(&params).unwrap();
        assert!(!framed.frame.is_static());
        let plain = framed.clone().without_frame();
        let config = Configuration::bernoulli(params.len(), 0.3, 9).unwrap();
        let h = TestFunction::gaussian_density(0.1, 0.2);
        for t in [0.0, 0.37, 1.0, 2.5] {
            let d = framed.frame.d_mac(t);
            let a = framed.density_field(&config, &h, t).unwrap();
            let b = plain.density_field(&config, &h.clone().shifted(d), t).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "t={t}");
        }
    }

    #[test]
    fn linearity() {
        let k = kit(128, 1.0, 0.3);
        let config = Configuration::bernoulli(k.geometry.len, 0.3, 4).unwrap();
        let h = TestFunction::bump(0.3, 0.8, 3);
        let g = TestFunction::gaussian_density(-0.5, 0.15);
        let combo = TestFunction::combination(vec![(2.5, h.clone()), (-0.75, g.clone())]);
        let t = 0.6;
        let lhs = k.density_field(&config, &combo, t).unwrap();
        let rhs = 2.5 * k.density_field(&config, &h, t).unwrap()
            - 0.75 * k.density_field(&config, &g, t).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn zero_density_gives_zero() {
        let params = SimParams::ssep(16, 1.0, 0.0, 0.5).unwrap();
        let mut k = FieldKit::new(&params).unwrap();
        k.rho = 0.0;
        let config = Configuration::empty(params.len()).unwrap();
        let y = k.density_field(&config, &TestFunction::bump(0.0, 1.0, 2), 0.0).unwrap();
        assert_eq!(y, 0.0);
        assert_eq!(k.quadratic_field(&config, 0.0, 0.25, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn wrapped_argument() {
        // support straddles the torus seam; result must equal the translated evaluation
        let params = SimParams::ssep(32, 1.0, 0.0, 0.5).unwrap();
        let k = FieldKit::new(&params).unwrap();
        let config = Configuration::bernoulli(params.len(), 0.5, 3).unwrap();
        let h = TestFunction::bump(0.0, 0.5, 2);
        let y = k.density_field(&config, &h, 0.0).unwrap();
        let moved = config.translated(-32);
        let y2 = k
            .density_field(&moved, &TestFunction::bump(1.0, 0.5, 2), 0.0)
            .unwrap();
        assert!((y - y2).abs() < 1e-12);
    }

    #[test]
    fn oversized_support_rejected() {
        let k = kit(16, 0.0, 0.5);
        let config = Configuration::bernoulli(k.geometry.len, 0.5, 1).unwrap();
        let wide = TestFunction::bump(0.0, 2.5, 2);
        assert!(matches!(
            k.density_field(&config, &wide, 0.0),
            Err(Error::SupportViolation(_))
        ));
        let step = TestFunction::Heaviside { origin: 0.0 };
        assert!(k.density_field(&config, &step, 0.0).is_err());
    }

    #[test]
    fn full_torus_box() {
        // ε = M: the box holds every site once, Y² = (N − ρL)²/(nε²)
        let params = SimParams::ssep(16, 1.0, 0.0, 0.5).unwrap();
        let k = FieldKit::new(&params).unwrap();
        let config = Configuration::bernoulli(params.len(), 0.7, 11).unwrap();
        let eps = params.torus_multiplier as f64;
        let q = k.quadratic_field(&config, -0.3, eps, 0.0).unwrap();
        let excess = config.particle_count() as f64 - 0.5 * params.len() as f64;
        let want = excess * excess / (16.0 * eps * eps);
        assert!((q - want).abs() < 1e-12 * want.max(1.0), "{q} vs {want}");
    }

    #[test]
    fn a_term_vanishes_without_asymmetry() {
        let k = kit(32, 0.0, 0.4);
        let config = Configuration::bernoulli(k.geometry.len, 0.4, 2).unwrap();
        let h = TestFunction::bump(0.0, 1.0, 3);
        assert_eq!(k.a_term_increment(&config, &h, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn four_site_hand_values() {
        // n=2, M=2 → 4 sites at u = 0, .5, 1, 1.5; H = tent(−0.25, 1): values 0.75, 0.25, 0, 0
        let params = SimParams::ssep(2, 1.0, 1.0, 0.5).unwrap().with_torus(2);
        let k = FieldKit::new(&params).unwrap().without_frame();
        let h = TestFunction::tent(-0.25, 1.0);
        let config = Configuration::new(vec![1, 0, 0, 1]).unwrap();
        // ∇H: site 0: 2(0.25−0.75) = −1; site 1: 2(0−0.25) = −0.5; site 3: 2(0.75 − 0) = 1.5
        // V_f = −ξ0ξ1 at ρ=1/2 with ξ = η − 1/2 (a=1):
        //   site 0: η0=1, η1=0 → +1/4; site 1: 0,0 → −1/4; site 3: 1,1 → −1/4
        let want_a = (-1.0 * 0.25 + -0.5 * -0.25 + 1.5 * -0.25) / 2f64.sqrt();
        let got_a = k.a_term_increment(&config, &h, 0.0).unwrap();
        assert!((got_a - want_a).abs() < 1e-14, "{got_a} vs {want_a}");
        // ΔH: site 0: 4(0.25 + 0 − 1.5) = −5; site 1: 4(0 + 0.75 − 0.5) = 1;
        //     site 2: 4(0 + 0.25 − 0) = 1; site 3: 4(0.75 + 0 − 0) = 3
        // τ_x h − φ_h = η(x) − 1/2: +.5, −.5, −.5, +.5
        let want_i = (-5.0 * 0.5 + 1.0 * -0.5 + 1.0 * -0.5 + 3.0 * 0.5) / (2.0 * 2f64.sqrt());
        let got_i = k.i_term_increment(&config, &h, 0.0).unwrap();
        assert!((got_i - want_i).abs() < 1e-14, "{got_i} vs {want_i}");
    }
}
