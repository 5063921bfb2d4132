use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::engine::SimParams;
use crate::error::Result;
use crate::lattice::ThermoFunctions;
use crate::observables::{integrate_product, Geometry, TestFunction};

/// Coefficients of the limiting equations at one density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    /// φ'_h(ρ)
    pub diffusivity: f64,
    /// β(ρ)
    pub noise: f64,
    /// a β'(ρ)
    pub drift: f64,
    /// a β''(ρ)/2
    pub kpz: f64,
    /// χ(ρ)
    pub chi: f64,
}

impl LimitSpec {
    pub fn new(thermo: &ThermoFunctions, a: f64) -> Self {
        LimitSpec {
            diffusivity: thermo.phi_h_prime,
            noise: thermo.beta,
            drift: a * thermo.beta_prime,
            kpz: a * thermo.beta_double_prime / 2.0,
            chi: thermo.chi,
        }
    }

    pub fn from_params(params: &SimParams) -> Self {
        Self::new(&params.thermo(), params.a)
    }
}

/// T_τH for the semigroup of (D/2)Δ: convolution with a Gaussian of variance Dτ.
pub fn heat_semigroup(h: &TestFunction, tau: f64, diffusivity: f64) -> TestFunction {
    let variance = diffusivity * tau;
    if variance == 0.0 {
        return h.clone();
    }
    match h {
        // keep a single convolution layer so the quadrature stays one level deep
        TestFunction::Heat { inner, variance: v } => TestFunction::Heat {
            inner: inner.clone(),
            variance: v + variance,
        },
        _ => TestFunction::Heat {
            inner: Box::new(h.clone()),
            variance,
        },
    }
}

/// E[Y_t(H)Y_s(G)] = χ ∫ T_{t−s}H · G in the limit; arguments are swapped when t < s.
pub fn ou_covariance(h: &TestFunction, g: &TestFunction, t: f64, s: f64, spec: &LimitSpec) -> f64 {
    if t < s {
        return ou_covariance(g, h, s, t, spec);
    }
    let smoothed = heat_semigroup(h, t - s, spec.diffusivity);
    spec.chi * integrate_product(&smoothed, g)
}

/// The current covariance as displayed with the limit theorem:
/// √(2φ'/π) χ (√t + √s − √(t−s)) for s ≤ t.
pub fn fbm_covariance(t: f64, s: f64, spec: &LimitSpec) -> f64 {
    let (t, s) = if s > t { (s, t) } else { (t, s) };
    (2.0 * spec.diffusivity / std::f64::consts::PI).sqrt()
        * spec.chi
        * (t.sqrt() + s.sqrt() - (t - s).sqrt())
}

/// The same covariance with the conventional fBm(1/4) prefactor: the value of
/// χ lim ∫ (T_{t−s}G G − G T_tG − G T_sG + G²) for G → 1_(0,∞), which is half
/// of [`fbm_covariance`].
pub fn fbm_covariance_conventional(t: f64, s: f64, spec: &LimitSpec) -> f64 {
    0.5 * fbm_covariance(t, s, spec)
}

/// Smallest eigenvalue of the Gram matrix [cov(t_i, t_j)].
pub fn gram_min_eigenvalue(times: &[f64], cov: impl Fn(f64, f64) -> f64) -> f64 {
    let k = times.len();
    let m = DMatrix::from_fn(k, k, |i, j| cov(times[i], times[j]));
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Whether the (1 + a/n^γ) factor of the quadratic-variation display is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QvForm {
    /// t (1/2n) Σ (∇ⁿH)² 2β (1 + a/n^γ)
    AsDisplayed,
    /// t (1/n) Σ (∇ⁿH)² β: the exact ν_ρ expectation of the jump-rate sum,
    /// since E[c η(0)(1−η(1))] = E[c η(1)(1−η(0))] = β and p + q = 1.
    Stationary,
}

/// ν_ρ-expectation of ⟨M(H)⟩_t.
pub fn qv_prediction(
    h: &TestFunction,
    t: f64,
    params: &SimParams,
    thermo: &ThermoFunctions,
    form: QvForm,
) -> Result<f64> {
    let energy = Geometry::from_params(params).gradient_energy(h)?;
    let base = t * 0.5 * energy * 2.0 * thermo.beta;
    Ok(match form {
        QvForm::AsDisplayed => base * (1.0 + params.asymmetry().bias()),
        QvForm::Stationary => base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ssep_half() -> LimitSpec {
        LimitSpec {
            diffusivity: 1.0,
            noise: 0.25,
            drift: 0.0,
            kpz: -1.0,
            chi: 0.25,
        }
    }

    #[test]
    fn fbm_values() {
        let spec = ssep_half();
        assert_eq!(fbm_covariance(1.0, 0.0, &spec), 0.0);
        let v = fbm_covariance(1.0, 1.0, &spec);
        assert!((v - 0.5 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-12);
        for (t, s) in [(1.0, 0.3), (2.0, 2.0), (0.7, 0.1)] {
            let a = fbm_covariance(4.0 * t, 4.0 * s, &spec);
            assert!((a - 2.0 * fbm_covariance(t, s, &spec)).abs() < 1e-14);
            assert_eq!(fbm_covariance(t, s, &spec), fbm_covariance(s, t, &spec));
        }
    }

    #[test]
    fn fbm_gram_is_psd() {
        let spec = ssep_half();
        let times: Vec<f64> = (1..=25).map(|k| k as f64 * 0.17).collect();
        assert!(gram_min_eigenvalue(&times, |t, s| fbm_covariance(t, s, &spec)) > -1e-10);
    }

    #[test]
    fn ou_gaussian_pair() {
        // ∫ N(0, σ₁²) N(0, σ₂²) = (2π(σ₁² + σ₂²))^{−1/2}; here σ₁² = 1 + Dτ, σ₂² = 1
        let spec = ssep_half();
        let h = TestFunction::gaussian_density(0.0, 1.0);
        let got = ou_covariance(&h, &h, 1.5, 0.5, &spec);
        let want = 0.25 / (2.0 * std::f64::consts::PI * 3.0).sqrt();
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        assert!((want - 0.057_582_358).abs() < 1e-9);
    }

    #[test]
    fn ou_equal_times_is_l2() {
        let spec = ssep_half();
        let h = TestFunction::bump(0.1, 0.8, 3);
        let got = ou_covariance(&h, &h, 0.4, 0.4, &spec);
        assert!((got - 0.25 * h.l2_norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn ou_symmetry_and_far_supports() {
        let spec = ssep_half();
        let h = TestFunction::bump(0.0, 0.5, 4);
        let g = TestFunction::tent(0.2, 1.0);
        let a = ou_covariance(&h, &g, 1.0, 0.3, &spec);
        let b = ou_covariance(&g, &h, 0.3, 1.0, &spec);
        assert_eq!(a, b);
        let far = TestFunction::bump(12.0, 0.5, 4);
        assert!(ou_covariance(&h, &far, 0.2, 0.0, &spec).abs() < 1e-8);
    }

    #[test]
    fn semigroup_identity_and_mass() {
        let h = TestFunction::tent(-0.3, 1.2);
        assert_eq!(heat_semigroup(&h, 0.0, 1.0), h);
        let smoothed = heat_semigroup(&h, 0.3, 1.5);
        let one = TestFunction::bump(0.0, 100.0, 0);
        let mass = integrate_product(&smoothed, &one);
        assert!((mass - h.integral(10.0).unwrap()).abs() < 1e-8, "{mass}");
    }

    #[test]
    fn semigroup_law() {
        // nested quadrature against the single convolution
        let h = TestFunction::bump(0.0, 0.6, 2);
        let once = TestFunction::Heat {
            inner: Box::new(h.clone()),
            variance: 0.1,
        };
        let twice = TestFunction::Heat {
            inner: Box::new(once),
            variance: 0.15,
        };
        let direct = heat_semigroup(&h, 0.25, 1.0);
        for u in [-1.1, -0.4, 0.0, 0.3, 0.9] {
            assert!((twice.eval(u) - direct.eval(u)).abs() < 1e-6, "u={u}");
        }
    }

    #[test]
    fn qv_factor_ratio() {
        let params = SimParams::ssep(64, 1.0, 1.0, 0.5).unwrap();
        let thermo = params.thermo();
        let h = TestFunction::bump(0.0, 1.0, 4);
        let with = qv_prediction(&h, 1.0, &params, &thermo, QvForm::AsDisplayed).unwrap();
        let without = qv_prediction(&h, 1.0, &params, &thermo, QvForm::Stationary).unwrap();
        assert!((with / without - (1.0 + 1.0 / 64.0)).abs() < 1e-15);
        let zero = TestFunction::bump(0.0, 1.0, 4).scaled(0.0);
        assert_eq!(qv_prediction(&zero, 1.0, &params, &thermo, QvForm::AsDisplayed).unwrap(), 0.0);
    }

    #[test]
    fn qv_matches_continuum_norm() {
        // (1/n) Σ (∇ⁿH)² → ‖H'‖²; for the bump (1−u²)² on (−1,1), ‖H'‖² = 256/105
        let params = SimParams::ssep(512, 1.0, 0.0, 0.5).unwrap();
        let thermo = params.thermo();
        let h = TestFunction::bump(0.0, 1.0, 2);
        let got = qv_prediction(&h, 1.0, &params, &thermo, QvForm::Stationary).unwrap();
        let want = 0.25 * 256.0 / 105.0;
        assert!((got - want).abs() < 1e-4 * want, "{got} vs {want}");
    }
}
