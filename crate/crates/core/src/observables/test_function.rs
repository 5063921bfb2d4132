use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Standard deviations kept on each side of a truncated Gaussian.
pub const GAUSSIAN_CUTOFF: f64 = 8.0;

/// Heat-kernel tails beyond this many standard deviations are dropped.
pub(crate) const HEAT_CUTOFF: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Smooth,
    /// Continuous but not C¹.
    Lipschitz,
    Discontinuous,
}

/// A macroscopic test function H: R → R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// amplitude · exp(−(u−center)²/2σ²), cut at `GAUSSIAN_CUTOFF` σ.
    Gaussian { center: f64, sigma: f64, amplitude: f64 },
    /// (1 − ((u−center)/radius)²)^power on |u − center| < radius.
    Bump { center: f64, radius: f64, power: u32 },
    /// G_ℓ(u − origin) with G_ℓ(u) = (1 − u/ℓ)⁺ for u > 0, 0 otherwise.
    Tent { origin: f64, ell: f64 },
    /// i_ε(left): 1/width on (left, left + width].
    Box { left: f64, width: f64 },
    /// 1 on (origin, ∞). Only here to be rejected by support checks.
    Heaviside { origin: f64 },
    /// u ↦ inner(u − shift)
    Shifted { inner: Box<TestFunction>, shift: f64 },
    /// Σ coefficient · term
    Sum { terms: Vec<(f64, TestFunction)> },
    /// Convolution of `inner` with a centered Gaussian of the given variance.
    Heat { inner: Box<TestFunction>, variance: f64 },
}

impl TestFunction {
    pub fn gaussian_density(center: f64, sigma: f64) -> Self {
        TestFunction::Gaussian {
            center,
            sigma,
            amplitude: 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
        }
    }

    pub fn bump(center: f64, radius: f64, power: u32) -> Self {
        TestFunction::Bump { center, radius, power }
    }

    pub fn tent(origin: f64, ell: f64) -> Self {
        TestFunction::Tent { origin, ell }
    }

    pub fn indicator_box(left: f64, width: f64) -> Self {
        TestFunction::Box { left, width }
    }

    pub fn shifted(self, shift: f64) -> Self {
        TestFunction::Shifted {
            inner: Box::new(self),
            shift,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        TestFunction::Sum {
            terms: vec![(factor, self)],
        }
    }

    pub fn combination(terms: Vec<(f64, TestFunction)>) -> Self {
        TestFunction::Sum { terms }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("test function: {what}")));
        match self {
            TestFunction::Gaussian { sigma, amplitude, center } => {
                if !(*sigma > 0.0) || !amplitude.is_finite() || !center.is_finite() {
                    return bad("gaussian needs sigma > 0 and finite amplitude");
                }
            }
            TestFunction::Bump { radius, center, .. } => {
                if !(*radius > 0.0) || !center.is_finite() {
                    return bad("bump needs radius > 0");
                }
            }
            TestFunction::Tent { ell, origin } => {
                if !(*ell > 0.0) || !origin.is_finite() {
                    return bad("tent needs ell > 0");
                }
            }
            TestFunction::Box { width, left } => {
                if !(*width > 0.0) || !left.is_finite() {
                    return bad("box needs width > 0");
                }
            }
            TestFunction::Heaviside { origin } => {
                if !origin.is_finite() {
                    return bad("heaviside origin must be finite");
                }
            }
            TestFunction::Shifted { inner, shift } => {
                if !shift.is_finite() {
                    return bad("shift must be finite");
                }
                inner.validate()?;
            }
            TestFunction::Sum { terms } => {
                for (c, t) in terms {
                    if !c.is_finite() {
                        return bad("coefficients must be finite");
                    }
                    t.validate()?;
                }
            }
            TestFunction::Heat { inner, variance } => {
                if !(*variance >= 0.0) {
                    return bad("heat variance must be >= 0");
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    /// H(u)
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            TestFunction::Gaussian { center, sigma, amplitude } => {
                let z = (u - center) / sigma;
                if z.abs() > GAUSSIAN_CUTOFF {
                    0.0
                } else {
                    amplitude * (-0.5 * z * z).exp()
                }
            }
            TestFunction::Bump { center, radius, power } => {
                let s = (u - center) / radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - s * s).powi(*power as i32)
                }
            }
            TestFunction::Tent { origin, ell } => {
                let s = u - origin;
                if s > 0.0 && s < *ell {
                    1.0 - s / ell
                } else {
                    0.0
                }
            }
            TestFunction::Box { left, width } => {
                if u > *left && u <= left + width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            TestFunction::Heaviside { origin } => {
                if u > *origin {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Shifted { inner, shift } => inner.eval(u - shift),
            TestFunction::Sum { terms } => terms.iter().map(|(c, t)| c * t.eval(u)).sum(),
            TestFunction::Heat { inner, variance } => heat_eval(inner, *variance, u),
        }
    }

    /// ∫_{−∞}^u H, in closed form where available.
    pub fn integral(&self, u: f64) -> Result<f64> {
        Ok(match self {
            TestFunction::Gaussian { center, sigma, amplitude } => {
                let k = GAUSSIAN_CUTOFF;
                let z = ((u - center) / sigma).clamp(-k, k);
                let scale = amplitude * sigma * (std::f64::consts::PI / 2.0).sqrt();
                scale * (erf(z / std::f64::consts::SQRT_2) - erf(-k / std::f64::consts::SQRT_2))
            }
            TestFunction::Bump { center, radius, power } => {
                let s = ((u - center) / radius).clamp(-1.0, 1.0);
                radius * (bump_primitive(s, *power) - bump_primitive(-1.0, *power))
            }
            TestFunction::Tent { origin, ell } => {
                let s = (u - origin).clamp(0.0, *ell);
                s - s * s / (2.0 * ell)
            }
            TestFunction::Box { left, width } => ((u - left).clamp(0.0, *width)) / width,
            TestFunction::Heaviside { .. } => {
                return Err(Error::SupportViolation("the Heaviside function has no finite primitive".into()))
            }
            TestFunction::Shifted { inner, shift } => inner.integral(u - shift)?,
            TestFunction::Sum { terms } => {
                let mut acc = 0.0;
                for (c, t) in terms {
                    acc += c * t.integral(u)?;
                }
                acc
            }
            TestFunction::Heat { .. } => {
                return Err(Error::InvalidParameter(
                    "no closed-form primitive for a heat-smoothed test function".into(),
                ))
            }
        })
    }

    /// Closed interval outside of which H vanishes (may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match self {
            TestFunction::Gaussian { center, sigma, .. } => {
                (center - GAUSSIAN_CUTOFF * sigma, center + GAUSSIAN_CUTOFF * sigma)
            }
            TestFunction::Bump { center, radius, .. } => (center - radius, center + radius),
            TestFunction::Tent { origin, ell } => (*origin, origin + ell),
            TestFunction::Box { left, width } => (*left, left + width),
            TestFunction::Heaviside { origin } => (*origin, f64::INFINITY),
            TestFunction::Shifted { inner, shift } => {
                let (lo, hi) = inner.support();
                (lo + shift, hi + shift)
            }
            TestFunction::Sum { terms } => terms
                .iter()
                .filter(|(c, _)| *c != 0.0)
                .map(|(_, t)| t.support())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| {
                    (a.min(lo), b.max(hi))
                }),
            TestFunction::Heat { inner, variance } => {
                let (lo, hi) = inner.support();
                let pad = HEAT_CUTOFF * variance.sqrt();
                (lo - pad, hi + pad)
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        let (lo, hi) = self.support();
        0.5 * (hi - lo)
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            TestFunction::Gaussian { .. } => Smoothness::Smooth,
            TestFunction::Bump { power, .. } => {
                if *power >= 2 {
                    Smoothness::Smooth
                } else {
                    Smoothness::Lipschitz
                }
            }
            TestFunction::Tent { .. } | TestFunction::Box { .. } | TestFunction::Heaviside { .. } => {
                Smoothness::Discontinuous
            }
            TestFunction::Shifted { inner, .. } => inner.smoothness(),
            TestFunction::Sum { terms } => terms
                .iter()
                .map(|(_, t)| t.smoothness())
                .max_by_key(|s| *s as u8)
                .unwrap_or(Smoothness::Smooth),
            TestFunction::Heat { inner, variance } => {
                if *variance > 0.0 {
                    Smoothness::Smooth
                } else {
                    inner.smoothness()
                }
            }
        }
    }

    /// Points where H or a low derivative jumps; quadrature splits there.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = match self {
            TestFunction::Gaussian { .. } => vec![],
            TestFunction::Bump { center, radius, .. } => vec![center - radius, center + radius],
            TestFunction::Tent { origin, ell } => vec![*origin, origin + ell],
            TestFunction::Box { left, width } => vec![*left, left + width],
            TestFunction::Heaviside { origin } => vec![*origin],
            TestFunction::Shifted { inner, shift } => {
                inner.breakpoints().into_iter().map(|b| b + shift).collect()
            }
            TestFunction::Sum { terms } => terms.iter().flat_map(|(_, t)| t.breakpoints()).collect(),
            TestFunction::Heat { inner, variance } => {
                if *variance > 0.0 {
                    vec![]
                } else {
                    inner.breakpoints()
                }
            }
        };
        let (lo, hi) = self.support();
        if lo.is_finite() {
            out.push(lo);
        }
        if hi.is_finite() {
            out.push(hi);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Fails unless the support is bounded and shorter than the torus.
    pub fn check_fits(&self, torus: f64) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::SupportViolation("test function has unbounded support".into()));
        }
        if hi - lo > torus {
            return Err(Error::SupportViolation(format!(
                "support [{lo}, {hi}] is longer than the torus length {torus}"
            )));
        }
        Ok(())
    }

    /// ∫ H² by adaptive quadrature.
    pub fn l2_norm_squared(&self) -> f64 {
        integrate_product(self, self)
    }
}

/// ∫_{-1}^{s} (1 − y²)^k dy up to a constant: Σ_j C(k,j)(−1)^j s^{2j+1}/(2j+1).
fn bump_primitive(s: f64, k: u32) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for j in 0..=k {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * s.powi(2 * j as i32 + 1) / (2 * j + 1) as f64;
    }
    acc
}

fn heat_eval(inner: &TestFunction, variance: f64, u: f64) -> f64 {
    if variance == 0.0 {
        return inner.eval(u);
    }
    let sd = variance.sqrt();
    let (lo, hi) = inner.support();
    let a = lo.max(u - HEAT_CUTOFF * sd);
    let b = hi.min(u + HEAT_CUTOFF * sd);
    if a >= b {
        return 0.0;
    }
    let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let kernel = |y: f64| {
        let z = (u - y) / sd;
        inner.eval(y) * norm * (-0.5 * z * z).exp()
    };
    let mut cuts = vec![a, b];
    cuts.extend(inner.breakpoints().into_iter().filter(|p| *p > a && *p < b));
    cuts.push(u.clamp(a, b));
    integrate_pieces(&kernel, cuts, 1e-11)
}

/// ∫ H·G over the intersection of supports.
pub(crate) fn integrate_product(h: &TestFunction, g: &TestFunction) -> f64 {
    let (h_lo, h_hi) = h.support();
    let (g_lo, g_hi) = g.support();
    let a = h_lo.max(g_lo);
    let b = h_hi.min(g_hi);
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return 0.0;
    }
    let mut cuts = vec![a, b];
    cuts.extend(h.breakpoints().into_iter().chain(g.breakpoints()).filter(|p| *p > a && *p < b));
    integrate_pieces(&|x: f64| h.eval(x) * g.eval(x), cuts, 1e-10)
}

/// Sum of adaptive Gauss-Kronrod integrals between consecutive cut points.
pub(crate) fn integrate_pieces(f: &dyn Fn(f64) -> f64, mut cuts: Vec<f64>, tol: f64) -> f64 {
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = cuts.len().saturating_sub(1).max(1) as f64;
    cuts.windows(2)
        .map(|w| adaptive_gk(f, w[0], w[1], tol / pieces, 0))
        .sum()
}

// 7-point Gauss / 15-point Kronrod nodes on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive_gk(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol.max(1e-300) || depth >= 40 || (b - a) < 1e-14 * (1.0 + a.abs()) {
        return value;
    }
    let m = 0.5 * (a + b);
    adaptive_gk(f, a, m, 0.5 * tol, depth + 1) + adaptive_gk(f, m, b, 0.5 * tol, depth + 1)
}
