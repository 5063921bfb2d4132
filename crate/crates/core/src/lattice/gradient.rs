use nalgebra::{DMatrix, DVector};

use super::local::LocalFunction;
use super::RateModel;
use crate::error::{Error, Result};

/// Residual tolerance below which the gradient equation counts as solved.
pub const GRADIENT_TOLERANCE: f64 = 1e-10;

/// A solution h of c(η)(η(1) − η(0)) = τ₁h(η) − h(η) with h(all-empty) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSolution {
    pub h: LocalFunction,
    /// max |τ₁h − h − c(η(1) − η(0))| over local configurations.
    pub residual: f64,
}

/// Solve the gradient condition for `h` supported on `{-r, …, r}`.
pub fn solve_gradient(model: &RateModel) -> Result<GradientSolution> {
    solve_gradient_on(model, model.radius())
}

/// As [`solve_gradient`] with h supported on `{-h_radius, …, h_radius}`.
pub fn solve_gradient_on(model: &RateModel, h_radius: usize) -> Result<GradientSolution> {
    if h_radius < model.radius() {
        return Err(Error::InvalidParameter(format!(
            "h radius {h_radius} smaller than rate radius {}",
            model.radius()
        )));
    }
    let r = h_radius as isize;
    let width = 2 * h_radius + 2;
    let h_width = 2 * h_radius + 1;
    if width > 20 {
        return Err(Error::WindowTooLarge { sites: width, cap: 1 << 20 });
    }
    let c = model.local().extend_to(-r, width)?;
    let rows = 1usize << width;
    let unknowns = (1usize << h_width) - 1;
    let h_mask = (1usize << h_width) - 1;

    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut rhs = DVector::<f64>::zeros(rows);
    // site j sits at bit j + r
    let bit0 = h_radius;
    let bit1 = h_radius + 1;
    for sigma in 0..rows {
        let shifted = (sigma >> 1) & h_mask; // τ₁h reads sites 1-r..=1+r
        let base = sigma & h_mask; // h reads sites -r..=r
        if shifted != 0 {
            a[(sigma, shifted - 1)] += 1.0;
        }
        if base != 0 {
            a[(sigma, base - 1)] -= 1.0;
        }
        let eta0 = ((sigma >> bit0) & 1) as f64;
        let eta1 = ((sigma >> bit1) & 1) as f64;
        rhs[sigma] = c.values[sigma] * (eta1 - eta0);
    }

    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("least squares failed: {e}")))?;
    let residual = (&a * &x - &rhs).amax();

    let mut values = Vec::with_capacity(1 << h_width);
    values.push(0.0);
    values.extend(x.iter().copied());
    let h = LocalFunction::new(-r, h_width, values)?;
    if residual > GRADIENT_TOLERANCE {
        return Err(Error::NotGradient {
            name: model.name().to_string(),
            residual,
        });
    }
    Ok(GradientSolution { h, residual })
}

/// max |τ₁h − h − c(η(1) − η(0))| for a given h.
pub fn gradient_residual(model: &RateModel, h: &LocalFunction) -> Result<f64> {
    let lo = h.offset.min(model.window_offset());
    let hi = (h.end() + 1).max(model.window_offset() + model.window_width() as isize);
    let width = (hi - lo) as usize;
    let c = model.local().extend_to(lo, width)?;
    let h_here = h.extend_to(lo, width)?;
    let h_shifted = LocalFunction {
        offset: h.offset + 1,
        width: h.width,
        values: h.values.clone(),
    }
    .extend_to(lo, width)?;
    let b0 = (-lo) as usize;
    Ok((0..1usize << width)
        .map(|s| {
            let d = ((s >> (b0 + 1)) & 1) as f64 - ((s >> b0) & 1) as f64;
            (h_shifted.values[s] - h_here.values[s] - c.values[s] * d).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssep_gives_occupation() {
        let sol = solve_gradient(&RateModel::ssep()).unwrap();
        assert_eq!(sol.h.offset, 0);
        assert!((sol.h.values[0]).abs() < 1e-15);
        assert!((sol.h.values[1] - 1.0).abs() < 1e-12);
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn constant_two_doubles_h() {
        let sol = solve_gradient(&RateModel::constant(2.0).unwrap()).unwrap();
        assert!((sol.h.values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_example_matches_closed_form() {
        let b = 0.3;
        let model = RateModel::gradient_example(b).unwrap();
        let sol = solve_gradient(&model).unwrap();
        let expected = LocalFunction::from_fn(-1, 3, |o| {
            let (m, z, p) = (o[0] as f64, o[1] as f64, o[2] as f64);
            z + b * (m * z + z * p - m * p)
        });
        for (got, want) in sol.h.values.iter().zip(&expected.values) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(gradient_residual(&model, &expected).unwrap() < 1e-15);
    }

    #[test]
    fn non_gradient_rate_is_reported() {
        // c = 1 + η(-1)η(2): no local h on {-1,0,1} solves the equation
        let model = RateModel::from_fn("corr", 1, |o| 1.0 + (o[0] * o[3]) as f64).unwrap();
        match solve_gradient(&model) {
            Err(Error::NotGradient { residual, .. }) => {
                // regression value from the least-squares solve
                assert!((residual - 0.25).abs() < 1e-9, "residual {residual}");
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
