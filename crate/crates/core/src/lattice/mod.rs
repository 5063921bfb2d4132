//! Configurations, rate models and the exact small-system checks.

mod config;
mod exact;
mod gradient;
mod local;
mod model;
mod thermo;

use serde::{Deserialize, Serialize};

pub use config::Configuration;
pub use exact::{
    detailed_balance_residual, exact_invariance_residual, Asymmetry, MAX_EXACT_LEN,
};
pub use gradient::{
    gradient_residual, solve_gradient, solve_gradient_on, GradientSolution, GRADIENT_TOLERANCE,
};
pub use local::{Bernstein, LocalFunction, DEFAULT_ENUMERATION_CAP};
pub use model::{ModelDef, RateModel};
pub use thermo::{chi, thermo, ThermoFunctions, ThermoPolys};

use crate::error::{Error, Result};

pub const DETAILED_BALANCE_TOLERANCE: f64 = 1e-12;
pub const INVARIANCE_TOLERANCE: f64 = 1e-10;

/// Residuals of the model hypotheses on a small torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub model: String,
    pub bounds: (f64, f64),
    pub gradient_residual: f64,
    pub detailed_balance_residual: f64,
    /// (len, gamma, a, residual)
    pub invariance: Vec<(usize, f64, f64, f64)>,
}

impl HypothesisReport {
    pub fn max_invariance(&self) -> f64 {
        self.invariance.iter().map(|r| r.3).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.gradient_residual < GRADIENT_TOLERANCE
            && self.detailed_balance_residual < DETAILED_BALANCE_TOLERANCE
            && self.max_invariance() < INVARIANCE_TOLERANCE
    }
}

/// Run every hypothesis check at torus sizes `lens`, a ∈ {0, 1}, γ ∈ {1/2, 1}.
pub fn check_hypotheses(model: &RateModel, lens: &[usize], rho: f64) -> Result<HypothesisReport> {
    let gradient_residual = match solve_gradient(model) {
        Ok(solution) => solution.residual,
        Err(Error::NotGradient { residual, .. }) => residual,
        Err(e) => return Err(e),
    };
    let probe_len = lens.iter().copied().max().unwrap_or(8).min(MAX_EXACT_LEN);
    let detailed = detailed_balance_residual(model, rho, probe_len)?;
    let mut invariance = Vec::new();
    for &len in lens {
        for gamma in [0.5, 1.0] {
            for a in [0.0, 1.0] {
                let asym = Asymmetry::new(4, gamma, a)?;
                invariance.push((len, gamma, a, exact_invariance_residual(model, len, asym, rho)?));
            }
        }
    }
    Ok(HypothesisReport {
        model: model.name().to_string(),
        bounds: model.bounds(),
        gradient_residual,
        detailed_balance_residual: detailed,
        invariance,
    })
}

/// A rate model that passed the gradient, reversibility and invariance checks,
/// bundled with its gradient function and thermodynamic polynomials.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    model: RateModel,
    h: LocalFunction,
    polys: ThermoPolys,
    report: HypothesisReport,
}

impl ValidatedModel {
    pub fn new(model: RateModel) -> Result<Self> {
        let width = model.window_width();
        let len = (width + 2).max(6);
        let lens: Vec<usize> = if len <= MAX_EXACT_LEN { vec![len] } else { vec![] };
        if lens.is_empty() {
            return Err(Error::SystemTooLarge {
                len,
                max: MAX_EXACT_LEN,
            });
        }
        let report = check_hypotheses(&model, &lens, 0.4)?;
        if report.detailed_balance_residual >= DETAILED_BALANCE_TOLERANCE {
            return Err(Error::HypothesisViolated {
                name: model.name().to_string(),
                check: "detailed balance",
                residual: report.detailed_balance_residual,
            });
        }
        if report.max_invariance() >= INVARIANCE_TOLERANCE {
            return Err(Error::HypothesisViolated {
                name: model.name().to_string(),
                check: "invariance of the product measure",
                residual: report.max_invariance(),
            });
        }
        let h = solve_gradient(&model)?.h;
        let polys = ThermoPolys::new(&model, &h, DEFAULT_ENUMERATION_CAP)?;
        Ok(ValidatedModel {
            model,
            h,
            polys,
            report,
        })
    }

    pub fn ssep() -> Self {
        Self::new(RateModel::ssep()).expect("SSEP satisfies every hypothesis")
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn h(&self) -> &LocalFunction {
        &self.h
    }

    pub fn polys(&self) -> &ThermoPolys {
        &self.polys
    }

    pub fn report(&self) -> &HypothesisReport {
        &self.report
    }

    pub fn thermo(&self, rho: f64) -> ThermoFunctions {
        self.polys.at(rho)
    }
}
