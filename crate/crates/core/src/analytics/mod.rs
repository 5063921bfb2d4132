//! Limit formulas and the statistics that hold Monte Carlo ensembles against them.

mod accumulator;
mod bg;
mod ensemble;
mod fit;
mod limits;
mod report;

pub use accumulator::EnsembleAccumulator;
pub use bg::{bg_second_moment, translated_copies, BgEstimate, BgOptions, Quadrature};
pub use ensemble::{default_workers, run_ensemble, EnsembleOutcome, CHUNK_SIZE};
pub use fit::{fit_power_law, PowerLawFit, ScalePoint};
pub use limits::{
    fbm_covariance, fbm_covariance_conventional, gram_min_eigenvalue, heat_semigroup, ou_covariance,
    qv_prediction, LimitSpec, QvForm,
};
pub use report::{z_score, AnalysisReport, Comparison, Z_PASS};
