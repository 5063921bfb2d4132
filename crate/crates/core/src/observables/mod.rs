//! Fluctuation fields, currents and the martingale integrands.

mod current;
mod field;
mod integral;
mod series;
mod test_function;

pub use current::{moving_current_closed_form, CurrentTally};
pub use field::{density_field, FieldKit, FrameShift, Geometry, Kernel};
pub use integral::{IntegralTerm, IntegralTracker};
pub use series::{
    cumulative_trapezoid, martingale_residual, martingale_residual_exact, read_series_csv,
    uniform_grid, MartingaleColumns, ObservableSeries, SeriesRow,
};
pub use test_function::{Smoothness, TestFunction, GAUSSIAN_CUTOFF};
pub(crate) use test_function::integrate_product;
