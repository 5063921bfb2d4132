//! Hydrodynamic limit: viscous Burgers solver and empirical density profiles.

mod compare;
mod profile;
mod solver;

pub use compare::{block_average, hydro_compare, HydroComparison, HydroOptions};
pub use profile::{sample_profile_measure, sample_profile_with, DensityProfile};
pub use solver::{evolve, plan_steps, solve_burgers, StepPlan};
