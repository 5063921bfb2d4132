pub mod error;
pub mod lattice;

pub use error::{Error, Result};
pub mod engine;
pub mod observables;
pub mod analytics;
pub mod hydro;
pub mod harness;
