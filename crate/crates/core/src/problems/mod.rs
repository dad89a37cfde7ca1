//! Benchmark problems with verification oracles.

mod credit;
mod dro;
mod synthetic;

pub use credit::{generate_synthetic_credit, load_credit_csv, CreditData, CsvSchema};
pub use dro::{DroParams, DroProblem};
pub use synthetic::{synthetic_primal, synthetic_primal_grad, SyntheticProblem};
