//! Inexact inner maximization by projected gradient ascent.
//!
//! For a `mu`-strongly concave, `L`-smooth scenario average the ascent map
//! with step `1/L` is a `(1 - mu/L)`-contraction, so
//! `|y_{t+1} - y*| <= (L/mu + 1) |y_{t+1} - y_t|`. Iteration stops once that
//! bound drops below the requested tolerance.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::exec::Exec;
use crate::problem::Problem;

pub const MAX_INNER_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolveReport {
    pub maximizer: DVector<f64>,
    pub iterations: usize,
    pub final_step_norm: f64,
    pub tolerance_target: f64,
    /// `(L/mu + 1) * final_step_norm`, an upper bound on the distance to
    /// the exact maximizer.
    pub error_bound: f64,
}

/// Mean of `grad_y l(x, y, w)` over the scenarios.
pub fn scenario_grad_y<P: Problem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y: &DVector<f64>,
    scenarios: &[DVector<f64>],
    exec: Exec,
) -> DVector<f64> {
    let total = exec.sum_vectors(scenarios.len(), y.len(), |j| problem.grad_y(x, y, &scenarios[j]));
    total / scenarios.len() as f64
}

/// Mean of `l(x, y, w)` over the scenarios.
pub fn scenario_value<P: Problem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y: &DVector<f64>,
    scenarios: &[DVector<f64>],
    exec: Exec,
) -> f64 {
    exec.sum(scenarios.len(), |j| problem.loss(x, y, &scenarios[j])) / scenarios.len() as f64
}

/// Maximizes the scenario average `g(y) = mean_j l(x, y, w_j)` over the
/// inner domain to within `epsilon` of the exact maximizer.
pub fn maximize_over_scenarios<P: Problem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    scenarios: &[DVector<f64>],
    y_init: &DVector<f64>,
    epsilon: f64,
    exec: Exec,
) -> Result<InnerSolveReport> {
    if scenarios.is_empty() {
        return Err(Error::Config("inner solve needs at least one scenario".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "inner tolerance must be positive, got {epsilon}"
        )));
    }
    let dims = problem.dims();
    check_dim("inner start", dims.m, y_init.len())?;
    check_dim("inner x", dims.n, x.len())?;
    let mu = problem.mu();
    let smooth = problem.inner_smoothness();
    if !(mu > 0.0) || !(smooth >= mu) {
        return Err(Error::Config(format!(
            "inner solve needs 0 < mu <= smoothness, got mu = {mu}, smoothness = {smooth}"
        )));
    }
    let domain = problem.inner_domain();
    let factor = smooth / mu + 1.0;
    let step = 1.0 / smooth;

    let mut y = domain.project(y_init)?;
    let mut step_norm = f64::INFINITY;
    for it in 1..=MAX_INNER_ITERS {
        let g = scenario_grad_y(problem, x, &y, scenarios, exec);
        let next = domain.project(&(&y + g * step))?;
        step_norm = (&next - &y).norm();
        y = next;
        if factor * step_norm <= epsilon {
            return Ok(InnerSolveReport {
                maximizer: y,
                iterations: it,
                final_step_norm: step_norm,
                tolerance_target: epsilon,
                error_bound: factor * step_norm,
            });
        }
    }
    Err(Error::InnerNonConvergence {
        report: InnerSolveReport {
            maximizer: y,
            iterations: MAX_INNER_ITERS,
            final_step_norm: step_norm,
            tolerance_target: epsilon,
            error_bound: factor * step_norm,
        },
    })
}
