//! Trust-region driver for minimax problems with decision-dependent
//! distributions.
//!
//! Each iteration fits a local linear model of the distribution map in
//! `B(x_k, delta_k)`, takes a radius-length step along the negative
//! surrogate gradient, and accepts it when sampled value estimates confirm
//! the predicted decrease.

mod config;
mod record;

pub use config::{StopRule, TrConfig};
pub use record::{IterationRecord, Outcome};

use log::debug;
use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::exec::Exec;
use crate::inner::{maximize_over_scenarios, scenario_value};
use crate::llr::{fit, generate_poised_set, LlrModel};
use crate::problem::{DistributionOracle, PrimalDiagnostics, Problem};
use crate::rng::RngKey;

/// Surrogate gradients below this norm are treated as zero.
pub const ZERO_GRAD: f64 = 1e-12;
/// Predicted decreases below this magnitude force a rejection.
pub const MIN_PREDICTED_DECREASE: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct TrState {
    pub x: DVector<f64>,
    pub delta: f64,
    pub k: usize,
    pub y_warm: DVector<f64>,
    pub history: Vec<IterationRecord>,
}

impl TrState {
    pub fn new<P: Problem + ?Sized>(
        problem: &P,
        x0: DVector<f64>,
        y0: Option<DVector<f64>>,
        config: &TrConfig,
    ) -> Result<Self> {
        let dims = problem.dims();
        check_dim("initial x", dims.n, x0.len())?;
        let domain = problem.inner_domain();
        let y_warm = match y0 {
            Some(y) => domain.project(&y)?,
            None => domain.center(),
        };
        Ok(TrState {
            x: x0,
            delta: config.delta0,
            k: 0,
            y_warm,
            history: Vec::new(),
        })
    }
}

/// Surrogate value `L^k(x, y)` and its `x`-gradient, averaged over the
/// model's residual scenarios. The gradient carries the chain term
/// `B1 grad_w l` from the dependence of the scenarios on `x`.
pub fn surrogate_value_and_xgrad<P: Problem + ?Sized>(
    problem: &P,
    model: &LlrModel,
    x: &DVector<f64>,
    y: &DVector<f64>,
    exec: Exec,
) -> Result<(f64, DVector<f64>)> {
    let scenarios = model.surrogate_scenarios(x)?;
    check_dim("surrogate y", problem.dims().m, y.len())?;
    let count = scenarios.len();
    if count == 0 {
        return Err(Error::Config("surrogate model has no residual scenarios".into()));
    }
    let b1 = model.b1();
    let (value, grad) = exec.sum_pairs(count, x.len(), |j| {
        let w = &scenarios[j];
        let g = problem.grad_x(x, y, w) + b1 * problem.grad_w(x, y, w);
        (problem.loss(x, y, w), g)
    });
    Ok((value / count as f64, grad / count as f64))
}

/// Step of length `delta` along `-grad`; `None` for a numerically zero
/// gradient.
pub fn trial_step(grad: &DVector<f64>, delta: f64) -> Option<DVector<f64>> {
    let norm = grad.norm();
    if norm < ZERO_GRAD || !norm.is_finite() {
        return None;
    }
    Some(grad * (-delta / norm))
}

/// `lhs_old - lhs_new >= kappa * grad_norm * min(delta, 1)`.
pub fn check_sufficient_descent(lhs_old: f64, lhs_new: f64, grad_norm: f64, delta: f64, kappa_dcp: f64) -> bool {
    lhs_old - lhs_new >= descent_threshold(grad_norm, delta, kappa_dcp)
}

fn descent_threshold(grad_norm: f64, delta: f64, kappa_dcp: f64) -> f64 {
    kappa_dcp * grad_norm * delta.min(1.0)
}

/// Sample-average value estimate at `x`: draws `count` fresh samples,
/// maximizes their average over `y` to tolerance `inner_eps`, and returns
/// the average loss at that maximizer together with the maximizer.
#[allow(clippy::too_many_arguments)]
pub fn estimate_value<P, O>(
    problem: &P,
    oracle: &O,
    x: &DVector<f64>,
    count: usize,
    inner_eps: f64,
    y_warm: &DVector<f64>,
    key: RngKey,
    exec: Exec,
) -> Result<(f64, DVector<f64>)>
where
    P: Problem + ?Sized,
    O: DistributionOracle + ?Sized,
{
    if count == 0 {
        return Err(Error::Config("value estimate needs at least one sample".into()));
    }
    let samples = oracle.sample(x, count, key, exec);
    let report = maximize_over_scenarios(problem, x, &samples, y_warm, inner_eps, exec)?;
    let value = scenario_value(problem, x, &report.maximizer, &samples, exec);
    Ok((value, report.maximizer))
}

/// Result of the two-condition acceptance test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub accepted: bool,
    pub next_delta: f64,
}

/// Accept iff `rho >= eta1` and `grad_norm >= eta2 * delta`; expand the
/// radius (capped at `delta_max`) on acceptance, shrink it otherwise.
pub fn decide(rho: f64, grad_norm: f64, delta: f64, config: &TrConfig) -> StepDecision {
    let accepted = rho >= config.eta1 && grad_norm >= config.eta2 * delta;
    let next_delta = if accepted {
        (config.gamma * delta).min(config.delta_max)
    } else {
        (delta / config.gamma).max(config.delta_min)
    };
    StepDecision { accepted, next_delta }
}

/// Ratio of sampled decrease to surrogate decrease.
pub fn reduction_ratio(v_k: f64, v_k_half: f64, predicted: f64) -> f64 {
    if predicted.abs() < MIN_PREDICTED_DECREASE || !predicted.is_finite() {
        f64::NEG_INFINITY
    } else {
        (v_k - v_k_half) / predicted
    }
}

fn llr_floor(n: usize) -> usize {
    n + 5
}

/// Runs one iteration and appends its record to `state.history`.
///
/// On error the state is left untouched.
pub fn iterate<P, O>(
    state: &mut TrState,
    problem: &P,
    oracle: &O,
    diagnostics: Option<&dyn PrimalDiagnostics>,
    config: &TrConfig,
) -> Result<()>
where
    P: Problem + ?Sized,
    O: DistributionOracle + ?Sized,
{
    let k = state.k;
    step(state, problem, oracle, diagnostics, config).map_err(|e| Error::Iteration { k, source: Box::new(e) })
}

fn step<P, O>(
    state: &mut TrState,
    problem: &P,
    oracle: &O,
    diagnostics: Option<&dyn PrimalDiagnostics>,
    config: &TrConfig,
) -> Result<()>
where
    P: Problem + ?Sized,
    O: DistributionOracle + ?Sized,
{
    let exec = config.exec;
    let dims = problem.dims();
    let delta = state.delta;
    let x = &state.x;
    let key = RngKey::new(config.seed).child(state.k as u64);
    let inner_eps = config.inner_tolerance.epsilon(delta);

    let n_llr = config.llr_count.count(delta, llr_floor(dims.n)).max(dims.n + 1);
    let samples = generate_poised_set(oracle, x, delta, n_llr, config.lambda_max, key.child(0), exec)?;
    let model = fit(&samples)?;

    let scenarios = model.surrogate_scenarios(x)?;
    let y_hat = maximize_over_scenarios(problem, x, &scenarios, &state.y_warm, inner_eps, exec)?.maximizer;
    let (l_old, grad) = surrogate_value_and_xgrad(problem, &model, x, &y_hat, exec)?;
    let grad_norm = grad.norm();

    let mut record = IterationRecord {
        k: state.k,
        delta,
        delta_next: delta,
        x_before: x.clone(),
        x_after: x.clone(),
        rho: f64::NEG_INFINITY,
        grad_norm_surrogate: grad_norm,
        v_k: f64::NAN,
        v_k_half: f64::NAN,
        accepted: false,
        outcome: Outcome::DegenerateGradient,
        descent_lhs: f64::NAN,
        descent_rhs: f64::NAN,
        n_llr,
        m_k: 0,
        m_k_half: 0,
        b1_frobenius: model.b1().norm(),
        design_condition: samples.poisedness(),
        inner_eps,
        true_phi: None,
        true_grad_norm: None,
    };
    let mut next_y = y_hat.clone();

    if let Some(s) = trial_step(&grad, delta) {
        let x_trial = x + s;
        let trial_scenarios = model.surrogate_scenarios(&x_trial)?;
        let y_trial = maximize_over_scenarios(problem, &x_trial, &trial_scenarios, &y_hat, inner_eps, exec)?.maximizer;
        let l_new = scenario_value(problem, &x_trial, &y_trial, &trial_scenarios, exec);
        record.descent_lhs = l_old - l_new;
        record.descent_rhs = descent_threshold(grad_norm, delta, config.kappa_dcp);

        if check_sufficient_descent(l_old, l_new, grad_norm, delta, config.kappa_dcp) {
            let m = config.value_count.count(delta, 1);
            if (m as f64) < delta.powi(-4) {
                debug!("k={}: value sample count {m} below the delta^-4 growth rate", state.k);
            }
            let (old, trial) = exec.join(
                || estimate_value(problem, oracle, x, m, inner_eps, &y_hat, key.child(1), exec),
                || estimate_value(problem, oracle, &x_trial, m, inner_eps, &y_trial, key.child(2), exec),
            );
            let (v_k, _) = old?;
            let (v_k_half, _) = trial?;
            record.v_k = v_k;
            record.v_k_half = v_k_half;
            record.m_k = m;
            record.m_k_half = m;
            record.rho = reduction_ratio(v_k, v_k_half, record.descent_lhs);
            let decision = decide(record.rho, grad_norm, delta, config);
            record.accepted = decision.accepted;
            record.outcome = if decision.accepted {
                Outcome::Accepted
            } else if record.rho >= config.eta1 {
                Outcome::SmallGradient
            } else {
                Outcome::LowRatio
            };
            if decision.accepted {
                record.x_after = x_trial;
                next_y = y_trial;
            }
        } else {
            record.outcome = Outcome::InsufficientDescent;
        }
    }
    record.delta_next = decide(record.rho, grad_norm, delta, config).next_delta;

    if let Some(diag) = diagnostics {
        let est = diag.primal(&record.x_after, key.child(3), exec);
        record.true_phi = Some(est.value);
        record.true_grad_norm = Some(est.grad.norm());
    }
    debug!(
        "k={} delta={:.3e} rho={:.3} |g|={:.3e} {}",
        record.k,
        record.delta,
        record.rho,
        record.grad_norm_surrogate,
        record.outcome.as_str()
    );

    state.x = record.x_after.clone();
    state.delta = record.delta_next;
    state.y_warm = next_y;
    state.k += 1;
    state.history.push(record);
    Ok(())
}

/// Runs up to `config.max_iters` iterations from `x0`.
pub fn solve<P, O>(
    x0: DVector<f64>,
    y0: Option<DVector<f64>>,
    problem: &P,
    oracle: &O,
    diagnostics: Option<&dyn PrimalDiagnostics>,
    config: &TrConfig,
) -> Result<TrState>
where
    P: Problem + ?Sized,
    O: DistributionOracle + ?Sized,
{
    config.validate()?;
    check_dim("oracle output", problem.dims().d, oracle.dim())?;
    let mut state = TrState::new(problem, x0, y0, config)?;
    let mut streak = 0;
    for _ in 0..config.max_iters {
        iterate(&mut state, problem, oracle, diagnostics, config)?;
        if let Some(stop) = &config.stop {
            let last = state.history.last().expect("just pushed");
            if last.grad_norm_surrogate < stop.grad_tol && last.delta < stop.delta_tol {
                streak += 1;
            } else {
                streak = 0;
            }
            if streak >= stop.patience {
                break;
            }
        }
    }
    Ok(state)
}
