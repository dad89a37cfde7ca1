use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Why an iteration ended the way it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    /// `rho < eta1`.
    LowRatio,
    /// `rho >= eta1` but the surrogate gradient is below `eta2 * delta`.
    SmallGradient,
    /// The trial step failed the sufficient-descent test.
    InsufficientDescent,
    /// Surrogate gradient numerically zero; no step was tried.
    DegenerateGradient,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Accepted => "accepted",
            Outcome::LowRatio => "low_ratio",
            Outcome::SmallGradient => "small_gradient",
            Outcome::InsufficientDescent => "insufficient_descent",
            Outcome::DegenerateGradient => "degenerate_gradient",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Outcome::Accepted,
            Outcome::LowRatio,
            Outcome::SmallGradient,
            Outcome::InsufficientDescent,
            Outcome::DegenerateGradient,
        ]
        .into_iter()
        .find(|o| o.as_str() == s)
    }
}

/// One row of the iteration log.
///
/// Forced rejections carry `rho = -inf` and NaN value estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub delta: f64,
    pub delta_next: f64,
    pub x_before: DVector<f64>,
    pub x_after: DVector<f64>,
    pub rho: f64,
    /// `|grad_x L^k(x_k, y_k)|` at the inexact surrogate maximizer.
    pub grad_norm_surrogate: f64,
    pub v_k: f64,
    pub v_k_half: f64,
    pub accepted: bool,
    pub outcome: Outcome,
    pub descent_lhs: f64,
    pub descent_rhs: f64,
    pub n_llr: usize,
    pub m_k: usize,
    pub m_k_half: usize,
    pub b1_frobenius: f64,
    pub design_condition: f64,
    pub inner_eps: f64,
    /// Primal value and gradient norm at `x_after`, when available.
    pub true_phi: Option<f64>,
    pub true_grad_norm: Option<f64>,
}
