//! Problem abstractions: the loss with its partial gradients, the
//! decision-dependent sampler, and optional closed-form diagnostics.

use nalgebra::DVector;

use crate::domain::InnerDomain;
use crate::exec::Exec;
use crate::rng::{Rng, RngKey};

/// Sizes of the outer variable `x`, inner variable `y` and random vector `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

/// A smooth loss `l(x, y, w)` that is strongly concave in `y` over a
/// bounded inner domain.
///
/// All evaluators must be deterministic in their arguments.
pub trait Problem: Send + Sync {
    fn dims(&self) -> Dims;

    fn loss(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64;

    /// Partial gradient in `x` with `w` held fixed.
    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;

    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;

    /// Partial gradient in the random-vector block.
    fn grad_w(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;

    fn inner_domain(&self) -> &InnerDomain;

    /// Strong-concavity modulus of `l(x, ., w)`.
    fn mu(&self) -> f64;

    /// Lipschitz constant of `grad_y` in `y`; sets the inner ascent step.
    fn inner_smoothness(&self) -> f64;
}

/// Black-box sampler for `w ~ D(x)`.
pub trait DistributionOracle: Send + Sync {
    fn dim(&self) -> usize;

    /// One draw at `x`.
    fn draw(&self, x: &DVector<f64>, rng: &mut Rng) -> DVector<f64>;

    /// `count` i.i.d. draws at `x`. Draw `i` uses `key.child(i)`, so the
    /// result does not depend on the execution strategy.
    fn sample(&self, x: &DVector<f64>, count: usize, key: RngKey, exec: Exec) -> Vec<DVector<f64>> {
        exec.map(count, |i| self.draw(x, &mut key.child(i as u64).rng()))
    }

    /// One draw at each of `points`.
    fn sample_at(&self, points: &[DVector<f64>], key: RngKey, exec: Exec) -> Vec<DVector<f64>> {
        exec.map(points.len(), |i| self.draw(&points[i], &mut key.child(i as u64).rng()))
    }
}

/// Value and gradient of the primal function `Phi(x) = max_y E[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalEstimate {
    pub value: f64,
    pub grad: DVector<f64>,
    /// Monte-Carlo samples used; zero for closed forms.
    pub samples: usize,
}

/// Verification oracle for problems whose primal function is known or
/// can be estimated with full knowledge of the distribution map.
pub trait PrimalDiagnostics: Send + Sync {
    fn primal(&self, x: &DVector<f64>, key: RngKey, exec: Exec) -> PrimalEstimate;
}
