//! Distributionally robust logistic regression with decision-dependent
//! features.
//!
//! `L(x, y) = (1/N) sum_i y_i log(1 + exp(-b_i a_i^T x)) + f(x) - g(y)` with
//! `f(x) = l1 sum_j a x_j^2 / (1 + a x_j^2)`, `g(y) = 0.5 l2 |N y - 1|^2` and
//! `y` on the probability simplex. Features shift with the decision as
//! `a_i(x) = a0_i + V sin(x)`, `V = diag(shift_scale)`.
//!
//! The random vector `w` is the stacked feature bundle `(a_1, ..., a_N)`, so
//! `d = N n`.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{project_simplex, InnerDomain};
use crate::error::{check_dim, Error, Result};
use crate::exec::Exec;
use crate::problem::{Dims, DistributionOracle, PrimalDiagnostics, PrimalEstimate, Problem};
use crate::rng::{Rng, RngKey};

use super::CreditData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroParams {
    pub shift_scale: f64,
    pub lambda1: f64,
    /// `None` selects `10 / N^2`.
    pub lambda2: Option<f64>,
    pub alpha: f64,
    /// Std of Gaussian noise added to every feature draw.
    pub feature_noise: f64,
    /// Monte-Carlo draws used by the primal diagnostics.
    pub diagnostic_samples: usize,
}

impl Default for DroParams {
    fn default() -> Self {
        DroParams {
            shift_scale: 5.0,
            lambda1: 1.0,
            lambda2: None,
            alpha: 1.0,
            feature_noise: 0.0,
            diagnostic_samples: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DroProblem {
    data: CreditData,
    shift_scale: f64,
    lambda1: f64,
    lambda2: f64,
    alpha: f64,
    feature_noise: f64,
    diagnostic_samples: usize,
    domain: InnerDomain,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl DroProblem {
    pub fn new(data: CreditData, params: DroParams) -> Result<Self> {
        let rows = data.rows();
        if rows == 0 || data.cols() == 0 {
            return Err(Error::Config("DRO problem needs a non-empty dataset".into()));
        }
        let lambda2 = params.lambda2.unwrap_or(10.0 / (rows * rows) as f64);
        if !(lambda2 >= 0.0) || !(params.alpha >= 0.0) || !(params.feature_noise >= 0.0) {
            return Err(Error::Config("lambda2, alpha and feature_noise must be >= 0".into()));
        }
        if params.diagnostic_samples == 0 {
            return Err(Error::Config("diagnostic_samples must be >= 1".into()));
        }
        Ok(DroProblem {
            domain: InnerDomain::simplex(rows)?,
            data,
            shift_scale: params.shift_scale,
            lambda1: params.lambda1,
            lambda2,
            alpha: params.alpha,
            feature_noise: params.feature_noise,
            diagnostic_samples: params.diagnostic_samples,
        })
    }

    pub fn data(&self) -> &CreditData {
        &self.data
    }
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// Monte-Carlo draws behind each primal estimate.
    pub fn diagnostic_samples(&self) -> usize {
        self.diagnostic_samples
    }

    fn rows(&self) -> usize {
        self.data.rows()
    }

    fn nfeat(&self) -> usize {
        self.data.cols()
    }

    /// Nonconvex regularizer `f(x)`.
    pub fn regularizer(&self, x: &DVector<f64>) -> f64 {
        self.lambda1
            * x.iter()
                .map(|v| self.alpha * v * v / (1.0 + self.alpha * v * v))
                .sum::<f64>()
    }

    fn regularizer_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| {
            let q = 1.0 + self.alpha * v * v;
            self.lambda1 * 2.0 * self.alpha * v / (q * q)
        })
    }

    fn robust_penalty(&self, y: &DVector<f64>) -> f64 {
        let nn = y.len() as f64;
        0.5 * self.lambda2 * y.iter().map(|v| (nn * v - 1.0).powi(2)).sum::<f64>()
    }

    /// Deterministic part of the map: stacked `a0_i + V sin(x)`.
    pub fn shifted_features(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.nfeat();
        let shift = x.map(|v| self.shift_scale * v.sin());
        DVector::from_fn(self.rows() * n, |k, _| self.data.feature(k / n, k % n) + shift[k % n])
    }

    // Margin z_i = -b_i a_i^T x for the feature block of sample i in `w`.
    fn margin(&self, x: &DVector<f64>, w: &DVector<f64>, i: usize) -> f64 {
        let n = self.nfeat();
        let dot: f64 = (0..n).map(|j| w[i * n + j] * x[j]).sum();
        -self.data.label(i) * dot
    }

    /// Per-sample logistic losses under the feature bundle `w`.
    fn sample_losses(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.rows(), |i, _| softplus(self.margin(x, w, i)))
    }

    /// Exact objective on the rows in `indices` (all rows when `None`),
    /// using the decision-dependent features at `x`. `y` must lie on the
    /// simplex of the selected rows.
    pub fn objective(&self, x: &DVector<f64>, y: &DVector<f64>, indices: Option<&[usize]>) -> Result<f64> {
        check_dim("DRO x", self.nfeat(), x.len())?;
        let all: Vec<usize>;
        let idx = match indices {
            Some(idx) => idx,
            None => {
                all = (0..self.rows()).collect();
                &all
            }
        };
        if let Some(bad) = idx.iter().find(|&&i| i >= self.rows()) {
            return Err(Error::Data(format!(
                "sample index {bad} out of range 0..{}",
                self.rows()
            )));
        }
        check_dim("DRO y", idx.len(), y.len())?;
        if idx.is_empty() {
            return Err(Error::Data("empty index set".into()));
        }
        let nn = idx.len() as f64;
        let shift = x.map(|v| self.shift_scale * v.sin());
        let loss: f64 = idx
            .iter()
            .zip(y.iter())
            .map(|(&i, yi)| {
                let dot: f64 = (0..self.nfeat())
                    .map(|j| (self.data.feature(i, j) + shift[j]) * x[j])
                    .sum();
                yi * softplus(-self.data.label(i) * dot)
            })
            .sum();
        Ok(loss / nn + self.regularizer(x) - self.robust_penalty(y))
    }

    // Total-derivative direction: grad_x + J_psi^T grad_w at one scenario.
    fn total_grad(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.nfeat();
        let gw = self.grad_w(x, y, w);
        let mut g = self.grad_x(x, y, w);
        for j in 0..n {
            let s: f64 = (0..self.rows()).map(|i| gw[i * n + j]).sum();
            g[j] += self.shift_scale * x[j].cos() * s;
        }
        g
    }
}

impl Problem for DroProblem {
    fn dims(&self) -> Dims {
        Dims {
            n: self.nfeat(),
            m: self.rows(),
            d: self.rows() * self.nfeat(),
        }
    }

    fn loss(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let nn = self.rows() as f64;
        self.sample_losses(x, w).dot(y) / nn + self.regularizer(x) - self.robust_penalty(y)
    }

    fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.nfeat();
        let nn = self.rows() as f64;
        let mut g = self.regularizer_grad(x);
        for i in 0..self.rows() {
            let b = self.data.label(i);
            let c = y[i] * sigmoid(self.margin(x, w, i)) * (-b) / nn;
            for j in 0..n {
                g[j] += c * w[i * n + j];
            }
        }
        g
    }

    fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let nn = self.rows() as f64;
        let losses = self.sample_losses(x, w);
        DVector::from_fn(self.rows(), |i, _| {
            losses[i] / nn - self.lambda2 * nn * (nn * y[i] - 1.0)
        })
    }

    fn grad_w(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.nfeat();
        let nn = self.rows() as f64;
        let mut g = DVector::zeros(self.rows() * n);
        for i in 0..self.rows() {
            let b = self.data.label(i);
            let c = y[i] * sigmoid(self.margin(x, w, i)) * (-b) / nn;
            for j in 0..n {
                g[i * n + j] = c * x[j];
            }
        }
        g
    }

    fn inner_domain(&self) -> &InnerDomain {
        &self.domain
    }

    fn mu(&self) -> f64 {
        let nn = self.rows() as f64;
        self.lambda2 * nn * nn
    }

    fn inner_smoothness(&self) -> f64 {
        self.mu()
    }
}

impl DistributionOracle for DroProblem {
    fn dim(&self) -> usize {
        self.rows() * self.nfeat()
    }

    fn draw(&self, x: &DVector<f64>, rng: &mut Rng) -> DVector<f64> {
        let mut w = self.shifted_features(x);
        if self.feature_noise > 0.0 {
            for v in w.iter_mut() {
                let e: f64 = StandardNormal.sample(rng);
                *v += self.feature_noise * e;
            }
        }
        w
    }
}

impl PrimalDiagnostics for DroProblem {
    /// Monte-Carlo primal value and gradient. The inner maximizer of the
    /// sample-averaged objective is a simplex projection because the
    /// concave part is isotropic.
    fn primal(&self, x: &DVector<f64>, key: RngKey, exec: Exec) -> PrimalEstimate {
        let count = self.diagnostic_samples;
        let nn = self.rows() as f64;
        let draw = |s: usize| self.draw(x, &mut key.child(s as u64).rng());
        let mean_losses = exec.sum_vectors(count, self.rows(), |s| self.sample_losses(x, &draw(s))) / count as f64;
        let center = DVector::from_fn(self.rows(), |i, _| {
            1.0 / nn + mean_losses[i] / (self.lambda2 * nn * nn * nn)
        });
        let y = project_simplex(&center);
        let value = mean_losses.dot(&y) / nn + self.regularizer(x) - self.robust_penalty(&y);
        let grad = exec.sum_vectors(count, self.nfeat(), |s| self.total_grad(x, &y, &draw(s))) / count as f64;
        PrimalEstimate {
            value,
            grad,
            samples: count,
        }
    }
}
