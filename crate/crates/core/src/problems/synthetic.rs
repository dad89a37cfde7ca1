//! Scalar nonconvex / strongly concave problem with a cubic distribution map.
//!
//! `l(x, y, w) = x^2 - 2 (x + y) w - y^2` with `w = x^3 + noise` and
//! `y` restricted to `[-H, H]`.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::InnerDomain;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::problem::{Dims, DistributionOracle, PrimalDiagnostics, PrimalEstimate, Problem};
use crate::rng::{Rng, RngKey};

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    noise_sigma: f64,
    half_width: f64,
    domain: InnerDomain,
}

impl Default for SyntheticProblem {
    fn default() -> Self {
        Self::new(1.0, 125.0).expect("valid defaults")
    }
}

impl SyntheticProblem {
    pub fn new(noise_sigma: f64, half_width: f64) -> Result<Self> {
        if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        Ok(SyntheticProblem {
            noise_sigma,
            half_width,
            domain: InnerDomain::symmetric_box(1, half_width)?,
        })
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    fn inner_argmax(&self, x: f64) -> f64 {
        (-x.powi(3)).clamp(-self.half_width, self.half_width)
    }

    /// Closed-form primal value for any box half-width.
    pub fn primal_value(&self, x: f64) -> f64 {
        let y = self.inner_argmax(x);
        x * x - 2.0 * (x + y) * x.powi(3) - y * y
    }

    /// Danskin derivative of [`Self::primal_value`].
    pub fn primal_grad(&self, x: f64) -> f64 {
        let y = self.inner_argmax(x);
        2.0 * x - 8.0 * x.powi(3) - 6.0 * y * x * x
    }
}

impl Problem for SyntheticProblem {
    fn dims(&self) -> Dims {
        Dims { n: 1, m: 1, d: 1 }
    }

    fn loss(&self, x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let (x, y, w) = (x[0], y[0], w[0]);
        x * x - 2.0 * (x + y) * w - y * y
    }

    fn grad_x(&self, x: &DVector<f64>, _y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 2.0 * x[0] - 2.0 * w[0])
    }

    fn grad_y(&self, _x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, -2.0 * w[0] - 2.0 * y[0])
    }

    fn grad_w(&self, x: &DVector<f64>, y: &DVector<f64>, _w: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, -2.0 * (x[0] + y[0]))
    }

    fn inner_domain(&self) -> &InnerDomain {
        &self.domain
    }

    fn mu(&self) -> f64 {
        2.0
    }

    fn inner_smoothness(&self) -> f64 {
        2.0
    }
}

impl DistributionOracle for SyntheticProblem {
    fn dim(&self) -> usize {
        1
    }

    fn draw(&self, x: &DVector<f64>, rng: &mut Rng) -> DVector<f64> {
        let eps: f64 = StandardNormal.sample(rng);
        DVector::from_element(1, x[0].powi(3) + self.noise_sigma * eps)
    }
}

impl PrimalDiagnostics for SyntheticProblem {
    fn primal(&self, x: &DVector<f64>, _key: RngKey, _exec: Exec) -> PrimalEstimate {
        PrimalEstimate {
            value: self.primal_value(x[0]),
            grad: DVector::from_element(1, self.primal_grad(x[0])),
            samples: 0,
        }
    }
}

/// Piecewise primal function for the `[-125, 125]` box.
pub fn synthetic_primal(x: f64) -> f64 {
    let (x2, x3, x4) = (x * x, x.powi(3), x.powi(4));
    if x > 5.0 {
        x2 - 2.0 * x4 + 250.0 * x3 - 15625.0
    } else if x < -5.0 {
        x2 - 2.0 * x4 - 250.0 * x3 - 15625.0
    } else {
        x2 - 2.0 * x4 + x.powi(6)
    }
}

/// Derivative of [`synthetic_primal`] on the active branch.
pub fn synthetic_primal_grad(x: f64) -> f64 {
    let base = 2.0 * x - 8.0 * x.powi(3);
    if x > 5.0 {
        base + 750.0 * x * x
    } else if x < -5.0 {
        base - 750.0 * x * x
    } else {
        base + 6.0 * x.powi(5)
    }
}
