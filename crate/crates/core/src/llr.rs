//! Local linear regression of the distribution map.
//!
//! Inside the trust region `B(center, radius)` the map `x -> w` is fitted by
//! an affine model `B1^T x + B0` from fresh samples; the residuals form an
//! empirical noise distribution, and `predict(x) + e_i` are the surrogate
//! scenarios.

use nalgebra::{DMatrix, DVector};

use crate::domain::uniform_ball_point;
use crate::error::{check_dim, Error, Result};
use crate::exec::Exec;
use crate::problem::DistributionOracle;
use crate::rng::RngKey;

/// Resampling rounds allowed when chasing the design-condition target.
pub const POISED_ROUNDS: usize = 50;

/// Samples `(x_i, w_i)` in a ball with a well-conditioned regression design.
#[derive(Debug, Clone)]
pub struct PoisedSampleSet {
    center: DVector<f64>,
    radius: f64,
    points: Vec<DVector<f64>>,
    responses: Vec<DVector<f64>>,
    condition: f64,
}

impl PoisedSampleSet {
    /// Builds a set from given data, checking ball membership and rank.
    pub fn from_data(
        center: DVector<f64>,
        radius: f64,
        points: Vec<DVector<f64>>,
        responses: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("fitting radius must be positive, got {radius}")));
        }
        check_dim("sample responses", points.len(), responses.len())?;
        let n = center.len();
        if points.len() < n + 1 {
            return Err(Error::Config(format!(
                "need at least {} samples for an {n}-dimensional fit, got {}",
                n + 1,
                points.len()
            )));
        }
        let d = responses[0].len();
        for (p, w) in points.iter().zip(&responses) {
            check_dim("sample point", n, p.len())?;
            check_dim("sample response", d, w.len())?;
            if (p - &center).norm() > radius * (1.0 + 1e-12) {
                return Err(Error::Config("sample point outside the fitting ball".into()));
            }
        }
        let condition = design_condition(&scaled_design(&center, radius, &points));
        if !condition.is_finite() {
            return Err(Error::Poisedness {
                target: f64::INFINITY,
                rounds: 0,
                best: condition,
            });
        }
        Ok(PoisedSampleSet {
            center,
            radius,
            points,
            responses,
            condition,
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }
    pub fn responses(&self) -> &[DVector<f64>] {
        &self.responses
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Condition number of the design `[(x_i - center)/radius, 1]`.
    pub fn poisedness(&self) -> f64 {
        self.condition
    }
}

fn scaled_design(center: &DVector<f64>, radius: f64, points: &[DVector<f64>]) -> DMatrix<f64> {
    let n = center.len();
    DMatrix::from_fn(points.len(), n + 1, |i, j| {
        if j < n {
            (points[i][j] - center[j]) / radius
        } else {
            1.0
        }
    })
}

fn design_condition(z: &DMatrix<f64>) -> f64 {
    let sv = z.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    // Numerically rank-deficient designs count as unbounded.
    if min > max * 1e-12 {
        max / min
    } else {
        f64::INFINITY
    }
}

// Row of maximal leverage (diagonal of the hat matrix).
fn max_leverage_row(z: &DMatrix<f64>) -> usize {
    let svd = z.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let tol = svd.singular_values.max() * 1e-12;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..z.nrows() {
        let lev: f64 = (0..u.ncols())
            .filter(|&j| svd.singular_values[j] > tol)
            .map(|j| u[(i, j)] * u[(i, j)])
            .sum();
        if lev > best.1 {
            best = (i, lev);
        }
    }
    best.0
}

/// Draws `count` uniform points in `B(center, radius)`, redrawing the
/// highest-leverage point until the scaled design has condition number at
/// most `lambda_max`, then samples one response at each point.
pub fn generate_poised_set<O: DistributionOracle + ?Sized>(
    oracle: &O,
    center: &DVector<f64>,
    radius: f64,
    count: usize,
    lambda_max: f64,
    key: RngKey,
    exec: Exec,
) -> Result<PoisedSampleSet> {
    let n = center.len();
    if count < n + 1 {
        return Err(Error::Config(format!(
            "need at least {} samples for an {n}-dimensional fit, got {count}",
            n + 1
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Config(format!("fitting radius must be positive, got {radius}")));
    }
    if !(lambda_max > 1.0) {
        return Err(Error::Config(format!("lambda_max must exceed 1, got {lambda_max}")));
    }
    let mut rng = key.child(0).rng();
    let mut points: Vec<DVector<f64>> = (0..count)
        .map(|_| uniform_ball_point(center, radius, n, &mut rng))
        .collect();
    let mut z = scaled_design(center, radius, &points);
    let mut condition = design_condition(&z);
    let mut best = condition;
    let mut rounds = 0;
    while !(condition <= lambda_max) {
        if rounds == POISED_ROUNDS {
            return Err(Error::Poisedness {
                target: lambda_max,
                rounds,
                best,
            });
        }
        let row = max_leverage_row(&z);
        points[row] = uniform_ball_point(center, radius, n, &mut rng);
        for j in 0..n {
            z[(row, j)] = (points[row][j] - center[j]) / radius;
        }
        condition = design_condition(&z);
        best = best.min(condition);
        rounds += 1;
    }
    let responses = oracle.sample_at(&points, key.child(1), exec);
    Ok(PoisedSampleSet {
        center: center.clone(),
        radius,
        points,
        responses,
        condition,
    })
}

/// Fitted local affine model with its residual set.
#[derive(Debug, Clone)]
pub struct LlrModel {
    b1: DMatrix<f64>,
    b0: DVector<f64>,
    // predict(center); used instead of b0 to keep predictions near the
    // center free of cancellation.
    at_center: DVector<f64>,
    residuals: Vec<DVector<f64>>,
    center: DVector<f64>,
    radius: f64,
}

impl LlrModel {
    /// Model from explicit coefficients with the given residual set.
    pub fn from_parts(
        b1: DMatrix<f64>,
        b0: DVector<f64>,
        residuals: Vec<DVector<f64>>,
        center: DVector<f64>,
        radius: f64,
    ) -> Result<Self> {
        check_dim("slope rows", center.len(), b1.nrows())?;
        check_dim("intercept", b1.ncols(), b0.len())?;
        for e in &residuals {
            check_dim("residual", b0.len(), e.len())?;
        }
        let at_center = b1.tr_mul(&center) + &b0;
        Ok(LlrModel {
            b1,
            b0,
            at_center,
            residuals,
            center,
            radius,
        })
    }

    /// Slope matrix, `n x d`.
    pub fn b1(&self) -> &DMatrix<f64> {
        &self.b1
    }
    pub fn b0(&self) -> &DVector<f64> {
        &self.b0
    }
    pub fn residuals(&self) -> &[DVector<f64>] {
        &self.residuals
    }
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn n(&self) -> usize {
        self.b1.nrows()
    }
    pub fn d(&self) -> usize {
        self.b1.ncols()
    }

    /// `B1^T x + B0`.
    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("llr predict", self.n(), x.len())?;
        Ok(&self.at_center + self.b1.tr_mul(&(x - &self.center)))
    }

    /// Scenarios `predict(x) + e_i`, one per residual.
    pub fn surrogate_scenarios(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let p = self.predict(x)?;
        Ok(self.residuals.iter().map(|e| &p + e).collect())
    }
}

/// Least-squares fit via QR of the scaled design.
pub fn fit(samples: &PoisedSampleSet) -> Result<LlrModel> {
    let n = samples.center.len();
    let count = samples.len();
    let d = samples.responses[0].len();
    let z = scaled_design(&samples.center, samples.radius, &samples.points);
    let omega = DMatrix::from_fn(count, d, |i, j| samples.responses[i][j]);

    let qr = z.qr();
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    let (max_pivot, min_pivot) = (diag.max(), diag.min());
    if !(min_pivot > max_pivot * 1e-12) {
        return Err(Error::SingularFit { min_pivot });
    }
    let rhs = qr.q().tr_mul(&omega);
    let beta = r.solve_upper_triangular(&rhs).ok_or(Error::SingularFit { min_pivot })?;

    let b1 = beta.rows(0, n) / samples.radius;
    let at_center: DVector<f64> = beta.row(n).transpose();
    let b0 = &at_center - b1.tr_mul(&samples.center);
    let mut model = LlrModel {
        b1,
        b0,
        at_center,
        residuals: Vec::new(),
        center: samples.center.clone(),
        radius: samples.radius,
    };
    model.residuals = samples
        .points
        .iter()
        .zip(&samples.responses)
        .map(|(x, w)| w - model.predict(x).expect("dimension checked"))
        .collect();
    Ok(model)
}
