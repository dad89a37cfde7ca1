//! Simplified reference baselines: stochastic primal-dual (SPD) and
//! adaptive stochastic gradient descent ascent (ASGDA).
//!
//! SPD follows the sampled gradients at the current decision and ignores
//! how the distribution moves with it. ASGDA keeps a global affine
//! location model `w ~ A^T x + c`, fitted by exponentially weighted least
//! squares over every batch seen so far, and corrects the `x`-gradient with
//! the chain term `A grad_w l`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exec::Exec;
use crate::problem::{DistributionOracle, PrimalDiagnostics, Problem};
use crate::rng::RngKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Asgda,
    SpdConstant,
    SpdDynamic,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            BaselineMethod::Asgda => "asgda",
            BaselineMethod::SpdConstant => "spd-constant",
            BaselineMethod::SpdDynamic => "spd-dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// ASGDA stepsizes.
    pub eta_x: f64,
    pub eta_y: f64,
    /// Constant SPD stepsize.
    pub eta: f64,
    /// Dynamic SPD stepsize `1 / (a + b k)`.
    pub dynamic_a: f64,
    pub dynamic_b: f64,
    pub batch: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Per-batch forgetting factor of the ASGDA location model.
    pub forgetting: f64,
    /// Iterate norm that counts as divergence.
    pub divergence_threshold: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            method: BaselineMethod::SpdConstant,
            eta_x: 1e-3,
            eta_y: 1e-1,
            eta: 1e-3,
            dynamic_a: 1000.0,
            dynamic_b: 10.0,
            batch: 500,
            max_iters: 5000,
            seed: 0,
            forgetting: 0.99,
            divergence_threshold: 1e8,
            exec: Exec::Parallel,
        }
    }
}

impl BaselineConfig {
    /// Stepsizes and batch size of the scalar synthetic experiment.
    pub fn synthetic(method: BaselineMethod) -> Self {
        BaselineConfig {
            method,
            ..Self::default()
        }
    }

    /// Stepsizes and batch size of the logistic-regression experiment.
    pub fn dro(method: BaselineMethod) -> Self {
        BaselineConfig {
            method,
            eta: 1e-2,
            dynamic_a: 10.0,
            dynamic_b: 1.0,
            batch: 200,
            ..Self::default()
        }
    }

    /// `(eta_x, eta_y)` used at iteration `k`.
    pub fn stepsizes(&self, k: usize) -> (f64, f64) {
        match self.method {
            BaselineMethod::Asgda => (self.eta_x, self.eta_y),
            BaselineMethod::SpdConstant => (self.eta, self.eta),
            BaselineMethod::SpdDynamic => {
                let eta = 1.0 / (self.dynamic_a + self.dynamic_b * k as f64);
                (eta, eta)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, value) in [
            ("eta_x", self.eta_x),
            ("eta_y", self.eta_y),
            ("eta", self.eta),
            ("divergence_threshold", self.divergence_threshold),
        ] {
            if !(value > 0.0) {
                bad.push(format!("{name} must be > 0 (got {value})"));
            }
        }
        if self.method == BaselineMethod::SpdDynamic && !(self.dynamic_a > 0.0 && self.dynamic_b >= 0.0) {
            bad.push("dynamic stepsize needs a > 0 and b >= 0".into());
        }
        if self.batch == 0 {
            bad.push("batch must be >= 1".into());
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            bad.push(format!("forgetting must lie in (0, 1] (got {})", self.forgetting));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Exponentially weighted least-squares fit of `w ~ A^T x + c`.
#[derive(Debug, Clone)]
pub struct LocationModel {
    szz: DMatrix<f64>,
    szw: DMatrix<f64>,
    theta: DMatrix<f64>,
    forgetting: f64,
}

impl LocationModel {
    pub fn new(n: usize, d: usize, forgetting: f64) -> Self {
        LocationModel {
            szz: DMatrix::zeros(n + 1, n + 1),
            szw: DMatrix::zeros(n + 1, d),
            theta: DMatrix::zeros(n + 1, d),
            forgetting,
        }
    }

    /// Slope `A`, `n x d`.
    pub fn slope(&self) -> DMatrix<f64> {
        let n = self.theta.nrows() - 1;
        self.theta.rows(0, n).into_owned()
    }

    pub fn intercept(&self) -> DVector<f64> {
        let n = self.theta.nrows() - 1;
        self.theta.row(n).transpose()
    }

    /// Folds in a batch drawn at a single point `x`.
    pub fn update(&mut self, x: &DVector<f64>, draws: &[DVector<f64>]) {
        let n = x.len();
        let z = DVector::from_fn(n + 1, |i, _| if i < n { x[i] } else { 1.0 });
        let d = self.szw.ncols();
        let wsum = draws.iter().fold(DVector::zeros(d), |acc, w| acc + w);
        self.szz *= self.forgetting;
        self.szw *= self.forgetting;
        self.szz += &z * z.transpose() * draws.len() as f64;
        self.szw += &z * wsum.transpose();
        // Minimum-norm solution; directions never excited stay at zero.
        let svd = self.szz.clone().svd(true, true);
        let tol = svd.singular_values.max() * 1e-13;
        if let Ok(theta) = svd.solve(&self.szw, tol) {
            self.theta = theta;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub k: usize,
    pub model: Option<LocationModel>,
}

impl BaselineState {
    pub fn new<P: Problem + ?Sized>(
        problem: &P,
        x0: DVector<f64>,
        y0: Option<DVector<f64>>,
        config: &BaselineConfig,
    ) -> Result<Self> {
        let dims = problem.dims();
        check_dim("initial x", dims.n, x0.len())?;
        let domain = problem.inner_domain();
        let y = match y0 {
            Some(y) => domain.project(&y)?,
            None => domain.center(),
        };
        let model =
            (config.method == BaselineMethod::Asgda).then(|| LocationModel::new(dims.n, dims.d, config.forgetting));
        Ok(BaselineState { x: x0, y, k: 0, model })
    }
}

/// Whether a step kept the iterate bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepStatus {
    Running,
    Diverged { norm: f64 },
}

/// `Some(norm)` if `|x|` exceeds the threshold or any entry is non-finite.
pub fn divergence(x: &DVector<f64>, y: &DVector<f64>, threshold: f64) -> Option<f64> {
    let norm = x.norm();
    let finite = x.iter().chain(y.iter()).all(|v| v.is_finite());
    (!finite || !(norm <= threshold)).then_some(norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRecord {
    pub k: usize,
    pub x_after: DVector<f64>,
    pub eta_x: f64,
    pub eta_y: f64,
    /// Norm of the (corrected, for ASGDA) sampled `x`-gradient.
    pub grad_norm_estimate: f64,
    pub model_slope_frobenius: Option<f64>,
    pub diverged: bool,
    pub true_phi: Option<f64>,
    pub true_grad_norm: Option<f64>,
}

fn batch_means<P: Problem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    y: &DVector<f64>,
    draws: &[DVector<f64>],
    slope: Option<&DMatrix<f64>>,
    exec: Exec,
) -> (DVector<f64>, DVector<f64>) {
    let n = x.len();
    let count = draws.len() as f64;
    let gx = exec.sum_vectors(draws.len(), n, |j| {
        let w = &draws[j];
        let g = problem.grad_x(x, y, w);
        match slope {
            Some(a) => g + a * problem.grad_w(x, y, w),
            None => g,
        }
    }) / count;
    let gy = exec.sum_vectors(draws.len(), y.len(), |j| problem.grad_y(x, y, &draws[j])) / count;
    (gx, gy)
}

fn finish_step<P: Problem + ?Sized>(
    state: &mut BaselineState,
    problem: &P,
    gx: DVector<f64>,
    gy: DVector<f64>,
    config: &BaselineConfig,
) -> Result<(StepStatus, f64)> {
    let (eta_x, eta_y) = config.stepsizes(state.k);
    let grad_norm = gx.norm();
    let x = &state.x - gx * eta_x;
    let y_raw = &state.y + gy * eta_y;
    state.k += 1;
    if let Some(norm) = divergence(&x, &y_raw, config.divergence_threshold) {
        state.x = x;
        state.y = y_raw;
        return Ok((StepStatus::Diverged { norm }, grad_norm));
    }
    state.y = problem.inner_domain().project(&y_raw)?;
    state.x = x;
    Ok((StepStatus::Running, grad_norm))
}

/// One SPD step with stepsize from the configured schedule.
pub fn spd_step<P, O>(
    state: &mut BaselineState,
    problem: &P,
    oracle: &O,
    config: &BaselineConfig,
    key: RngKey,
) -> Result<(StepStatus, f64)>
where
    P: Problem + ?Sized,
    O: DistributionOracle + ?Sized,
{
    let draws = oracle.sample(&state.x, config.batch, key, config.exec);
    let (gx, gy) = batch_means(problem, &state.x, &state.y, &draws, None, config.exec);
    finish_step(state, problem, gx, gy, config)
}

/// One ASGDA step: chain-corrected descent in `x`, ascent in `y`, then a
/// location-model update with the batch.
pub fn asgda_step<P, O>(
    state: &mut BaselineState,
    problem: &P,
    oracle: &O,
    config: &BaselineConfig,
    key: RngKey,
) -> Result<(StepStatus, f64)>
where
    P: Problem + ?Sized,
    O: DistributionOracle + ?Sized,
{
    let dims = problem.dims();
    let x_old = state.x.clone();
    let draws = oracle.sample(&x_old, config.batch, key, config.exec);
    let model = state
        .model
        .get_or_insert_with(|| LocationModel::new(dims.n, dims.d, config.forgetting));
    let slope = model.slope();
    let (gx, gy) = batch_means(problem, &state.x, &state.y, &draws, Some(&slope), config.exec);
    let out = finish_step(state, problem, gx, gy, config)?;
    if let Some(model) = state.model.as_mut() {
        model.update(&x_old, &draws);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub state: BaselineState,
    pub history: Vec<BaselineRecord>,
    /// `(iteration, norm)` of the first divergent iterate.
    pub diverged: Option<(usize, f64)>,
}

/// Runs a baseline until `max_iters` or divergence.
pub fn run_baseline<P, O>(
    x0: DVector<f64>,
    y0: Option<DVector<f64>>,
    problem: &P,
    oracle: &O,
    diagnostics: Option<&dyn PrimalDiagnostics>,
    config: &BaselineConfig,
) -> Result<BaselineRun>
where
    P: Problem + ?Sized,
    O: DistributionOracle + ?Sized,
{
    config.validate()?;
    check_dim("oracle output", problem.dims().d, oracle.dim())?;
    let mut state = BaselineState::new(problem, x0, y0, config)?;
    let root = RngKey::new(config.seed);
    let mut history = Vec::with_capacity(config.max_iters.min(100_000));
    let mut diverged = None;
    for _ in 0..config.max_iters {
        let k = state.k;
        let key = root.child(k as u64);
        let (eta_x, eta_y) = config.stepsizes(k);
        let (status, grad_norm) = match config.method {
            BaselineMethod::Asgda => asgda_step(&mut state, problem, oracle, config, key.child(0))?,
            _ => spd_step(&mut state, problem, oracle, config, key.child(0))?,
        };
        let is_diverged = matches!(status, StepStatus::Diverged { .. });
        let est = match diagnostics {
            Some(diag) if !is_diverged => Some(diag.primal(&state.x, key.child(1), config.exec)),
            _ => None,
        };
        history.push(BaselineRecord {
            k,
            x_after: state.x.clone(),
            eta_x,
            eta_y,
            grad_norm_estimate: grad_norm,
            model_slope_frobenius: state.model.as_ref().map(|m| m.slope().norm()),
            diverged: is_diverged,
            true_phi: est.as_ref().map(|e| e.value),
            true_grad_norm: est.as_ref().map(|e| e.grad.norm()),
        });
        if let StepStatus::Diverged { norm } = status {
            diverged = Some((k, norm));
            break;
        }
    }
    Ok(BaselineRun {
        state,
        history,
        diverged,
    })
}
