//! Independent oracles shared by the integration tests and the acceptance
//! runner. Each check returns a one-line summary on success and a
//! description of the first violation on failure.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use smdd_core::domain::InnerDomain;
use smdd_core::inner::maximize_over_scenarios;
use smdd_core::llr::{fit, LlrModel, PoisedSampleSet};
use smdd_core::problems::{generate_synthetic_credit, DroParams, DroProblem, SyntheticProblem};
use smdd_core::rng::Rng;
use smdd_core::tr::{decide, surrogate_value_and_xgrad, IterationRecord, TrConfig};
use smdd_core::{uniform_ball_sample, Dims, Exec, Problem, RngKey};

pub type Check = Result<String, String>;

pub fn gaussian_vec(len: usize, scale: f64, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub fn uniform_vec(len: usize, lo: f64, hi: f64, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(lo..hi))
}

pub fn random_simplex_point(len: usize, rng: &mut Rng) -> DVector<f64> {
    let e = DVector::from_fn(len, |_, _| -rng.random::<f64>().max(1e-300).ln());
    let s = e.sum();
    e / s
}

/// Central finite-difference gradient with per-coordinate steps
/// `h * max(1, |x_i|)`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let step = h * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += step;
        xm[i] -= step;
        (f(&xp) - f(&xm)) / (xp[i] - xm[i])
    })
}

/// `|a - b| / max(|b|, 1)`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Small logistic DRO instance used by the gradient checks.
pub fn small_dro(rows: usize, features: usize, seed: u64) -> DroProblem {
    DroProblem::new(
        generate_synthetic_credit(rows, features, seed).unwrap(),
        DroParams::default(),
    )
    .unwrap()
}

/// Random `(x, y, w)` triple for each shipped problem.
pub fn synthetic_point(rng: &mut Rng) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let x = uniform_vec(1, -6.0, 6.0, rng);
    let y = uniform_vec(1, -125.0, 125.0, rng);
    let w = DVector::from_element(1, x[0].powi(3)) + gaussian_vec(1, 1.0, rng);
    (x, y, w)
}

pub fn dro_point(p: &DroProblem, rng: &mut Rng) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let Dims { n, m, d } = p.dims();
    let x = uniform_vec(n, -2.0, 2.0, rng);
    let y = random_simplex_point(m, rng);
    let w = p.shifted_features(&x) + gaussian_vec(d, 0.1, rng);
    (x, y, w)
}

/// Analytic `grad_x`, `grad_y`, `grad_w` against central differences of
/// the loss at `count` random points.
pub fn check_problem_gradients<P: Problem>(
    name: &str,
    problem: &P,
    mut point: impl FnMut(&mut Rng) -> (DVector<f64>, DVector<f64>, DVector<f64>),
    count: usize,
    tol: f64,
    seed: u64,
) -> Check {
    let mut rng = RngKey::new(seed).rng();
    let mut worst: f64 = 0.0;
    for t in 0..count {
        let (x, y, w) = point(&mut rng);
        let blocks = [
            (
                "x",
                problem.grad_x(&x, &y, &w),
                fd_gradient(|v| problem.loss(v, &y, &w), &x, 1e-6),
            ),
            (
                "y",
                problem.grad_y(&x, &y, &w),
                fd_gradient(|v| problem.loss(&x, v, &w), &y, 1e-6),
            ),
            (
                "w",
                problem.grad_w(&x, &y, &w),
                fd_gradient(|v| problem.loss(&x, &y, v), &w, 1e-6),
            ),
        ];
        for (block, analytic, numeric) in blocks {
            let e = rel_err(&numeric, &analytic);
            worst = worst.max(e);
            if !(e <= tol) {
                return Err(format!(
                    "{name}: grad_{block} at point {t} off by {e:.3e} (x = {})",
                    x.transpose()
                ));
            }
        }
    }
    Ok(format!("{name}: {count} points, worst relative error {worst:.2e}"))
}

/// Surrogate `x`-gradient, chain term included, against central
/// differences of the surrogate value for random models.
pub fn check_surrogate_gradient<P: Problem>(
    name: &str,
    problem: &P,
    mut point: impl FnMut(&mut Rng) -> (DVector<f64>, DVector<f64>, DVector<f64>),
    slope_scale: f64,
    count: usize,
    tol: f64,
    seed: u64,
) -> Check {
    let mut rng = RngKey::new(seed).rng();
    let Dims { n, d, .. } = problem.dims();
    let mut worst: f64 = 0.0;
    for t in 0..count {
        let (x, y, w) = point(&mut rng);
        let b1 = DMatrix::from_fn(n, d, |_, _| slope_scale * rng.random_range(-1.0..1.0));
        let b0 = w - b1.tr_mul(&x);
        let residuals: Vec<_> = (0..8).map(|_| gaussian_vec(d, 0.3, &mut rng)).collect();
        let model = LlrModel::from_parts(b1, b0, residuals, x.clone(), 1.0).map_err(|e| e.to_string())?;
        let (_, grad) =
            surrogate_value_and_xgrad(problem, &model, &x, &y, Exec::Sequential).map_err(|e| e.to_string())?;
        let numeric = fd_gradient(
            |v| {
                surrogate_value_and_xgrad(problem, &model, v, &y, Exec::Sequential)
                    .unwrap()
                    .0
            },
            &x,
            1e-6,
        );
        let e = rel_err(&numeric, &grad);
        worst = worst.max(e);
        if !(e <= tol) {
            return Err(format!("{name}: surrogate gradient at point {t} off by {e:.3e}"));
        }
    }
    Ok(format!(
        "{name} surrogate: {count} points, worst relative error {worst:.2e}"
    ))
}

fn design_rows(points: &[DVector<f64>]) -> DMatrix<f64> {
    let n = points[0].len();
    DMatrix::from_fn(points.len(), n + 1, |i, j| if j < n { points[i][j] } else { 1.0 })
}

fn stack(rows: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn model_objective(model: &LlrModel, points: &[DVector<f64>], responses: &[DVector<f64>]) -> f64 {
    points
        .iter()
        .zip(responses)
        .map(|(p, w)| (w - model.predict(p).unwrap()).norm_squared())
        .sum()
}

/// Fitted model against a normal-equations solve on random instances.
pub fn check_llr_normal_equations(instances: usize, seed: u64) -> Check {
    let mut rng = RngKey::new(seed).rng();
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let n = rng.random_range(1..=3);
        let d = rng.random_range(1..=2);
        let count = rng.random_range(n + 2..=12);
        let center = uniform_vec(n, -2.0, 2.0, &mut rng);
        let radius = rng.random_range(0.1..3.0);
        let points = uniform_ball_sample(&center, radius, count, RngKey::new(seed).child(t as u64)).unwrap();
        let a = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let c = uniform_vec(d, -1.0, 1.0, &mut rng);
        let responses: Vec<_> = points
            .iter()
            .map(|p| a.tr_mul(p) + &c + gaussian_vec(d, 0.5, &mut rng))
            .collect();
        let set =
            PoisedSampleSet::from_data(center, radius, points.clone(), responses.clone()).map_err(|e| e.to_string())?;
        let model = fit(&set).map_err(|e| e.to_string())?;

        let z = design_rows(&points);
        let omega = stack(&responses);
        let beta = (z.transpose() * &z)
            .cholesky()
            .ok_or("normal matrix not positive definite")?
            .solve(&(z.transpose() * &omega));
        let brute: f64 = (&omega - &z * beta).norm_squared();
        let ours = model_objective(&model, &points, &responses);
        let e = (ours - brute).abs() / brute.max(1e-300);
        worst = worst.max(e);
        if !(e <= 1e-8) {
            return Err(format!(
                "instance {t}: objective {ours} vs normal equations {brute} (rel {e:.3e})"
            ));
        }
    }
    Ok(format!(
        "{instances} instances, worst relative objective error {worst:.2e}"
    ))
}

/// Noise-free affine responses are recovered exactly.
pub fn check_llr_affine_recovery(instances: usize, seed: u64) -> Check {
    let mut rng = RngKey::new(seed).rng();
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let n = rng.random_range(1..=4);
        let d = rng.random_range(1..=3);
        let center = uniform_vec(n, -3.0, 3.0, &mut rng);
        let points = uniform_ball_sample(&center, 1.0, 3 * (n + 1), RngKey::new(seed).child(t as u64)).unwrap();
        let a = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let c = uniform_vec(d, -1.0, 1.0, &mut rng);
        let responses: Vec<_> = points.iter().map(|p| a.tr_mul(p) + &c).collect();
        let set = PoisedSampleSet::from_data(center, 1.0, points, responses).map_err(|e| e.to_string())?;
        let model = fit(&set).map_err(|e| e.to_string())?;
        let e = (model.b1() - &a).amax().max((model.b0() - &c).amax());
        worst = worst.max(e);
        if !(e <= 1e-9) {
            return Err(format!("instance {t}: coefficient error {e:.3e}"));
        }
    }
    Ok(format!("{instances} instances, worst coefficient error {worst:.2e}"))
}

/// Sup-norm error of the local fit of `x^3` on `[1 - delta, 1 + delta]`.
pub fn cubic_fit_error(delta: f64, seed: u64) -> f64 {
    let center = DVector::from_element(1, 1.0);
    let points = uniform_ball_sample(&center, delta, 400, RngKey::new(seed)).unwrap();
    let responses: Vec<_> = points.iter().map(|p| DVector::from_element(1, p[0].powi(3))).collect();
    let model = fit(&PoisedSampleSet::from_data(center, delta, points, responses).unwrap()).unwrap();
    (0..=200)
        .map(|i| {
            let x = 1.0 - delta + 2.0 * delta * i as f64 / 200.0;
            (model.predict(&DVector::from_element(1, x)).unwrap()[0] - x.powi(3)).abs()
        })
        .fold(0.0, f64::max)
}

/// Halving the radius cuts the local error by a factor within 2 of 4.
pub fn check_llr_quadratic_scaling(seed: u64) -> Check {
    let errs: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&d| cubic_fit_error(d, seed)).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    if ratios.iter().all(|r| (2.0..=8.0).contains(r)) {
        Ok(format!(
            "errors {:.3e} {:.3e} {:.3e}, ratios {:.2} {:.2}",
            errs[0], errs[1], errs[2], ratios[0], ratios[1]
        ))
    } else {
        Err(format!("error ratios {ratios:?} outside [2, 8] (errors {errs:?})"))
    }
}

/// `l = -0.5 sum_i h_i (y_i - w_i)^2` over a box or the simplex.
pub struct QuadraticInner {
    pub h: DVector<f64>,
    pub domain: InnerDomain,
}

impl Problem for QuadraticInner {
    fn dims(&self) -> Dims {
        let m = self.h.len();
        Dims { n: 1, m, d: m }
    }
    fn loss(&self, _x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
        -0.5 * (y - w).component_mul(&(y - w)).dot(&self.h)
    }
    fn grad_x(&self, x: &DVector<f64>, _y: &DVector<f64>, _w: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }
    fn grad_y(&self, _x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        -(y - w).component_mul(&self.h)
    }
    fn grad_w(&self, _x: &DVector<f64>, y: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        (y - w).component_mul(&self.h)
    }
    fn inner_domain(&self) -> &InnerDomain {
        &self.domain
    }
    fn mu(&self) -> f64 {
        self.h.min()
    }
    fn inner_smoothness(&self) -> f64 {
        self.h.max()
    }
}

/// Euclidean projection onto the simplex by bisection on the KKT shift.
pub fn simplex_projection_bisection(t: &DVector<f64>) -> DVector<f64> {
    let (mut lo, mut hi) = (t.min() - 1.0, t.max());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = t.iter().map(|v| (v - mid).max(0.0)).sum();
        if mass > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    t.map(|v| (v - tau).max(0.0))
}

/// Inner solver output lies within the requested tolerance of the known
/// maximizer on random strongly concave quadratics. Box instances use a
/// diagonal curvature, so the maximizer is the clipped scenario mean;
/// simplex instances use an isotropic one, so it is the projection.
pub fn check_inner_certificate(instances: usize, seed: u64) -> Check {
    let mut rng = RngKey::new(seed).rng();
    let x = DVector::zeros(1);
    let mut worst_ratio: f64 = 0.0;
    for t in 0..instances {
        let m = rng.random_range(1..=6);
        let eps = [1e-2, 1e-4, 1e-6, 1e-8][t % 4];
        let on_box = t % 2 == 0;
        let scale = if on_box { 1.0 } else { 0.2 };
        let scenarios: Vec<_> = (0..3)
            .map(|_| uniform_vec(m, -5.0 * scale, 5.0 * scale, &mut rng))
            .collect();
        let mean = scenarios.iter().fold(DVector::zeros(m), |a, w| a + w) / 3.0;
        let (problem, target) = if on_box {
            let lower = uniform_vec(m, -3.0, 0.0, &mut rng);
            let upper = &lower + uniform_vec(m, 0.5, 4.0, &mut rng);
            let target = DVector::from_fn(m, |i, _| mean[i].clamp(lower[i], upper[i]));
            let h = uniform_vec(m, 1.0, 10.0, &mut rng);
            (
                QuadraticInner {
                    h,
                    domain: InnerDomain::new_box(lower, upper).unwrap(),
                },
                target,
            )
        } else {
            let h = DVector::from_element(m, rng.random_range(0.5..5.0));
            (
                QuadraticInner {
                    h,
                    domain: InnerDomain::simplex(m).unwrap(),
                },
                simplex_projection_bisection(&mean),
            )
        };
        let start = uniform_vec(m, -10.0, 10.0, &mut rng);
        let report = maximize_over_scenarios(&problem, &x, &scenarios, &start, eps, Exec::Sequential)
            .map_err(|e| e.to_string())?;
        let err = (&report.maximizer - &target).norm();
        worst_ratio = worst_ratio.max(err / eps);
        if !(err <= eps) {
            let kind = if on_box { "box" } else { "simplex" };
            return Err(format!("{kind} instance {t}: distance {err:.3e} > eps {eps:.0e}"));
        }
    }
    Ok(format!("{instances} quadratics, worst distance/eps {worst_ratio:.2e}"))
}

/// All four combinations of the two acceptance conditions.
pub fn check_decision_table() -> Check {
    let cfg = TrConfig {
        eta1: 0.5,
        eta2: 1.0,
        gamma: 2.0,
        delta_max: 2.0,
        ..TrConfig::default()
    };
    let delta = 0.5;
    let cases = [
        (0.9, 1.0, true, 1.0),
        (0.1, 1.0, false, 0.25),
        (0.9, 0.1, false, 0.25),
        (0.1, 0.1, false, 0.25),
    ];
    for (rho, grad, accept, next) in cases {
        let d = decide(rho, grad, delta, &cfg);
        if d.accepted != accept || d.next_delta != next {
            return Err(format!(
                "rho {rho}, grad {grad}: got {d:?}, expected accept={accept} next={next}"
            ));
        }
    }
    let capped = decide(0.9, 10.0, 1.5, &cfg);
    if !(capped.accepted && capped.next_delta == 2.0) {
        return Err(format!("expansion not capped at delta_max: {capped:?}"));
    }
    // Boundary values count as passing.
    let edge = decide(0.5, 0.5, 0.5, &cfg);
    if !edge.accepted {
        return Err("rho = eta1 with grad = eta2 * delta must accept".into());
    }
    Ok("4 branch combinations, cap and boundary cases".into())
}

/// Radius bracket, acceptance consistency, bookkeeping and chaining over a
/// run history.
pub fn check_history(history: &[IterationRecord], cfg: &TrConfig) -> Check {
    for (i, r) in history.iter().enumerate() {
        if !(r.delta > 0.0 && r.delta <= cfg.delta_max) {
            return Err(format!("record {i}: radius {} outside (0, {}]", r.delta, cfg.delta_max));
        }
        let expected_accept = r.rho >= cfg.eta1 && r.grad_norm_surrogate >= cfg.eta2 * r.delta;
        if r.accepted != expected_accept {
            return Err(format!(
                "record {i}: accepted = {} but rule gives {expected_accept}",
                r.accepted
            ));
        }
        let next = if r.accepted {
            (cfg.gamma * r.delta).min(cfg.delta_max)
        } else {
            (r.delta / cfg.gamma).max(cfg.delta_min)
        };
        if r.delta_next != next {
            return Err(format!("record {i}: next radius {} expected {next}", r.delta_next));
        }
        if r.accepted {
            if !(r.descent_lhs >= r.descent_rhs) {
                return Err(format!("record {i}: accepted without sufficient descent"));
            }
        } else {
            let same = r
                .x_before
                .iter()
                .zip(r.x_after.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            if !same {
                return Err(format!("record {i}: rejected step moved x"));
            }
        }
        if let Some(next) = history.get(i + 1) {
            if next.delta != r.delta_next || next.x_before != r.x_after {
                return Err(format!("record {i}: not chained to record {}", i + 1));
            }
        }
    }
    Ok(format!("{} records consistent", history.len()))
}

pub fn synthetic() -> SyntheticProblem {
    SyntheticProblem::default()
}
