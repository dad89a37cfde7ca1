//! Executes one run per seed and writes the logs and the run summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use smdd_core::baselines::run_baseline;
use smdd_core::problems::{generate_synthetic_credit, load_credit_csv, DroProblem, SyntheticProblem};
use smdd_core::tr::solve;
use smdd_core::{uniform_ball_sample, DistributionOracle, PrimalDiagnostics, Problem, RngKey};

use crate::config::{ProblemKind, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{write_baseline_csv, write_tr_csv};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "SMDD_OUTPUT_ROOT";
pub const SUMMARY_FILE: &str = "summary.json";

/// Stream of the per-seed key reserved for starting points and the
/// initial diagnostics, disjoint from the per-iteration streams.
const INIT_STREAM: u64 = u64::MAX;

pub enum Instance {
    Synthetic(SyntheticProblem),
    Dro(DroProblem),
}

impl Instance {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.problem {
            ProblemKind::Synthetic => Instance::Synthetic(SyntheticProblem::new(
                cfg.synthetic.noise_sigma,
                cfg.synthetic.half_width,
            )?),
            ProblemKind::Dro => {
                let data = match &cfg.data.path {
                    Some(path) => load_credit_csv(path, &cfg.data.schema)?,
                    None => generate_synthetic_credit(cfg.data.rows, cfg.data.features, cfg.data.seed)?,
                };
                Instance::Dro(DroProblem::new(data, cfg.dro)?)
            }
        })
    }

    fn n(&self) -> usize {
        match self {
            Instance::Synthetic(p) => p.dims().n,
            Instance::Dro(p) => p.dims().n,
        }
    }

    /// Default `(x, y)` ball centers.
    fn default_centers(&self) -> (Vec<f64>, Option<Vec<f64>>) {
        match self {
            Instance::Synthetic(_) => (vec![10.0], Some(vec![10.0])),
            Instance::Dro(p) => (vec![1.0; p.dims().n], None),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub status: &'static str,
    pub error: Option<String>,
    pub csv: Option<String>,
    pub iterations: usize,
    pub initial_x: Vec<f64>,
    pub final_x: Vec<f64>,
    pub initial_true_phi: Option<f64>,
    pub initial_true_grad_norm: Option<f64>,
    pub final_true_phi: Option<f64>,
    pub final_true_grad_norm: Option<f64>,
    /// Surrogate (TR) or sampled (baselines) gradient norm of the last
    /// iteration.
    pub final_grad_norm_estimate: Option<f64>,
    pub accepted_steps: Option<usize>,
    pub final_delta: Option<f64>,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    pub divergence_norm: Option<f64>,
    pub wall_time_secs: f64,
}

impl SeedSummary {
    fn failed(seed: u64, error: String, wall: f64) -> Self {
        SeedSummary {
            seed,
            status: "error",
            error: Some(error),
            csv: None,
            iterations: 0,
            initial_x: Vec::new(),
            final_x: Vec::new(),
            initial_true_phi: None,
            initial_true_grad_norm: None,
            final_true_phi: None,
            final_true_grad_norm: None,
            final_grad_norm_estimate: None,
            accepted_steps: None,
            final_delta: None,
            diverged: false,
            diverged_at: None,
            divergence_norm: None,
            wall_time_secs: wall,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub solver: String,
    /// Monte-Carlo draws behind each logged primal estimate, when the
    /// problem has no closed form.
    pub diagnostic_samples: Option<usize>,
    pub config: RunConfig,
    pub seeds: Vec<SeedSummary>,
}

impl RunSummary {
    pub fn failures(&self) -> usize {
        self.seeds.iter().filter(|s| s.error.is_some()).count()
    }
}

/// Output directory: explicit flag, then the config, then
/// `$SMDD_OUTPUT_ROOT/<stem>`, then `runs/<stem>`.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &RunConfig, config_path: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output_dir {
        return p.clone();
    }
    let stem = config_path
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "run".into());
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(stem)
}

/// Runs every seed on a pool of `cfg.workers` threads, writes one CSV per
/// successful seed plus `summary.json`, and returns the summary. Seed
/// failures are recorded, not propagated.
pub fn execute(cfg: &RunConfig, output_dir: &Path) -> Result<RunSummary> {
    let errors = cfg.check();
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let mut cfg = cfg.clone();
    cfg.sync_exec();
    fs::create_dir_all(output_dir).map_err(|e| CliError::io(output_dir, e))?;
    let instance = Instance::build(&cfg)?;
    let n = instance.n();
    let (x_default, y_default) = instance.default_centers();
    let x_center = cfg.initial.x_center.clone().unwrap_or(x_default);
    if x_center.len() != n {
        return Err(CliError::Config(vec![format!(
            "initial.x_center: expected {n} entries, got {}",
            x_center.len()
        )]));
    }
    let diagnostic_samples = match (&instance, cfg.log_oracle_diagnostics) {
        (Instance::Dro(p), true) => {
            info!(
                "primal diagnostics use {} Monte-Carlo samples per estimate",
                p.diagnostic_samples()
            );
            Some(p.diagnostic_samples())
        }
        _ => None,
    };
    if cfg.solver.baseline_method().is_some() {
        info!("{} is a simplified reference baseline", cfg.solver);
    }
    let workers = cfg.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(vec![format!("workers: {e}")]))?;
    let y_center = cfg.initial.y_center.clone().or(y_default);
    let starts = Starts {
        x_center: DVector::from_vec(x_center),
        y_center: y_center.map(DVector::from_vec),
    };
    let seeds: Vec<SeedSummary> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let t = Instant::now();
                let out = match &instance {
                    Instance::Synthetic(p) => run_seed(p, &cfg, seed, &starts, output_dir, t),
                    Instance::Dro(p) => run_seed(p, &cfg, seed, &starts, output_dir, t),
                };
                out.unwrap_or_else(|e| {
                    warn!("seed {seed} failed: {e}");
                    SeedSummary::failed(seed, e.to_string(), t.elapsed().as_secs_f64())
                })
            })
            .collect()
    });
    let summary = RunSummary {
        problem: cfg.problem.to_string(),
        solver: cfg.solver.to_string(),
        diagnostic_samples,
        config: cfg,
        seeds,
    };
    let path = output_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    info!("wrote {}", path.display());
    Ok(summary)
}

struct Starts {
    x_center: DVector<f64>,
    y_center: Option<DVector<f64>>,
}

fn run_seed<P>(
    problem: &P,
    cfg: &RunConfig,
    seed: u64,
    starts: &Starts,
    dir: &Path,
    start: Instant,
) -> Result<SeedSummary>
where
    P: Problem + DistributionOracle + PrimalDiagnostics,
{
    let init = RngKey::new(seed).child(INIT_STREAM);
    let x0 = uniform_ball_sample(&starts.x_center, cfg.initial.x_radius, 1, init.child(0))?.remove(0);
    let y0 = match &starts.y_center {
        Some(c) => Some(uniform_ball_sample(c, cfg.initial.y_radius, 1, init.child(1))?.remove(0)),
        None => None,
    };
    let diagnostics = cfg.log_oracle_diagnostics.then_some(problem as &dyn PrimalDiagnostics);
    let initial = diagnostics.map(|d| d.primal(&x0, init.child(2), cfg.tr.exec));
    let n = x0.len();
    let stem = cfg.run_stem(seed);
    let csv_name = format!("{stem}.csv");
    let csv_path = dir.join(&csv_name);
    let create = || -> Result<std::io::BufWriter<fs::File>> {
        let file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
        Ok(std::io::BufWriter::new(file))
    };

    let mut summary = SeedSummary::failed(seed, String::new(), 0.0);
    summary.status = "ok";
    summary.error = None;
    summary.csv = Some(csv_name);
    summary.initial_x = x0.iter().copied().collect();
    summary.initial_true_phi = initial.as_ref().map(|e| e.value);
    summary.initial_true_grad_norm = initial.as_ref().map(|e| e.grad.norm());

    match cfg.solver.baseline_method() {
        None => {
            let tr = smdd_core::tr::TrConfig { seed, ..cfg.tr.clone() };
            let state = solve(x0, y0, problem, problem, diagnostics, &tr)?;
            write_tr_csv(create()?, n, &state.history)?;
            let last = state.history.last();
            summary.iterations = state.history.len();
            summary.final_x = state.x.iter().copied().collect();
            summary.final_true_phi = last.and_then(|r| r.true_phi).or(summary.initial_true_phi);
            summary.final_true_grad_norm = last.and_then(|r| r.true_grad_norm).or(summary.initial_true_grad_norm);
            summary.final_grad_norm_estimate = last.map(|r| r.grad_norm_surrogate);
            summary.accepted_steps = Some(state.history.iter().filter(|r| r.accepted).count());
            summary.final_delta = Some(state.delta);
        }
        Some(_) => {
            let bc = smdd_core::baselines::BaselineConfig {
                seed,
                ..cfg.baseline.clone()
            };
            let run = run_baseline(x0, y0, problem, problem, diagnostics, &bc)?;
            write_baseline_csv(create()?, n, &run.history)?;
            let last = run.history.last();
            summary.iterations = run.history.len();
            summary.final_x = run.state.x.iter().copied().collect();
            if run.history.is_empty() {
                summary.final_true_phi = summary.initial_true_phi;
                summary.final_true_grad_norm = summary.initial_true_grad_norm;
            } else {
                summary.final_true_phi = last.and_then(|r| r.true_phi);
                summary.final_true_grad_norm = last.and_then(|r| r.true_grad_norm);
            }
            summary.final_grad_norm_estimate = last.map(|r| r.grad_norm_estimate);
            if let Some((k, norm)) = run.diverged {
                summary.diverged = true;
                summary.diverged_at = Some(k);
                summary.divergence_norm = Some(norm);
                info!("seed {seed}: diverged at iteration {k} (|x| = {norm:.3e})");
            }
        }
    }
    summary.wall_time_secs = start.elapsed().as_secs_f64();
    info!(
        "seed {seed}: {} iterations in {:.2}s, final |grad Phi| {}",
        summary.iterations,
        summary.wall_time_secs,
        summary
            .final_true_grad_norm
            .map_or("n/a".into(), |g| format!("{g:.3e}"))
    );
    Ok(summary)
}
