//! Acceptance runner: executes every criterion, prints one PASS/FAIL line
//! each, and exits nonzero if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use smdd_cli::config::ExecMode;
use smdd_cli::{execute, ProblemKind, RunConfig, RunSummary, SolverKind};
use smdd_core::problems::synthetic_primal_grad;
use smdd_core::schedule::CountPolicy;
use smdd_core::tr::{solve, TrConfig};
use smdd_core::{uniform_ball_sample, RngKey};

use support::*;

const STATIONARY: [f64; 3] = [-1.0, 0.0, 1.0];

fn synthetic_tr(llr_count: usize, seeds: &[u64], dir: &Path) -> Result<RunSummary, String> {
    let mut cfg = RunConfig::new(ProblemKind::Synthetic, SolverKind::Tr);
    cfg.seeds = seeds.to_vec();
    cfg.tr = TrConfig {
        delta0: 1.0,
        delta_max: 2.0,
        gamma: 2.0,
        eta1: 0.25,
        eta2: 0.1,
        max_iters: 300,
        ..TrConfig::default()
    }
    .with_fixed_counts(llr_count, 100);
    execute(&cfg, dir).map_err(|e| e.to_string())
}

fn no_seed_errors(s: &RunSummary) -> Result<(), String> {
    match s.seeds.iter().find(|r| r.error.is_some()) {
        Some(r) => Err(format!("seed {} failed: {}", r.seed, r.error.as_deref().unwrap_or(""))),
        None => Ok(()),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_1() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let s = synthetic_tr(300, &[0, 1, 2, 3, 4], dir.path())?;
    no_seed_errors(&s)?;
    let mut good = 0;
    let mut lines = Vec::new();
    for r in &s.seeds {
        let x = r.final_x[0];
        // Recompute from the closed form rather than trusting the log.
        let g = synthetic_primal_grad(x).abs();
        let logged = r.final_true_grad_norm.ok_or("missing oracle diagnostics")?;
        if (g - logged).abs() > 1e-9 * g.max(1.0) {
            return Err(format!(
                "seed {}: logged |grad| {logged} disagrees with closed form {g}",
                r.seed
            ));
        }
        let near = STATIONARY.iter().map(|s| (x - s).abs()).fold(f64::INFINITY, f64::min);
        if g < 0.5 && near <= 0.3 {
            good += 1;
        }
        if r.wall_time_secs > 120.0 {
            return Err(format!("seed {} took {:.1}s", r.seed, r.wall_time_secs));
        }
        lines.push(format!("x={x:.4} |grad|={g:.2e}"));
    }
    let msg = format!(
        "{good}/5 seeds stationary [{}] in {:.1}s",
        lines.join(", "),
        started.elapsed().as_secs_f64()
    );
    if good >= 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Check {
    let mut medians = Vec::new();
    for n in [50, 150, 300] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let s = synthetic_tr(n, &[0, 1, 2, 3, 4], dir.path())?;
        no_seed_errors(&s)?;
        let g: Vec<f64> = s
            .seeds
            .iter()
            .map(|r| synthetic_primal_grad(r.final_x[0]).abs())
            .collect();
        medians.push((n, median(g)));
    }
    let msg = medians
        .iter()
        .map(|(n, m)| format!("N={n}: {m:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    let monotone = medians.windows(2).all(|w| w[1].1 <= 1.2 * w[0].1);
    if monotone {
        Ok(format!("median final |grad| {msg}"))
    } else {
        Err(format!("medians not nonincreasing within 20%: {msg}"))
    }
}

fn criterion_3() -> Check {
    let mut parts = Vec::new();
    for solver in [SolverKind::Asgda, SolverKind::SpdConstant, SolverKind::SpdDynamic] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = RunConfig::new(ProblemKind::Synthetic, solver);
        cfg.seeds = vec![0, 1, 2, 3, 4];
        let s = execute(&cfg, dir.path()).map_err(|e| e.to_string())?;
        no_seed_errors(&s)?;
        if cfg.baseline.max_iters != 5000 || cfg.baseline.batch != 500 {
            return Err("baseline presets differ from the experiment settings".into());
        }
        let mut worst = 0;
        for r in &s.seeds {
            match (r.diverged, r.diverged_at) {
                (true, Some(k)) if k < 5000 && !(r.divergence_norm.unwrap_or(f64::NAN) <= 1e8) => {
                    worst = worst.max(k + 1)
                }
                _ => return Err(format!("{solver} seed {} did not diverge", r.seed)),
            }
        }
        parts.push(format!("{solver} by iteration {worst}"));
    }
    Ok(format!("all seeds diverged: {}", parts.join(", ")))
}

fn criterion_4() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::new(ProblemKind::Dro, SolverKind::Tr);
    cfg.seeds = vec![0, 1, 2];
    cfg.tr.max_iters = 100;
    cfg.tr.llr_count = CountPolicy::fixed(300);
    cfg.tr.value_count = CountPolicy::fixed(100);
    if cfg.data.rows != 200 || cfg.data.features != 5 || cfg.dro.diagnostic_samples != 5000 {
        return Err("DRO defaults differ from the experiment settings".into());
    }
    let s = execute(&cfg, dir.path()).map_err(|e| e.to_string())?;
    no_seed_errors(&s)?;
    if s.diagnostic_samples != Some(5000) {
        return Err("Monte-Carlo sample count not logged".into());
    }
    let mut lines = Vec::new();
    let mut ok = true;
    for r in &s.seeds {
        let (p0, p1) = (
            r.initial_true_phi.ok_or("no initial Phi")?,
            r.final_true_phi.ok_or("no final Phi")?,
        );
        let (g0, g1) = (
            r.initial_true_grad_norm.ok_or("no initial gradient")?,
            r.final_true_grad_norm.ok_or("no final gradient")?,
        );
        ok &= p1 <= 0.8 * p0 && g1 < 0.5 * g0;
        lines.push(format!("Phi {p0:.3}->{p1:.3}, |grad| {g0:.3}->{g1:.2e}"));
    }
    let msg = format!("3 seeds [{}]", lines.join("; "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Check {
    let a = check_llr_normal_equations(20, 501)?;
    let b = check_llr_affine_recovery(20, 502)?;
    let c = check_llr_quadratic_scaling(503)?;
    Ok(format!("normal equations: {a}; affine: {b}; x^3 scaling: {c}"))
}

fn criterion_6() -> Check {
    check_inner_certificate(50, 601)
}

fn criterion_7() -> Check {
    let table = check_decision_table()?;
    let p = smdd_core::problems::SyntheticProblem::default();
    let mut records = 0;
    for seed in 0..3 {
        let cfg = TrConfig {
            seed,
            max_iters: 300,
            ..TrConfig::default()
        }
        .with_fixed_counts(300, 100);
        let x0 = uniform_ball_sample(&nalgebra::DVector::from_element(1, 10.0), 0.5, 1, RngKey::new(seed))
            .map_err(|e| e.to_string())?
            .remove(0);
        let st = solve(x0, None, &p, &p, None, &cfg).map_err(|e| e.to_string())?;
        check_history(&st.history, &cfg)?;
        if !st.history.iter().any(|r| r.accepted) || !st.history.iter().any(|r| !r.accepted) {
            return Err(format!("seed {seed}: run never exercised both branches"));
        }
        records += st.history.len();
    }
    Ok(format!("{table}; {records} logged iterations consistent"))
}

fn criterion_8() -> Check {
    let syn = synthetic();
    let dro = small_dro(20, 5, 801);
    let dro_s = small_dro(12, 4, 802);
    let parts = [
        check_problem_gradients("synthetic", &syn, synthetic_point, 100, 1e-5, 803)?,
        check_problem_gradients("dro", &dro, |r| dro_point(&dro, r), 100, 1e-5, 804)?,
        check_surrogate_gradient("synthetic", &syn, synthetic_point, 5.0, 100, 1e-5, 805)?,
        check_surrogate_gradient("dro", &dro_s, |r| dro_point(&dro_s, r), 0.5, 100, 1e-5, 806)?,
    ];
    Ok(parts.join("; "))
}

fn read_csvs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    Ok(out)
}

fn criterion_9() -> Check {
    let cases = [
        (ProblemKind::Synthetic, SolverKind::Tr, 60),
        (ProblemKind::Synthetic, SolverKind::Asgda, 60),
        (ProblemKind::Dro, SolverKind::Tr, 5),
        (ProblemKind::Dro, SolverKind::SpdConstant, 20),
    ];
    let mut files = 0;
    for (problem, solver, iters) in cases {
        let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
        for (workers, exec) in [
            (1, ExecMode::Sequential),
            (4, ExecMode::Parallel),
            (4, ExecMode::Parallel),
        ] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = RunConfig::new(problem, solver);
            cfg.seeds = vec![0, 1, 2, 3];
            cfg.workers = Some(workers);
            cfg.exec = exec;
            cfg.set_max_iters(iters);
            cfg.dro.diagnostic_samples = 200;
            let s = execute(&cfg, dir.path()).map_err(|e| e.to_string())?;
            no_seed_errors(&s)?;
            let csvs = read_csvs(dir.path())?;
            match &reference {
                None => {
                    files += csvs.len();
                    reference = Some(csvs);
                }
                Some(r) if *r == csvs => {}
                Some(r) => {
                    let differing = r
                        .iter()
                        .zip(&csvs)
                        .find(|(a, b)| a != b)
                        .map(|(a, _)| a.0.clone())
                        .unwrap_or_else(|| "file set".into());
                    return Err(format!(
                        "{problem}/{solver}: {differing} differs with {workers} workers"
                    ));
                }
            }
        }
    }
    Ok(format!(
        "{files} CSVs bit-identical across 1 and 4 workers and repeated runs"
    ))
}

type Criterion = (u8, &'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "synthetic stationarity", criterion_1),
        (2, "sample-size monotonicity", criterion_2),
        (3, "baseline divergence", criterion_3),
        (4, "DRO decrease", criterion_4),
        (5, "LLR oracle equivalence", criterion_5),
        (6, "inner-solver certificate", criterion_6),
        (7, "acceptance state machine", criterion_7),
        (8, "gradient checks", criterion_8),
        (9, "determinism", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let t = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] criterion {id} ({name}, {secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {id} ({name}, {secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
