//! Aggregates run CSVs into per-iteration quartiles across seeds.
//!
//! Files are grouped by the `{problem}_{solver}_seed{seed}.csv` naming
//! used by `run`. Two metrics are aggregated: `true_grad_norm` (rows where
//! the oracle value was logged) and `grad_norm_estimate` (the surrogate
//! gradient norm for the trust-region solver, the sampled one for the
//! baselines).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::output::float;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: String,
    pub solver: String,
    pub metric: &'static str,
    pub k: usize,
    pub runs: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Splits `{problem}_{solver}_seed{seed}.csv`.
pub fn parse_run_name(name: &str) -> Option<(String, String, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (head, seed) = stem.rsplit_once("_seed")?;
    let seed = seed.parse().ok()?;
    let (problem, solver) = head.split_once('_')?;
    Some((problem.to_string(), solver.to_string(), seed))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

struct RunFile {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(usize, Option<f64>, f64)>,
}

fn schema(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_run(path: &Path) -> Result<RunFile> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| schema(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| schema(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let k_col = col("k").ok_or_else(|| schema(path, "missing column `k`"))?;
    let est_col = col("grad_norm_surrogate")
        .or_else(|| col("grad_norm_estimate"))
        .ok_or_else(|| schema(path, "missing column `grad_norm_surrogate` or `grad_norm_estimate`"))?;
    let true_col = col("true_grad_norm").ok_or_else(|| schema(path, "missing column `true_grad_norm`"))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| schema(path, format!("line {line}: {e}")))?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let k = cell(k_col)
            .parse()
            .map_err(|_| schema(path, format!("line {line}: bad iteration index `{}`", cell(k_col))))?;
        let parse = |c: usize| -> Result<f64> {
            cell(c)
                .parse()
                .map_err(|_| schema(path, format!("line {line}: `{}` is not a number", cell(c))))
        };
        let truth = if cell(true_col).is_empty() {
            None
        } else {
            Some(parse(true_col)?)
        };
        rows.push((k, truth, parse(est_col)?));
    }
    Ok(RunFile {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

type Key = (String, String, &'static str);

/// Reads every run CSV in `dirs` and aggregates per problem, solver,
/// metric and iteration.
pub fn summarize(dirs: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    if dirs.is_empty() {
        return Err(CliError::Summarize("no run directories given".into()));
    }
    let mut groups: BTreeMap<(String, String), Vec<RunFile>> = BTreeMap::new();
    for dir in dirs {
        let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| parse_run_name(n).is_some())
            .collect();
        if names.is_empty() {
            return Err(CliError::Summarize(format!("no run CSVs found in {}", dir.display())));
        }
        names.sort();
        for name in names {
            let (problem, solver, _) = parse_run_name(&name).expect("filtered above");
            let run = read_run(&dir.join(&name))?;
            let group = groups.entry((problem, solver)).or_default();
            if let Some(first) = group.first() {
                if first.header != run.header {
                    return Err(schema(
                        &run.path,
                        format!("columns differ from {}", first.path.display()),
                    ));
                }
            }
            group.push(run);
        }
    }
    let mut values: BTreeMap<Key, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for ((problem, solver), runs) in &groups {
        for run in runs {
            for &(k, truth, est) in &run.rows {
                if let Some(t) = truth.filter(|t| t.is_finite()) {
                    values
                        .entry((problem.clone(), solver.clone(), "true_grad_norm"))
                        .or_default()
                        .entry(k)
                        .or_default()
                        .push(t);
                }
                if est.is_finite() {
                    values
                        .entry((problem.clone(), solver.clone(), "grad_norm_estimate"))
                        .or_default()
                        .entry(k)
                        .or_default()
                        .push(est);
                }
            }
        }
    }
    let mut out = Vec::new();
    for ((problem, solver, metric), per_k) in values {
        for (k, mut v) in per_k {
            v.sort_by(f64::total_cmp);
            out.push(SummaryRow {
                problem: problem.clone(),
                solver: solver.clone(),
                metric,
                k,
                runs: v.len(),
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
            });
        }
    }
    Ok(out)
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "solver", "metric", "k", "runs", "q1", "median", "q3"])?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.solver.clone(),
            r.metric.to_string(),
            r.k.to_string(),
            r.runs.to_string(),
            float(r.q1),
            float(r.median),
            float(r.q3),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
