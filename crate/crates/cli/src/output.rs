//! Per-iteration CSV logs.
//!
//! Floats use 17 significant digits (`{:.16e}`), which round-trips every
//! `f64` exactly. Missing optional values are empty cells.

use std::io::Write;

use smdd_core::baselines::BaselineRecord;
use smdd_core::tr::IterationRecord;

use crate::error::Result;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

pub const TR_COLUMNS: [&str; 19] = [
    "k",
    "delta",
    "delta_next",
    "rho",
    "grad_norm_surrogate",
    "v_k",
    "v_k_half",
    "accepted",
    "outcome",
    "descent_lhs",
    "descent_rhs",
    "n_llr",
    "m_k",
    "m_k_half",
    "b1_frobenius",
    "design_condition",
    "inner_eps",
    "true_phi",
    "true_grad_norm",
];

pub const BASELINE_COLUMNS: [&str; 8] = [
    "k",
    "eta_x",
    "eta_y",
    "grad_norm_estimate",
    "model_slope_frobenius",
    "diverged",
    "true_phi",
    "true_grad_norm",
];

fn vector_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

/// Writes a TR history; `n` is the decision dimension.
pub fn write_tr_csv<W: Write>(out: W, n: usize, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = TR_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(vector_columns("x_before", n))
        .chain(vector_columns("x_after", n))
        .collect();
    w.write_record(&header)?;
    for r in history {
        let mut row = vec![
            r.k.to_string(),
            float(r.delta),
            float(r.delta_next),
            float(r.rho),
            float(r.grad_norm_surrogate),
            float(r.v_k),
            float(r.v_k_half),
            r.accepted.to_string(),
            r.outcome.as_str().to_string(),
            float(r.descent_lhs),
            float(r.descent_rhs),
            r.n_llr.to_string(),
            r.m_k.to_string(),
            r.m_k_half.to_string(),
            float(r.b1_frobenius),
            float(r.design_condition),
            float(r.inner_eps),
            opt(r.true_phi),
            opt(r.true_grad_norm),
        ];
        row.extend(r.x_before.iter().map(|&v| float(v)));
        row.extend(r.x_after.iter().map(|&v| float(v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_baseline_csv<W: Write>(out: W, n: usize, history: &[BaselineRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = BASELINE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(vector_columns("x_after", n))
        .collect();
    w.write_record(&header)?;
    for r in history {
        let mut row = vec![
            r.k.to_string(),
            float(r.eta_x),
            float(r.eta_y),
            float(r.grad_norm_estimate),
            opt(r.model_slope_frobenius),
            r.diverged.to_string(),
            opt(r.true_phi),
            opt(r.true_grad_norm),
        ];
        row.extend(r.x_after.iter().map(|&v| float(v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
