use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::schedule::{CountPolicy, ToleranceSchedule};

/// Optional early stop: surrogate gradient norm and radius both below
/// their thresholds for `patience` consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    pub grad_tol: f64,
    pub delta_tol: f64,
    pub patience: usize,
}

/// Trust-region parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrConfig {
    pub delta0: f64,
    pub delta_max: f64,
    /// Floor applied when shrinking the radius.
    pub delta_min: f64,
    pub gamma: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub kappa_dcp: f64,
    /// Largest accepted condition number of the scaled regression design.
    pub lambda_max: f64,
    /// Regression sample count `N_k`; the floor for `min = None` is `n + 5`.
    pub llr_count: CountPolicy,
    /// Value-estimate sample count `|S_k| = |S_{k+1/2}|`.
    pub value_count: CountPolicy,
    pub inner_tolerance: ToleranceSchedule,
    pub max_iters: usize,
    pub seed: u64,
    pub stop: Option<StopRule>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrConfig {
    fn default() -> Self {
        TrConfig {
            delta0: 1.0,
            delta_max: 2.0,
            delta_min: 1e-10,
            gamma: 2.0,
            eta1: 0.25,
            eta2: 0.1,
            kappa_dcp: 1e-3,
            lambda_max: 100.0,
            llr_count: CountPolicy::Scaled {
                coef: 1.0,
                exponent: 4.0,
                min: None,
                max: 5000,
            },
            value_count: CountPolicy::Scaled {
                coef: 50.0,
                exponent: 2.0,
                min: Some(50),
                max: 5000,
            },
            inner_tolerance: ToleranceSchedule::default(),
            max_iters: 300,
            seed: 0,
            stop: None,
            exec: Exec::Parallel,
        }
    }
}

impl TrConfig {
    /// Fixed `(N_k, M_k)` sample counts.
    pub fn with_fixed_counts(mut self, llr: usize, value: usize) -> Self {
        self.llr_count = CountPolicy::fixed(llr);
        self.value_count = CountPolicy::fixed(value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.delta_max > 0.0) {
            problems.push(format!("delta_max must be > 0 (got {})", self.delta_max));
        }
        if !(self.delta0 > 0.0 && self.delta0 < self.delta_max) {
            problems.push(format!("delta0 must lie in (0, delta_max) (got {})", self.delta0));
        }
        if !(self.delta_min > 0.0 && self.delta_min <= self.delta0) {
            problems.push(format!("delta_min must lie in (0, delta0] (got {})", self.delta_min));
        }
        if !(self.gamma > 1.0) {
            problems.push(format!("gamma must be > 1 (got {})", self.gamma));
        }
        if !(self.eta1 > 0.0 && self.eta1 < 1.0) {
            problems.push(format!("eta1 must lie in (0, 1) (got {})", self.eta1));
        }
        if !(self.eta2 > 0.0) {
            problems.push(format!("eta2 must be > 0 (got {})", self.eta2));
        }
        if !(self.kappa_dcp > 0.0) {
            problems.push(format!("kappa_dcp must be > 0 (got {})", self.kappa_dcp));
        }
        if !(self.lambda_max > 1.0) {
            problems.push(format!("lambda_max must be > 1 (got {})", self.lambda_max));
        }
        if !(self.inner_tolerance.coef > 0.0 && self.inner_tolerance.floor > 0.0) {
            problems.push("inner_tolerance coef and floor must be > 0".into());
        }
        for (name, p) in [("llr_count", &self.llr_count), ("value_count", &self.value_count)] {
            if let Err(e) = p.validate(name) {
                problems.push(e);
            }
        }
        if let Some(stop) = &self.stop {
            if stop.patience == 0 {
                problems.push("stop.patience must be >= 1".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}
