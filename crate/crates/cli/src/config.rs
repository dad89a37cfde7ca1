//! Run configuration: a single JSON document per experiment.
//!
//! Parsing is done key by key against the defaults so that every offending
//! key is reported at once instead of stopping at the first.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use smdd_core::baselines::{BaselineConfig, BaselineMethod};
use smdd_core::problems::{CsvSchema, DroParams};
use smdd_core::tr::TrConfig;
use smdd_core::Exec;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Synthetic,
    Dro,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 2] = [ProblemKind::Synthetic, ProblemKind::Dro];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Synthetic => "synthetic",
            ProblemKind::Dro => "dro",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Tr,
    Asgda,
    SpdConstant,
    SpdDynamic,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Tr,
        SolverKind::Asgda,
        SolverKind::SpdConstant,
        SolverKind::SpdDynamic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Tr => "tr",
            SolverKind::Asgda => "asgda",
            SolverKind::SpdConstant => "spd-constant",
            SolverKind::SpdDynamic => "spd-dynamic",
        }
    }

    pub fn baseline_method(self) -> Option<BaselineMethod> {
        match self {
            SolverKind::Tr => None,
            SolverKind::Asgda => Some(BaselineMethod::Asgda),
            SolverKind::SpdConstant => Some(BaselineMethod::SpdConstant),
            SolverKind::SpdDynamic => Some(BaselineMethod::SpdDynamic),
        }
    }
}

fn options<T: Copy>(all: &[T], name: fn(T) -> &'static str) -> String {
    all.iter().map(|&v| name(v)).collect::<Vec<_>>().join(", ")
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SolverKind::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            format!(
                "unknown solver `{s}`; valid options: {}",
                options(&SolverKind::ALL, SolverKind::name)
            )
        })
    }
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ProblemKind::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            format!(
                "unknown problem `{s}`; valid options: {}",
                options(&ProblemKind::ALL, ProblemKind::name)
            )
        })
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl From<ExecMode> for Exec {
    fn from(m: ExecMode) -> Exec {
        match m {
            ExecMode::Sequential => Exec::Sequential,
            ExecMode::Parallel => Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSettings {
    pub noise_sigma: f64,
    pub half_width: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        SyntheticSettings {
            noise_sigma: 1.0,
            half_width: 125.0,
        }
    }
}

/// Base data for the DRO problem: a CSV file, or generated data when no
/// path is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSettings {
    pub path: Option<PathBuf>,
    pub schema: CsvSchema,
    pub rows: usize,
    pub features: usize,
    pub seed: u64,
}

impl Default for DataSettings {
    fn default() -> Self {
        DataSettings {
            path: None,
            schema: CsvSchema::default(),
            rows: 200,
            features: 5,
            seed: 0,
        }
    }
}

/// Starting points are drawn uniformly from balls; `None` centers fall back
/// to the problem's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialPoint {
    pub x_center: Option<Vec<f64>>,
    pub x_radius: f64,
    pub y_center: Option<Vec<f64>>,
    pub y_radius: f64,
}

impl Default for InitialPoint {
    fn default() -> Self {
        InitialPoint {
            x_center: None,
            x_radius: 0.5,
            y_center: None,
            y_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub solver: SolverKind,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub exec: ExecMode,
    pub log_oracle_diagnostics: bool,
    pub tr: TrConfig,
    pub baseline: BaselineConfig,
    pub synthetic: SyntheticSettings,
    pub dro: DroParams,
    pub data: DataSettings,
    pub initial: InitialPoint,
}

const KEYS: [&str; 13] = [
    "problem",
    "solver",
    "seeds",
    "output_dir",
    "workers",
    "exec",
    "log_oracle_diagnostics",
    "tr",
    "baseline",
    "synthetic",
    "dro",
    "data",
    "initial",
];

impl RunConfig {
    /// Defaults for a problem/solver pair.
    pub fn new(problem: ProblemKind, solver: SolverKind) -> Self {
        let method = solver.baseline_method().unwrap_or(BaselineMethod::SpdConstant);
        let baseline = match problem {
            ProblemKind::Synthetic => BaselineConfig::synthetic(method),
            ProblemKind::Dro => BaselineConfig::dro(method),
        };
        let tr = match problem {
            ProblemKind::Synthetic => TrConfig::default().with_fixed_counts(300, 100),
            ProblemKind::Dro => TrConfig {
                max_iters: 100,
                ..TrConfig::default()
            }
            .with_fixed_counts(300, 100),
        };
        RunConfig {
            problem,
            solver,
            seeds: vec![0],
            output_dir: None,
            workers: None,
            exec: ExecMode::Parallel,
            log_oracle_diagnostics: true,
            tr,
            baseline,
            synthetic: SyntheticSettings::default(),
            dro: DroParams::default(),
            data: DataSettings::default(),
            initial: InitialPoint::default(),
        }
    }

    /// Parses and validates a JSON document, listing every problem found.
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(vec![format!("not valid JSON: {e}")]))?;
        let Value::Object(map) = value else {
            return Err(CliError::Config(vec!["top level must be a JSON object".into()]));
        };
        let mut errors = Vec::new();
        for key in map.keys() {
            if !KEYS.contains(&key.as_str()) {
                errors.push(format!("unknown key `{key}`; expected one of: {}", KEYS.join(", ")));
            }
        }
        let problem = named::<ProblemKind>(&map, "problem", &mut errors);
        let solver = named::<SolverKind>(&map, "solver", &mut errors);
        let mut cfg = RunConfig::new(
            problem.unwrap_or(ProblemKind::Synthetic),
            solver.unwrap_or(SolverKind::Tr),
        );
        cfg.seeds = scalar(&map, "seeds", cfg.seeds, &mut errors);
        cfg.output_dir = scalar(&map, "output_dir", cfg.output_dir, &mut errors);
        cfg.workers = scalar(&map, "workers", cfg.workers, &mut errors);
        cfg.exec = scalar(&map, "exec", cfg.exec, &mut errors);
        cfg.log_oracle_diagnostics = scalar(&map, "log_oracle_diagnostics", cfg.log_oracle_diagnostics, &mut errors);
        cfg.tr = section(&map, "tr", cfg.tr, &[], &mut errors);
        cfg.baseline = section(&map, "baseline", cfg.baseline, &["method"], &mut errors);
        cfg.synthetic = section(&map, "synthetic", cfg.synthetic, &[], &mut errors);
        cfg.dro = section(&map, "dro", cfg.dro, &[], &mut errors);
        cfg.data = section(&map, "data", cfg.data, &[], &mut errors);
        cfg.initial = section(&map, "initial", cfg.initial, &[], &mut errors);
        errors.extend(cfg.check());
        if errors.is_empty() && problem.is_some() && solver.is_some() {
            cfg.sync_exec();
            Ok(cfg)
        } else {
            Err(CliError::Config(errors))
        }
    }

    /// Semantic checks beyond what the types enforce.
    pub fn check(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.seeds.is_empty() {
            errors.push("seeds: must list at least one seed".into());
        }
        if self.workers == Some(0) {
            errors.push("workers: must be >= 1".into());
        }
        if let Err(e) = self.tr.validate() {
            errors.push(format!("tr: {e}"));
        }
        if let Err(e) = self.baseline.validate() {
            errors.push(format!("baseline: {e}"));
        }
        if !(self.synthetic.noise_sigma >= 0.0) {
            errors.push("synthetic.noise_sigma: must be >= 0".into());
        }
        if !(self.synthetic.half_width > 0.0) {
            errors.push("synthetic.half_width: must be > 0".into());
        }
        if !(self.initial.x_radius >= 0.0 && self.initial.y_radius >= 0.0) {
            errors.push("initial: radii must be >= 0".into());
        }
        errors
    }

    /// Applies the execution mode and solver-selected baseline method.
    pub fn sync_exec(&mut self) {
        let exec = Exec::from(self.exec);
        self.tr.exec = exec;
        self.baseline.exec = exec;
        if let Some(method) = self.solver.baseline_method() {
            self.baseline.method = method;
        }
    }

    /// Sets the iteration budget of whichever solver runs.
    pub fn set_max_iters(&mut self, iters: usize) {
        self.tr.max_iters = iters;
        self.baseline.max_iters = iters;
    }

    /// Stem used for output file names.
    pub fn run_stem(&self, seed: u64) -> String {
        format!("{}_{}_seed{seed}", self.problem, self.solver)
    }
}

fn named<T: FromStr<Err = String>>(map: &Map<String, Value>, key: &str, errors: &mut Vec<String>) -> Option<T> {
    match map.get(key) {
        None => {
            errors.push(format!("{key}: missing required key"));
            None
        }
        Some(Value::String(s)) => s.parse().map_err(|e| errors.push(format!("{key}: {e}"))).ok(),
        Some(other) => {
            errors.push(format!("{key}: expected a string, got {other}"));
            None
        }
    }
}

fn scalar<T: DeserializeOwned>(map: &Map<String, Value>, key: &str, default: T, errors: &mut Vec<String>) -> T {
    match map.get(key) {
        None => default,
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            errors.push(format!("{key}: {e}"));
            default
        }),
    }
}

/// Overlays the keys of `map[key]` onto `default` one at a time, recording
/// each key that fails to deserialize.
fn section<T: Serialize + DeserializeOwned>(
    map: &Map<String, Value>,
    key: &str,
    default: T,
    reserved: &[&str],
    errors: &mut Vec<String>,
) -> T {
    let Some(value) = map.get(key) else {
        return default;
    };
    let Value::Object(overrides) = value else {
        errors.push(format!("{key}: expected an object"));
        return default;
    };
    let Ok(Value::Object(base)) = serde_json::to_value(&default) else {
        unreachable!("config sections serialize to objects");
    };
    let mut merged = base.clone();
    for (field, v) in overrides {
        if reserved.contains(&field.as_str()) {
            errors.push(format!("{key}.{field}: set by the top-level `solver` key"));
            continue;
        }
        if !base.contains_key(field) {
            let known: Vec<_> = base.keys().map(String::as_str).collect();
            errors.push(format!(
                "{key}.{field}: unknown key; expected one of: {}",
                known.join(", ")
            ));
            continue;
        }
        let mut trial = base.clone();
        trial.insert(field.clone(), v.clone());
        match serde_json::from_value::<T>(Value::Object(trial)) {
            Ok(_) => {
                merged.insert(field.clone(), v.clone());
            }
            Err(e) => errors.push(format!("{key}.{field}: {e}")),
        }
    }
    serde_json::from_value(Value::Object(merged)).unwrap_or(default)
}
