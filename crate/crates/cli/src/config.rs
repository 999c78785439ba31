//! Flat `key = value` run configuration.
//!
//! Keys are the model parameter names (`r`, `p`, `xi1`, ...), the run keys
//! listed in [`RUN_KEYS`], and the initial-state keys `T0 I0 F0 D10 D20`.
//! `alpha` and `gamma1` take comma-separated lists and span the sweep. A `#`
//! starts a comment that runs to the end of the line.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use fracopt_core::model::{FALLBACK_C1, FALLBACK_C2};
use fracopt_core::{Grid, ModelParams, NewtonConfig, Scenario, StatePoint, SweepConfig};
use thiserror::Error;

/// Keys that configure the run rather than the model.
pub const RUN_KEYS: [&str; 12] = [
    "scenario",
    "alpha",
    "gamma1",
    "tf",
    "dt",
    "delta",
    "max_sweeps",
    "relaxation",
    "newton_max_iter",
    "newton_tol",
    "newton_damping",
    "workers",
];

const STATE_KEYS: [&str; 5] = ["T0", "I0", "F0", "D10", "D20"];
const OUTPUT_KEY: &str = "output_dir";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}, key `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("{0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Base parameters; `alpha` and `gamma1` are overwritten per sweep cell.
    pub params: ModelParams,
    pub scenario: Scenario,
    pub alpha_list: Vec<f64>,
    pub gamma1_list: Vec<f64>,
    pub t_f: f64,
    pub dt: f64,
    pub x0: StatePoint,
    pub sweep: SweepConfig,
    pub newton: NewtonConfig,
    pub output_dir: PathBuf,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = ModelParams::table(0.9);
        Self {
            params,
            scenario: Scenario::Combined,
            alpha_list: vec![0.9],
            gamma1_list: vec![params.gamma1],
            t_f: 120.0,
            dt: 0.25,
            x0: StatePoint::reference_initial(),
            sweep: SweepConfig::default(),
            newton: NewtonConfig::default(),
            output_dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

/// A parsed configuration and the warnings raised while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn parse_config(text: &str) -> Result<Parsed, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, got `{body}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        let bad = |message: String| ConfigError::Value {
            line,
            key: key.to_string(),
            message,
        };
        apply(&mut cfg, key, value).map_err(bad)?;
    }
    let mut warnings = Vec::new();
    if !seen.contains("c1") || !seen.contains("c2") {
        warnings.push(format!(
            "warning: c1/c2 not set; using fallback c1 = {FALLBACK_C1}, c2 = {FALLBACK_C2} (see README, \"Fat-competition rates\")"
        ));
    }
    cfg.validate()?;
    Ok(Parsed { config: cfg, warnings })
}

fn number(value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("`{value}` is not a number"))
}

fn list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(number)
        .collect()
}

fn count(value: &str) -> Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("`{value}` is not a non-negative integer"))
}

fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "scenario" => cfg.scenario = value.parse().map_err(|e| format!("{e}"))?,
        "alpha" => cfg.alpha_list = list(value)?,
        "gamma1" => cfg.gamma1_list = list(value)?,
        "tf" => cfg.t_f = number(value)?,
        "dt" => cfg.dt = number(value)?,
        "delta" => cfg.sweep.delta = number(value)?,
        "max_sweeps" => cfg.sweep.max_sweeps = count(value)?,
        "relaxation" => cfg.sweep.relaxation = number(value)?,
        "newton_max_iter" => cfg.newton.max_iter = count(value)?,
        "newton_tol" => cfg.newton.tol = number(value)?,
        "newton_damping" => cfg.newton.damping = number(value)?,
        "workers" => cfg.workers = count(value)?,
        "T0" => cfg.x0.tumor = number(value)?,
        "I0" => cfg.x0.immune = number(value)?,
        "F0" => cfg.x0.fat = number(value)?,
        "D10" => cfg.x0.chemo = number(value)?,
        "D20" => cfg.x0.immuno = number(value)?,
        OUTPUT_KEY => cfg.output_dir = PathBuf::from(value),
        _ => match cfg.params.field_mut(key) {
            Some(slot) => *slot = number(value)?,
            None => return Err("unknown key".into()),
        },
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Validation(m.to_string()));
        if self.alpha_list.is_empty() {
            return fail("alpha list must not be empty");
        }
        if self.alpha_list.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return fail("alpha must lie in (0,1)");
        }
        if self.gamma1_list.is_empty() {
            return fail("gamma1 list must not be empty");
        }
        if self.gamma1_list.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return fail("gamma1 must be positive");
        }
        if self.workers == 0 {
            return fail("workers must be >= 1");
        }
        if self.x0.to_array().iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return fail("initial state must be non-negative");
        }
        Grid::new(self.t_f, self.dt).map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.sweep.validate().map_err(ConfigError::Validation)?;
        self.newton
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        for (alpha, gamma1) in self.cells() {
            self.cell_params(alpha, gamma1)
                .validate()
                .map_err(|e| ConfigError::Validation(e.to_string()))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.t_f, self.dt).expect("validated grid")
    }

    /// Sweep cells in row-major `(alpha, gamma1)` order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.alpha_list
            .iter()
            .flat_map(|&a| self.gamma1_list.iter().map(move |&g| (a, g)))
            .collect()
    }

    pub fn cell_params(&self, alpha: f64, gamma1: f64) -> ModelParams {
        let mut p = self.params;
        p.alpha = alpha;
        p.gamma1 = gamma1;
        p
    }

    /// Serialises every setting; parsing the result gives back `self`.
    pub fn to_config_string(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "alpha = {}", join(&self.alpha_list));
        let _ = writeln!(s, "gamma1 = {}", join(&self.gamma1_list));
        let _ = writeln!(s, "tf = {}", self.t_f);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "delta = {}", self.sweep.delta);
        let _ = writeln!(s, "max_sweeps = {}", self.sweep.max_sweeps);
        let _ = writeln!(s, "relaxation = {}", self.sweep.relaxation);
        let _ = writeln!(s, "newton_max_iter = {}", self.newton.max_iter);
        let _ = writeln!(s, "newton_tol = {}", self.newton.tol);
        let _ = writeln!(s, "newton_damping = {}", self.newton.damping);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "{OUTPUT_KEY} = {}", self.output_dir.display());
        for (key, v) in STATE_KEYS.iter().zip(self.x0.to_array()) {
            let _ = writeln!(s, "{key} = {v}");
        }
        for (name, v) in self.params.named() {
            if name != "gamma1" {
                let _ = writeln!(s, "{name} = {v}");
            }
        }
        s
    }
}
