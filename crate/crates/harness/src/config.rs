//! Experiment configuration, presets and the flat `key=value` file format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pinnuq::problems::{Problem, BURGERS_ID};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Deterministic,
    BaselineVi,
    ErrorAwareVi,
    ErrorAwareNlm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Deterministic, Method::BaselineVi, Method::ErrorAwareVi, Method::ErrorAwareNlm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Deterministic => "deterministic",
            Method::BaselineVi => "baseline_vi",
            Method::ErrorAwareVi => "error_aware_vi",
            Method::ErrorAwareNlm => "error_aware_nlm",
        }
    }

    pub fn is_error_aware(self) -> bool {
        matches!(self, Method::ErrorAwareVi | Method::ErrorAwareNlm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| HarnessError::config(format!("unknown method '{s}'")))
    }
}

/// Budget scale: the full published budgets or a reduced one for quick runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Desk,
}

impl FromStr for Scale {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            _ => Err(HarnessError::config(format!("unknown profile '{s}' (expected full or desk)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig4,
    Fig5,
    Burgers,
}

const FIRST_ORDER: [&str; 4] = ["ode1.poly", "ode1.cos", "ode1.exp", "ode1.log"];
const HARMONIC: [&str; 4] = ["ode2.harmonic.exp", "ode2.harmonic.poly", "ode2.harmonic.log", "ode2.harmonic.chirp"];
const DAMPED: [&str; 4] = ["ode2.damped.exp", "ode2.damped.poly", "ode2.damped.log", "ode2.damped.trig"];

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig1, Preset::Fig2, Preset::Fig4, Preset::Fig5, Preset::Burgers];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Burgers => "burgers",
        }
    }

    /// Problem and method of every cell the preset runs.
    pub fn cells(self) -> Vec<(&'static str, Method)> {
        let both = |ids: [&'static str; 4]| {
            ids.into_iter()
                .flat_map(|id| [(id, Method::ErrorAwareNlm), (id, Method::ErrorAwareVi)])
                .collect::<Vec<_>>()
        };
        match self {
            Preset::Fig1 => FIRST_ORDER.into_iter().map(|id| (id, Method::BaselineVi)).collect(),
            Preset::Fig2 => both(FIRST_ORDER),
            Preset::Fig4 => both(HARMONIC),
            Preset::Fig5 => both(DAMPED),
            Preset::Burgers => vec![(BURGERS_ID, Method::ErrorAwareVi)],
        }
    }

    pub fn config(self, problem_id: &str, method: Method, scale: Scale) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(problem_id, method, scale)?;
        if self == Preset::Fig1 {
            // deliberately short of convergence
            cfg.det_epochs = 1000;
        }
        Ok(cfg)
    }
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase();
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| HarnessError::config(format!("unknown preset '{s}'")))
    }
}

/// One cell: a problem, a method and every budget and resolution knob.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem_id: String,
    pub method: Method,
    pub det_epochs: usize,
    pub vi_epochs: usize,
    pub seed: u64,
    /// Evaluation points along x (ODEs: over the test domain).
    pub grid_points: usize,
    /// Evaluation times for space-time problems.
    pub time_points: usize,
    /// Collocation grid for Burgers (x, t).
    pub burgers_grid: (usize, usize),
    pub posterior_samples: usize,
    pub envelope_intervals: usize,
    pub oversample: usize,
    pub safety_factor: f64,
    pub prior_candidates: usize,
    /// Points on the test domain where the NLM prior is scored.
    pub prior_eval_points: usize,
    /// Prior standard deviation of the VI weights; by problem order when unset.
    pub vi_prior_sigma: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem_id: &str, method: Method, scale: Scale) -> Result<Self> {
        let problem = Problem::<f64>::by_id(problem_id).map_err(|e| HarnessError::config(e.to_string()))?;
        let burgers = problem.as_ode().is_none();
        let (det_epochs, vi_epochs, grid_points, time_points, burgers_grid) = match (scale, burgers) {
            (Scale::Full, false) => (10_000, 50_000, 401, 1, (100, 100)),
            (Scale::Desk, false) => (2000, 5000, 201, 1, (50, 50)),
            (Scale::Full, true) => (20_000, 20_000, 101, 41, (100, 100)),
            (Scale::Desk, true) => (2000, 2000, 51, 21, (50, 50)),
        };
        Ok(Self {
            problem_id: problem_id.to_string(),
            method,
            det_epochs,
            vi_epochs,
            seed: DEFAULT_SEED,
            grid_points,
            time_points,
            burgers_grid,
            posterior_samples: 1000,
            envelope_intervals: pinnuq::bounds::DEFAULT_KNOTS,
            oversample: pinnuq::bounds::DEFAULT_OVERSAMPLE,
            safety_factor: pinnuq::bounds::DEFAULT_SAFETY,
            prior_candidates: pinnuq::nlm::DEFAULT_PRIOR_CANDIDATES,
            prior_eval_points: 200,
            vi_prior_sigma: None,
            out_dir: None,
        })
    }

    pub fn problem(&self) -> Result<Problem<f64>> {
        Problem::by_id(&self.problem_id).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        let positive = [
            ("grid_points", self.grid_points),
            ("time_points", self.time_points),
            ("posterior_samples", self.posterior_samples),
            ("envelope_intervals", self.envelope_intervals),
            ("oversample", self.oversample),
            ("prior_candidates", self.prior_candidates),
            ("prior_eval_points", self.prior_eval_points),
            ("burgers grid x", self.burgers_grid.0),
            ("burgers grid t", self.burgers_grid.1),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(HarnessError::config(format!("{name} must be positive")));
        }
        if self.grid_points < 2 {
            return Err(HarnessError::config("grid_points must be at least 2"));
        }
        if !(self.safety_factor >= 1.0) {
            return Err(HarnessError::config("safety_factor must be at least 1"));
        }
        if matches!(self.method, Method::BaselineVi | Method::ErrorAwareVi) && self.vi_epochs == 0 {
            return Err(HarnessError::config("VI methods need vi_epochs > 0"));
        }
        if let Some(s) = self.vi_prior_sigma {
            if !(s > 0.0) {
                return Err(HarnessError::config("vi_prior_sigma must be positive"));
            }
        }
        Ok(())
    }

    /// File stem shared by every artifact of this cell.
    pub fn stem(&self) -> String {
        format!("{}_{}_e{}", self.problem_id, self.method, self.det_epochs)
    }
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
/// Keys are normalized so `det-epochs` and `det_epochs` are the same.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::config(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        let key = k.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(HarnessError::config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(HarnessError::config(format!("line {}: duplicate key '{key}'", i + 1)));
        }
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_key_values(&std::fs::read_to_string(path).map_err(HarnessError::io(path))?)
}
