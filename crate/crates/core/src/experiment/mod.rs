//! Batch experiments: a TOML spec names a class template, a load grid, the
//! policies to compare and the check suites to run. `run` writes CSV and
//! Markdown artifacts into an output directory.
//!
//! ```toml
//! name = "fig9"
//! figure = 9
//! loads = [0.5, 0.7, 0.9]
//! suites = ["sweep"]
//! policies = [{ name = "whittle" }, { name = "fcfs" }, { name = "static_priority" }]
//!
//! [system]
//! horizon = 20000.0
//! replications = 10
//!
//! [[classes]]
//! lambda = 0.75
//! mu = 3.0
//! cost = { family = "polynomial", coeffs = [0.0, 1.0] }
//! ```
//!
//! Class arrival rates are shares: each load rescales them so the total
//! load hits the target. With no loads the template rates are used as is.
//! A `static_priority` entry without an `order` tries every order and keeps
//! the cheapest.

mod presets;
mod run;
mod summary;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ClassConfig, PolicySpec};
use crate::sim::SystemConfig;

pub use presets::{preset, PRESETS};
pub use run::{run, validate, CheckOutcome, Issue, RunReport, ValidationReport};
pub use summary::{read_results, summarize, ResultRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Sweep,
    BanditChecks,
    BridgeChecks,
    Sanity,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Sweep => "sweep",
            Suite::BanditChecks => "bandit_checks",
            Suite::BridgeChecks => "bridge_checks",
            Suite::Sanity => "sanity",
        }
    }
}

fn default_suites() -> Vec<Suite> {
    vec![Suite::Sweep]
}

fn default_replications() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub horizon: f64,
    /// Defaults to 10% of the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `0.01 / max mu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_quantum: Option<f64>,
}

/// Parameters of the single-arm bandit checks, run per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditSpec {
    pub alpha: f64,
    /// Threshold whose HJB sign pattern is checked.
    pub t0: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub fd_delta: f64,
    pub fd_reps: usize,
}

impl Default for BanditSpec {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            t0: 1.0,
            grid_max: 3.0,
            grid_points: 301,
            fd_delta: 1e-2,
            fd_reps: 2000,
        }
    }
}

/// Parameters of the queue/bandit coupling check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeSpec {
    pub policy: String,
    pub replications: usize,
    pub max_events: u64,
    /// Load to couple at; defaults to the first sweep load.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<f64>,
}

impl Default for BridgeSpec {
    fn default() -> Self {
        Self {
            policy: "whittle".into(),
            replications: 3,
            max_events: 100_000,
            load: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Also write `fig{N}_data.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<u32>,
    #[serde(default)]
    pub loads: Vec<f64>,
    pub policies: Vec<PolicySpec>,
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub system: SystemSpec,
    pub classes: Vec<ClassConfig>,
    #[serde(default)]
    pub bandit: BanditSpec,
    #[serde(default)]
    pub bridge: BridgeSpec,
}

/// Command-line overrides applied on top of a spec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    /// Also resets the warmup to its 10% default.
    pub horizon: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                path,
                message: e.into_inner().message().trim().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("<spec>", e.to_string()))
    }

    /// Reads a spec file, or a built-in preset when `source` names one and
    /// no such file exists.
    pub fn load(source: &str) -> Result<Self> {
        let path = Path::new(source);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            return Self::from_toml(&text);
        }
        match preset(source) {
            Some(spec) => Ok(spec),
            None => Err(Error::config(
                "<spec>",
                format!("`{source}` is neither a file nor a preset ({})", PRESETS.join(", ")),
            )),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.system.seed = seed;
        }
        if let Some(reps) = o.replications {
            self.system.replications = reps;
        }
        if let Some(h) = o.horizon {
            self.system.horizon = h;
            self.system.warmup = None;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    /// The system with template arrival rates.
    pub fn template(&self) -> SystemConfig {
        let mut cfg = SystemConfig::new(self.classes.clone(), self.system.horizon);
        if let Some(w) = self.system.warmup {
            cfg.warmup = w;
        }
        cfg.replications = self.system.replications;
        cfg.seed = self.system.seed;
        if let Some(q) = self.system.decision_quantum {
            cfg.decision_quantum = q;
        }
        cfg
    }

    /// `(load, system)` for every sweep point.
    pub fn systems(&self) -> Result<Vec<(f64, SystemConfig)>> {
        let base = self.template();
        if self.loads.is_empty() {
            return Ok(vec![(base.total_load(), base)]);
        }
        self.loads
            .iter()
            .enumerate()
            .map(|(i, &rho)| {
                let cfg = crate::sim::scale_to_load(&base, rho)
                    .map_err(|e| Error::config(format!("loads[{i}]"), e.to_string()))?;
                Ok((rho, cfg))
            })
            .collect()
    }
}
