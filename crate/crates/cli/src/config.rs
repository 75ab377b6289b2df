//! TOML run configuration.
//!
//! ```toml
//! mode = "both"
//! output_dir = "out/rotation"
//! seed = 7
//! x0 = [1.0, 0.0]
//!
//! [problem]
//! name = "skew_rotation"
//! n = 2
//!
//! [schedule]
//! name = "constant"
//! value = 0.5
//!
//! [integrator]
//! method = "rk4"
//! h = 0.01
//! horizon = 10.0
//! sample_every = 0.01
//!
//! [discrete]
//! max_iter = 1000
//! tol = 1e-10
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fbf_core::dynamics::{IntegratorOptions, ProblemInstance, ScheduleSpec, StepSchedule};
use fbf_core::problems::ProblemSpec;
use fbf_core::State;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Continuous,
    Discrete,
    Both,
}

impl Mode {
    pub fn continuous(&self) -> bool {
        matches!(self, Mode::Continuous | Mode::Both)
    }

    pub fn discrete(&self) -> bool {
        matches!(self, Mode::Discrete | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteOptions {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iter() -> usize {
    1000
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for DiscreteOptions {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorName {
    Fejer,
    ResidualIntegral,
    Envelope,
    ErgodicObjective,
    ZdotBound,
    Inclusion,
    Velocity,
}

impl MonitorName {
    pub const ALL: [MonitorName; 7] = [
        MonitorName::Fejer,
        MonitorName::ResidualIntegral,
        MonitorName::Envelope,
        MonitorName::ErgodicObjective,
        MonitorName::ZdotBound,
        MonitorName::Inclusion,
        MonitorName::Velocity,
    ];
}

impl fmt::Display for MonitorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub mode: Mode,
    pub schedule: ScheduleSpec,
    pub integrator: IntegratorOptions,
    pub discrete: DiscreteOptions,
    pub monitors: Vec<MonitorName>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Defaults to the all-ones vector.
    pub x0: Option<Vec<f64>>,
    /// Comparison points for the ergodic objective bound; defaults to the known
    /// solution, `x0`, and three seeded points in `dom A`.
    pub probes: Option<Vec<Vec<f64>>>,
}

const KEYS: [&str; 10] = [
    "problem",
    "mode",
    "schedule",
    "integrator",
    "discrete",
    "monitors",
    "output_dir",
    "seed",
    "x0",
    "probes",
];

fn take<T: DeserializeOwned>(table: &mut toml::Table, key: &str) -> Result<Option<T>> {
    table
        .remove(key)
        .map(|v| v.try_into::<T>().map_err(|e| anyhow!("invalid `{key}`: {}", e.message())))
        .transpose()
}

fn require<T: DeserializeOwned>(table: &mut toml::Table, key: &str) -> Result<T> {
    take(table, key)?.ok_or_else(|| anyhow!("missing required key `{key}`"))
}

/// A configuration with its problem and schedule already built and cross-checked.
pub struct Prepared {
    pub config: RunConfig,
    pub problem: ProblemInstance,
    pub schedule: StepSchedule,
    pub x0: State,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_table(load_table(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_table(text.parse::<toml::Table>().context("config is not valid TOML")?)
    }

    pub fn from_table(mut table: toml::Table) -> Result<Self> {
        if let Some(key) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            bail!("unknown key `{key}`");
        }
        let integrator: IntegratorOptions = require(&mut table, "integrator")?;
        let config = Self {
            problem: require(&mut table, "problem")?,
            mode: take(&mut table, "mode")?.unwrap_or_default(),
            schedule: require(&mut table, "schedule")?,
            integrator,
            discrete: take(&mut table, "discrete")?.unwrap_or_default(),
            monitors: take(&mut table, "monitors")?.unwrap_or_else(|| MonitorName::ALL.to_vec()),
            output_dir: take(&mut table, "output_dir")?.unwrap_or_else(|| PathBuf::from("fbf-out")),
            seed: take(&mut table, "seed")?.unwrap_or(0),
            x0: take(&mut table, "x0")?,
            probes: take(&mut table, "probes")?,
        };
        Ok(config)
    }

    /// Builds the problem and schedule and checks every cross-field invariant.
    pub fn prepare(self) -> Result<Prepared> {
        let problem = self
            .problem
            .build()
            .map_err(|e| anyhow!("invalid `problem`: {e}"))?;
        let beta = problem.beta();
        let schedule = StepSchedule::from_spec(self.schedule.clone(), beta)
            .map_err(|e| anyhow!("invalid `schedule` (problem beta = {beta}): {e}"))?;
        self.integrator
            .validate()
            .map_err(|e| anyhow!("invalid `integrator`: {e}"))?;
        if self.discrete.max_iter == 0 {
            bail!("invalid `discrete.max_iter`: must be at least 1");
        }
        if self.discrete.tol.is_nan() || self.discrete.tol < 0.0 {
            bail!("invalid `discrete.tol`: must be nonnegative");
        }
        let n = problem.dim();
        let x0 = match &self.x0 {
            Some(v) if v.len() != n => {
                bail!("invalid `x0`: length {} but the problem has dimension {n}", v.len())
            }
            Some(v) => State::from_column_slice(v),
            None => State::from_element(n, 1.0),
        };
        if x0.iter().any(|v| !v.is_finite()) {
            bail!("invalid `x0`: entries must be finite");
        }
        if let Some(p) = self.probes.as_ref().and_then(|ps| ps.iter().find(|p| p.len() != n)) {
            bail!("invalid `probes`: a probe has length {} but the problem has dimension {n}", p.len());
        }
        Ok(Prepared {
            config: self,
            problem,
            schedule,
            x0,
        })
    }
}

pub fn load_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    text.parse::<toml::Table>()
        .with_context(|| format!("{} is not valid TOML", path.display()))
}

/// Replaces the numeric value at a dotted key such as `schedule.value`.
pub fn set_numeric(table: &mut toml::Table, key: &str, value: f64) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut current = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            let slot = current
                .get_mut(part)
                .ok_or_else(|| anyhow!("sweep parameter `{key}` is not set in the config"))?;
            *slot = match slot {
                toml::Value::Float(_) => toml::Value::Float(value),
                toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
                toml::Value::Integer(_) => {
                    bail!("sweep parameter `{key}` is an integer but {value} is not")
                }
                _ => bail!("sweep parameter `{key}` is not numeric"),
            };
            return Ok(());
        }
        current = match current.get_mut(part) {
            Some(toml::Value::Table(t)) => t,
            _ => bail!("sweep parameter `{key}`: `{part}` is not a table"),
        };
    }
    bail!("sweep parameter is empty")
}
