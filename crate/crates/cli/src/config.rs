//! Run configuration: TOML file keys merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use qmet_core::fisher::DiffSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MAX_GRID_POINTS: usize = 100_000;

/// `count` evenly spaced points from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self, CliError> {
        if !start.is_finite() || !stop.is_finite() {
            return Err(CliError::Config(format!("grid bounds must be finite, got {start}:{stop}")));
        }
        if count == 0 {
            return Err(CliError::Config("grid is empty (count = 0)".into()));
        }
        if count > MAX_GRID_POINTS {
            return Err(CliError::Config(format!("grid count {count} exceeds {MAX_GRID_POINTS}")));
        }
        Ok(Self { start, stop, count })
    }

    /// Parses `START:STOP:N`, or a single value as a one-point grid.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("grid '{text}' is not START:STOP:N or a number"));
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() == 1 {
            let x = parts[0].trim().parse().map_err(|_| bad())?;
            return Self::new(x, x, 1);
        }
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].trim().parse().map_err(|_| bad())?;
        let stop = parts[1].trim().parse().map_err(|_| bad())?;
        let count = parts[2].trim().parse().map_err(|_| bad())?;
        Self::new(start, stop, count)
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.start + step * k as f64).collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridKey {
    Point(f64),
    Text(String),
    Table { start: f64, stop: f64, count: usize },
}

impl GridKey {
    fn resolve(self) -> Result<Grid, CliError> {
        match self {
            GridKey::Point(x) => Grid::new(x, x, 1),
            GridKey::Text(s) => Grid::parse(&s),
            GridKey::Table { start, stop, count } => Grid::new(start, stop, count),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(u32),
    Many(Vec<u32>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<u32> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TauKey {
    Value(f64),
    Mode(String),
}

/// How the phase read-out picks its base time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TauChoice {
    /// Maximize the realistic read-out Fisher information.
    Tune,
    /// `0.9 * 2 pi / spread` at each working point.
    Default,
    Fixed(f64),
}

impl TauChoice {
    fn parse(text: &str) -> Result<Self, CliError> {
        match text.trim() {
            "tune" => Ok(Self::Tune),
            "default" => Ok(Self::Default),
            other => other
                .parse::<f64>()
                .map(Self::Fixed)
                .map_err(|_| CliError::Config(format!("tau '{other}' is not a number, 'tune' or 'default'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CliError::Config(format!("unknown format '{other}' (csv or json)"))),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    theta: Option<GridKey>,
    t: Option<GridKey>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffSection {
    method: Option<String>,
    step: Option<f64>,
    levels: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseSection {
    n: Option<OneOrMany>,
    m: Option<OneOrMany>,
    tau: Option<TauKey>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerSection {
    restarts: Option<usize>,
    iterations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    path: Option<String>,
    format: Option<String>,
}

/// Keys accepted in the configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    seed: Option<u64>,
    prep: Option<usize>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    diff: DiffSection,
    #[serde(default)]
    phase: PhaseSection,
    #[serde(default)]
    optimizer: OptimizerSection,
    #[serde(default)]
    output: OutputSection,
}

/// Command-line overrides; each mirrors a file key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<String>,
    pub model: Option<String>,
    pub theta: Option<String>,
    pub t: Option<String>,
    pub n: Option<String>,
    pub m: Option<String>,
    pub tau: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub format: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffConfig {
    pub method: String,
    pub step: Option<f64>,
    pub levels: usize,
}

impl DiffConfig {
    pub fn spec(&self) -> DiffSpec {
        match self.method.as_str() {
            "central" => DiffSpec::central(self.step),
            _ => DiffSpec::richardson(self.step, self.levels),
        }
    }
}

/// Fully resolved configuration. Everything except the output path feeds
/// the config hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub prep: usize,
    pub theta: Option<Grid>,
    pub t: Option<Grid>,
    pub diff: DiffConfig,
    pub n: Vec<u32>,
    pub m: Vec<u32>,
    pub tau: TauChoice,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<String>,
}

fn parse_list(text: &str, what: &str) -> Result<Vec<u32>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| CliError::Config(format!("--{what} expects integers, got '{text}'")))
        })
        .collect()
}

impl RunConfig {
    pub fn load(command: &str, flags: &Overrides) -> Result<Self, CliError> {
        let text = match &flags.config {
            Some(path) => std::fs::read_to_string(Path::new(path))
                .map_err(|e| CliError::Config(format!("cannot read config '{path}': {e}")))?,
            None => String::new(),
        };
        Self::from_toml(command, &text, flags).map_err(|e| match (&flags.config, e) {
            (Some(path), CliError::Config(msg)) if msg.starts_with("invalid config") => {
                CliError::Config(msg.replacen("invalid config", &format!("invalid config '{path}'"), 1))
            }
            (_, e) => e,
        })
    }

    pub fn from_toml(command: &str, text: &str, flags: &Overrides) -> Result<Self, CliError> {
        let file = toml::from_str::<FileConfig>(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        Self::merge(command, file, flags)
    }

    fn merge(command: &str, file: FileConfig, flags: &Overrides) -> Result<Self, CliError> {
        let theta = match &flags.theta {
            Some(s) => Some(Grid::parse(s)?),
            None => file.grid.theta.map(GridKey::resolve).transpose()?,
        };
        let t = match &flags.t {
            Some(s) => Some(Grid::parse(s)?),
            None => file.grid.t.map(GridKey::resolve).transpose()?,
        };
        let method = file.diff.method.unwrap_or_else(|| "richardson".into());
        if method != "richardson" && method != "central" {
            return Err(CliError::Config(format!("unknown diff method '{method}' (richardson or central)")));
        }
        if let Some(step) = file.diff.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(CliError::Config(format!("diff step {step} must be positive")));
            }
        }
        let n = match &flags.n {
            Some(s) => parse_list(s, "n")?,
            None => file.phase.n.map(OneOrMany::into_vec).unwrap_or_else(|| vec![6]),
        };
        let m = match &flags.m {
            Some(s) => parse_list(s, "m")?,
            None => file.phase.m.map(OneOrMany::into_vec).unwrap_or_else(|| vec![3]),
        };
        if n.is_empty() || m.is_empty() {
            return Err(CliError::Config("n and m lists must not be empty".into()));
        }
        let tau = match (&flags.tau, file.phase.tau) {
            (Some(s), _) => TauChoice::parse(s)?,
            (None, Some(TauKey::Value(v))) => TauChoice::Fixed(v),
            (None, Some(TauKey::Mode(s))) => TauChoice::parse(&s)?,
            (None, None) => TauChoice::Tune,
        };
        if let TauChoice::Fixed(v) = tau {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tau {v} must be positive")));
            }
        }
        let default_format = if command == "optimize" { "json" } else { "csv" };
        let format = Format::parse(
            flags
                .format
                .as_deref()
                .or(file.output.format.as_deref())
                .unwrap_or(default_format),
        )?;
        let restarts = file.optimizer.restarts.unwrap_or(8);
        let iterations = file.optimizer.iterations.unwrap_or(400);
        if restarts == 0 || iterations == 0 {
            return Err(CliError::Config("optimizer restarts and iterations must be positive".into()));
        }
        Ok(Self {
            command: command.to_string(),
            model: flags
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| "qubit_direction".into()),
            params: file.params,
            prep: file.prep.unwrap_or(0),
            theta,
            t,
            diff: DiffConfig {
                method,
                step: file.diff.step,
                levels: file.diff.levels.unwrap_or(2),
            },
            n,
            m,
            tau,
            restarts,
            iterations,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            format,
            out: flags.out.clone().or(file.output.path),
        })
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn theta_grid(&self) -> Result<Vec<f64>, CliError> {
        self.theta
            .map(|g| g.points())
            .ok_or_else(|| CliError::Config("missing theta grid (--theta START:STOP:N or [grid] theta)".into()))
    }

    pub fn t_grid(&self) -> Result<Vec<f64>, CliError> {
        self.t
            .map(|g| g.points())
            .ok_or_else(|| CliError::Config("missing t grid (--t START:STOP:N or [grid] t)".into()))
    }

    /// SHA-256 of the resolved configuration, as lowercase hex.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}
