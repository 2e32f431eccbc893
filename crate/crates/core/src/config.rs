//! Experiment configuration (TOML) and the manifest written with each run.
//!
//! Relative paths in a config file are resolved against the file's
//! directory.

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::{format_clock, parse_clock, Duration, Time};
use crate::delay::DelayParams;
use crate::error::{Error, Result};
use crate::gtfs::{GtfsSource, ServiceDay, DEFAULT_COMPONENT_BOUND, DEFAULT_LOOP_SECONDS, DEFAULT_WALK_SPEED};
use crate::report::DEFAULT_PENALTY_MINUTES;
use crate::sim::Strategy;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Midnight to 21:00.
pub const DEFAULT_DEPARTURES: [&str; 10] =
    ["00:00", "03:00", "06:00", "08:00", "10:00", "12:00", "14:00", "16:00", "18:00", "21:00"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub delays: DelaysConfig,
    pub queries: QueriesConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

/// Exactly one of `gtfs` and `cache` must be set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub gtfs: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    /// `busiest-weekday`, a weekday name, or `YYYY-MM-DD`.
    #[serde(default = "default_service")]
    pub service: String,
    #[serde(default = "default_loop")]
    pub loop_seconds: Duration,
    pub walk_radius_m: Option<f64>,
    #[serde(default = "default_walk_speed")]
    pub walk_speed: f64,
    #[serde(default = "default_component_bound")]
    pub component_bound: usize,
}

fn default_service() -> String {
    "busiest-weekday".into()
}
fn default_loop() -> Duration {
    DEFAULT_LOOP_SECONDS
}
fn default_walk_speed() -> f64 {
    DEFAULT_WALK_SPEED
}
fn default_component_bound() -> usize {
    DEFAULT_COMPONENT_BOUND
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaysConfig {
    /// Required even when `feed` is given, so every run names its seed.
    pub seed: u64,
    /// A feed written by `sample-delays`; sampled from `params` otherwise.
    pub feed: Option<PathBuf>,
    #[serde(default)]
    pub params: DelayParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueriesConfig {
    pub pairs: usize,
    #[serde(default = "default_departures")]
    pub departure_times: Vec<String>,
    /// Defaults to the delay seed.
    pub seed: Option<u64>,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_departures() -> Vec<String> {
    DEFAULT_DEPARTURES.iter().map(|s| s.to_string()).collect()
}
fn default_attempts() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub strategies: Vec<String>,
    pub workers: usize,
    pub penalty_minutes: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            strategies: Strategy::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            workers: 1,
            penalty_minutes: DEFAULT_PENALTY_MINUTES,
        }
    }
}

pub fn parse_service_day(s: &str) -> Result<ServiceDay> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("busiest-weekday") {
        return Ok(ServiceDay::BusiestWeekday);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(ServiceDay::Date(d));
    }
    s.parse::<Weekday>()
        .map(ServiceDay::Weekday)
        .map_err(|_| Error::Config(format!("service `{s}`: expected busiest-weekday, a weekday or YYYY-MM-DD")))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config and resolves its paths against the file's directory.
    pub fn load(path: &Path) -> Result<(ExperimentConfig, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = ExperimentConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset.gtfs, &mut cfg.dataset.cache, &mut cfg.delays.feed].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok((cfg, text))
    }

    pub fn check(&self) -> Result<()> {
        if self.dataset.gtfs.is_some() == self.dataset.cache.is_some() {
            return Err(Error::Config("dataset: set exactly one of `gtfs` and `cache`".into()));
        }
        parse_service_day(&self.dataset.service)?;
        if self.queries.pairs == 0 {
            return Err(Error::Config("queries.pairs must be at least 1".into()));
        }
        self.departure_times()?;
        if self.strategies()?.is_empty() {
            return Err(Error::Config("simulation.strategies is empty".into()));
        }
        self.delays.params.check().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn departure_times(&self) -> Result<Vec<Time>> {
        if self.queries.departure_times.is_empty() {
            return Err(Error::Config("queries.departure_times is empty".into()));
        }
        self.queries
            .departure_times
            .iter()
            .map(|s| parse_clock(s).ok_or_else(|| Error::Config(format!("bad departure time `{s}`"))))
            .collect()
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        let mut out: Vec<Strategy> = Vec::new();
        for s in &self.simulation.strategies {
            let s: Strategy = s.parse()?;
            if !out.contains(&s) {
                out.push(s);
            }
        }
        Ok(out)
    }

    pub fn query_seed(&self) -> u64 {
        self.queries.seed.unwrap_or(self.delays.seed)
    }

    pub fn gtfs_source(&self) -> Option<GtfsSource> {
        let dir = self.dataset.gtfs.clone()?;
        Some(GtfsSource {
            service: parse_service_day(&self.dataset.service).ok()?,
            loop_seconds: self.dataset.loop_seconds,
            walk_radius_m: self.dataset.walk_radius_m,
            walk_speed: self.dataset.walk_speed,
            component_bound: self.dataset.component_bound,
            ..GtfsSource::new(dir)
        })
    }
}

/// Identifies a run: equal config hash and seed give identical outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_sha256: String,
    pub dataset_fingerprint: String,
    pub seed: u64,
    pub query_seed: u64,
    pub stops: usize,
    pub connections: usize,
    pub trips: usize,
    pub footpaths: usize,
    pub queries: usize,
    pub strategies: Vec<Strategy>,
    pub departure_times: Vec<String>,
    pub penalty_minutes: u32,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn departure_labels(times: &[Time]) -> Vec<String> {
    times.iter().map(|&t| format_clock(t)).collect()
}
