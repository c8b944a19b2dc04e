//! Optional TOML settings for the command line. Any flag given on the
//! command line takes precedence over the same key here.

use std::fs;
use std::path::{Path, PathBuf};

use drcr_core::fit::{Radius, Schedule};
use drcr_core::synth::CovariateDist;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Config {
    pub delta: Option<f64>,
    pub schedule: Option<String>,
    pub gamma: Option<f64>,
    pub multiplier: Option<f64>,
    pub grad_cap: Option<f64>,
    pub n: Option<Vec<usize>>,
    pub d: Option<usize>,
    pub dist: Option<String>,
    pub sigma: Option<f64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub response: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub train_rows: Option<usize>,
    pub no_log: Option<bool>,
    pub raw_response: Option<bool>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

pub fn parse_dist(s: &str) -> Result<CovariateDist> {
    match s.trim().to_ascii_lowercase().as_str() {
        "gaussian" | "normal" => Ok(CovariateDist::Gaussian),
        "t10" | "t" | "student" => Ok(CovariateDist::StudentT10),
        other => Err(Error::invalid(format!("unknown distribution `{other}` (gaussian or t10)"))),
    }
}

/// Radius from `--schedule`, `--delta`, `--gamma` and `--multiplier`. A bare
/// `--delta` means the fixed schedule; nothing at all means experimental.
pub fn resolve_radius(
    schedule: Option<&str>,
    delta: Option<f64>,
    gamma: Option<f64>,
    multiplier: Option<f64>,
) -> Result<Radius> {
    let kind = match schedule.map(|s| s.trim().to_ascii_lowercase()) {
        None if delta.is_some() => "fixed".to_owned(),
        None => "experimental".to_owned(),
        Some(s) => s,
    };
    let scheduled = |kind| -> Result<Radius> {
        if delta.is_some() {
            return Err(Error::invalid("--delta only goes with --schedule fixed"));
        }
        Ok(Radius::Schedule {
            kind,
            gamma,
            multiplier: multiplier.unwrap_or(1.0),
        })
    };
    match kind.as_str() {
        "fixed" => match delta {
            Some(v) if v >= 0.0 && v.is_finite() => Ok(Radius::Explicit(v)),
            Some(v) => Err(Error::invalid(format!("delta must be finite and >= 0, got {v}"))),
            None => Err(Error::invalid("--schedule fixed needs --delta")),
        },
        "experimental" => scheduled(Schedule::Experimental),
        "theoretical" => {
            if !gamma.is_some_and(|g| g > 0.0 && g.is_finite()) {
                return Err(Error::invalid("--schedule theoretical needs a positive --gamma"));
            }
            scheduled(Schedule::Theoretical)
        }
        other => Err(Error::invalid(format!(
            "unknown schedule `{other}` (experimental, theoretical or fixed)"
        ))),
    }
}
