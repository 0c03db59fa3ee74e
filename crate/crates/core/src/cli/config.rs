//! Experiment configuration files.
//!
//! A config is one JSON object. Every key is optional at parse time; each
//! subcommand resolves the keys it needs and rejects missing ones. Unknown
//! keys are errors. Output files embed the resolved config, and any of them
//! (`.json` report, `.csv` series) can be passed back as `--config`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::Process;
use crate::ensembles::{DiffLawSpec, MeasureSpec};
use crate::error::{invalid, Error, Result};
use crate::lattice::TorusLattice;
use crate::metrics::Engine;

/// Prefix of the first line of every CSV output.
pub const CSV_CONFIG_PREFIX: &str = "# config=";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SideRepr", into = "SideRepr")]
pub enum Side {
    /// Light-cone rule for the largest time.
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SideRepr {
    Fixed(usize),
    Named(String),
}

impl TryFrom<SideRepr> for Side {
    type Error = String;

    fn try_from(r: SideRepr) -> std::result::Result<Self, String> {
        match r {
            SideRepr::Fixed(n) => Ok(Side::Fixed(n)),
            SideRepr::Named(s) if s == "auto" => Ok(Side::Auto),
            SideRepr::Named(s) => Err(format!("side must be an integer or \"auto\", got {s:?}")),
        }
    }
}

impl From<Side> for SideRepr {
    fn from(s: Side) -> Self {
        match s {
            Side::Auto => SideRepr::Named("auto".into()),
            Side::Fixed(n) => SideRepr::Fixed(n),
        }
    }
}

/// Observation times: an explicit list or `t0 · 2^k` for `k < count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Dyadic(Dyadic),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dyadic {
    pub t0: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let times = match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Dyadic(Dyadic { t0, count }) => {
                if !(*t0 > 0.0) || *count == 0 || *count > 60 {
                    return Err(invalid!("dyadic grid needs t0 > 0 and 1 ≤ count ≤ 60"));
                }
                (0..*count).map(|k| t0 * 2f64.powi(k as i32)).collect()
            }
        };
        crate::metrics::check_grid(&times)?;
        Ok(times)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    /// Light-cone tolerance, needed when `side` is `"auto"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<Process>,
    /// Override of the annihilation rate in the validate suite's generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annihilation_rate: Option<f64>,
    /// Never embedded in outputs: it does not affect results.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Read a config file, or the config embedded in an earlier output.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        if let Some(first) = text.lines().next() {
            if let Some(rest) = first.strip_prefix(CSV_CONFIG_PREFIX) {
                return Self::from_json(rest);
            }
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        let embedded = value.get("config_hash").is_some();
        match value.get("config") {
            Some(inner) if embedded => {
                serde_json::from_value(inner.clone()).map_err(|e| Error::Parse(format!("embedded config: {e}")))
            }
            _ => serde_json::from_value(value).map_err(|e| Error::Parse(format!("config: {e}"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn dimension_or(&self, default: usize) -> usize {
        self.dimension.unwrap_or(default)
    }

    fn require<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
        v.clone().ok_or_else(|| invalid!("config is missing `{key}`"))
    }

    /// Lattice for a run up to `horizon`; `"auto"` needs `epsilon`.
    pub fn lattice(&self, horizon: f64, default_side: Option<usize>) -> Result<(TorusLattice, Side)> {
        let d = self.dimension_or(1);
        let side = match (self.side, default_side) {
            (Some(s), _) => s,
            (None, Some(n)) => Side::Fixed(n),
            (None, None) => return Err(invalid!("config is missing `side`")),
        };
        let n = match side {
            Side::Fixed(n) => n,
            Side::Auto => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| invalid!("side \"auto\" needs `epsilon`"))?;
                TorusLattice::light_cone_side(horizon, eps)?
            }
        };
        Ok((TorusLattice::new(d, n)?, side))
    }

    pub fn diff_law(&self) -> Result<DiffLawSpec> {
        let mu = Self::require(&self.measure, "measure")?;
        match self.rho {
            Some(rho) => DiffLawSpec::new(mu, rho),
            None => DiffLawSpec::matched(mu),
        }
    }

    pub fn times_or(&self, default: &[f64]) -> Result<Vec<f64>> {
        match &self.times {
            Some(g) => g.resolve(),
            None if !default.is_empty() => Ok(default.to_vec()),
            None => Err(invalid!("config is missing `times`")),
        }
    }
}
