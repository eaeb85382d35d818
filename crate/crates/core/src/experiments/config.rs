//! Experiment configuration files.
//!
//! Configs are TOML key/value files. Every key is optional: the effective
//! configuration is the built-in default, overlaid with the file, overlaid
//! with `key=value` overrides (values parsed as TOML, dotted keys reach into
//! tables, e.g. `gd.iterations=200`). Keys left at their default are listed
//! in the run report.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::pipeline::{GdTemplate, Problem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub problem: Problem,
    pub n: usize,
    pub m: usize,
    pub m_val: usize,
    pub r_star: usize,
    pub sigma2: f64,
    pub seed: u64,
    /// Phase quantities every this many recorded iterations; 0 disables.
    pub phase_every: usize,
    /// Largest allowed |index(t̂) − index(t̃)| in recorded iterations.
    pub valley_window: usize,
    pub gd: GdTemplate,
}

impl DemoConfig {
    /// `n = 50`, `r = n`, `r* = 5`, `m = 1000` split 900/100, `σ = 0.3`.
    pub fn standard(problem: Problem) -> Self {
        Self {
            problem,
            n: 50,
            m: 1000,
            m_val: 100,
            r_star: 5,
            sigma2: match problem {
                Problem::Sensing => 0.09,
                Problem::Completion => 1e-4,
            },
            seed: super::STANDARD_SEED,
            phase_every: 1,
            valley_window: 10,
            gd: GdTemplate::standard(problem),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub problem: Problem,
    pub n: usize,
    pub m: usize,
    pub m_val: usize,
    pub ranks: Vec<usize>,
    pub sigma2: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Threshold on every per-row and per-column Spearman correlation.
    pub min_spearman: f64,
    pub gd: GdTemplate,
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl GridConfig {
    /// Ranks 1..=20 and ten evenly spaced noise variances over
    /// `[0.1, 1]` (sensing) or `[1e-5, 1e-4]` (completion), 10 trials.
    pub fn standard(problem: Problem) -> Self {
        let sigma2 = match problem {
            Problem::Sensing => linspace(0.1, 1.0, 10),
            Problem::Completion => linspace(1e-5, 1e-4, 10),
        };
        Self {
            problem,
            n: 50,
            m: 1000,
            m_val: 100,
            ranks: (1..=20).collect(),
            sigma2,
            trials: 10,
            seed: super::STANDARD_SEED,
            min_spearman: 0.8,
            gd: GdTemplate::standard(problem),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() || self.sigma2.is_empty() || self.trials == 0 {
            return Err(Error::InvalidConfig(
                "grid needs at least one rank, one variance and one trial".into(),
            ));
        }
        if let Some(&r) = self.ranks.iter().find(|&&r| r == 0 || r > self.n) {
            return Err(Error::InvalidConfig(format!("rank {r} outside 1..={}", self.n)));
        }
        if let Some(&s) = self.sigma2.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!("invalid noise variance {s}")));
        }
        if self.m_val == 0 || self.m_val >= self.m {
            return Err(Error::InvalidSplit {
                m: self.m,
                m_val: self.m_val,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Sigma2,
    RStar,
    M,
}

impl Axis {
    /// Exponent of the statistical error `σ² n r* / m` in this quantity.
    pub fn expected_slope(self) -> f64 {
        match self {
            Axis::Sigma2 | Axis::RStar => 1.0,
            Axis::M => -1.0,
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            Axis::Sigma2 => 0.3,
            Axis::RStar | Axis::M => 0.4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Sigma2 => "sigma2",
            Axis::RStar => "r_star",
            Axis::M => "m",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub problem: Problem,
    pub n: usize,
    /// Used unless the swept axis is `m`.
    pub m: usize,
    /// Held-out fraction; `m_val = round(val_fraction · m)`.
    pub val_fraction: f64,
    pub r_star: usize,
    pub sigma2: f64,
    pub trials: usize,
    pub seed: u64,
    pub expected_slope: f64,
    pub tolerance: f64,
    pub gd: GdTemplate,
}

impl ScalingConfig {
    /// σ² ∈ {0.1, 0.2, 0.4, 0.8} at r* = 5; r* ∈ {2, 4, 8, 16} at σ² = 0.25;
    /// m ∈ {500, 1000, 2000, 4000} at r* = 5, σ² = 0.25. Ten trials each.
    pub fn standard(axis: Axis) -> Self {
        let values = match axis {
            Axis::Sigma2 => vec![0.1, 0.2, 0.4, 0.8],
            Axis::RStar => vec![2.0, 4.0, 8.0, 16.0],
            Axis::M => vec![500.0, 1000.0, 2000.0, 4000.0],
        };
        Self {
            axis,
            values,
            problem: Problem::Sensing,
            n: 50,
            m: 1000,
            val_fraction: 0.1,
            r_star: 5,
            sigma2: 0.25,
            trials: 10,
            seed: super::STANDARD_SEED,
            expected_slope: axis.expected_slope(),
            tolerance: axis.default_tolerance(),
            gd: GdTemplate::standard(Problem::Sensing),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RipConfig {
    pub problem: Problem,
    pub n: usize,
    pub m: usize,
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Write the probed operator here (relative to the run directory).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_operator: Option<String>,
    /// Probe an operator file instead of drawing one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_operator: Option<String>,
}

impl RipConfig {
    pub fn standard(problem: Problem) -> Self {
        Self {
            problem,
            n: 50,
            m: 1000,
            ranks: vec![1, 2, 5, 10],
            trials: 500,
            seed: super::STANDARD_SEED,
            save_operator: None,
            load_operator: None,
        }
    }
}

/// A fully resolved config and the top-level keys that kept their default.
#[derive(Clone, Debug)]
pub struct Resolved<T> {
    pub config: T,
    pub defaults_used: Vec<String>,
}

/// Parses `key=value` into a one-entry table; dotted keys nest.
pub fn parse_override(spec: &str) -> Result<Table> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        // bare words such as `sensing` are taken as strings
        Err(_) => Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::InvalidConfig(format!("override `{spec}` has an empty key")))?;
    let mut table = Table::new();
    table.insert(last.to_string(), value);
    for p in parts.into_iter().rev() {
        let mut outer = Table::new();
        outer.insert(p.to_string(), Value::Table(table));
        table = outer;
    }
    Ok(table)
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// The user-supplied layers (file, then overrides) merged into one table.
pub fn user_layers(file: Option<&Path>, overrides: &[String]) -> Result<Table> {
    let mut user = match file {
        Some(p) => std::fs::read_to_string(p)?.parse::<Table>()?,
        None => Table::new(),
    };
    for o in overrides {
        merge(&mut user, parse_override(o)?);
    }
    Ok(user)
}

/// Overlays `user` on `defaults` and deserializes the result.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, user: Table) -> Result<Resolved<T>> {
    let mut base =
        Table::try_from(defaults).map_err(|e| Error::InvalidConfig(format!("cannot serialize defaults: {e}")))?;
    let defaults_used = base.keys().filter(|k| !user.contains_key(*k)).cloned().collect();
    merge(&mut base, user);
    let config = Value::Table(base)
        .try_into()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
    Ok(Resolved { config, defaults_used })
}

/// Reads a string field such as `problem` or `axis` from the user layers.
pub fn peek<T: DeserializeOwned>(user: &Table, key: &str) -> Result<Option<T>> {
    user.get(key)
        .cloned()
        .map(|v| {
            v.try_into()
                .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("{key}: {e}")))
        })
        .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_parse() {
        let t = parse_override("gd.iterations=200").unwrap();
        assert_eq!(t["gd"]["iterations"].as_integer(), Some(200));
        let t = parse_override("problem=completion").unwrap();
        assert_eq!(t["problem"].as_str(), Some("completion"));
        let t = parse_override("ranks=[1, 5]").unwrap();
        assert_eq!(t["ranks"].as_array().unwrap().len(), 2);
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn resolve_layers_and_track_defaults() {
        let user = user_layers(None, &["n=20".into(), "gd.alpha=0.001".into()]).unwrap();
        let r = resolve(&DemoConfig::standard(Problem::Sensing), user).unwrap();
        assert_eq!(r.config.n, 20);
        assert_eq!(r.config.gd.alpha, 1e-3);
        assert_eq!(r.config.gd.iterations, 500);
        assert!(r.defaults_used.contains(&"m".to_string()));
        assert!(!r.defaults_used.contains(&"n".to_string()));
    }

    #[test]
    fn unknown_keys_rejected() {
        let user = user_layers(None, &["bogus=1".into()]).unwrap();
        assert!(resolve(&GridConfig::standard(Problem::Sensing), user).is_err());
    }

    #[test]
    fn standard_grid_defaults() {
        let g = GridConfig::standard(Problem::Sensing);
        assert_eq!(g.ranks.len(), 20);
        assert_eq!(g.sigma2.len(), 10);
        assert!((g.sigma2[9] - 1.0).abs() < 1e-15);
        let c = GridConfig::standard(Problem::Completion);
        assert_eq!(c.gd.alpha, 1e-3);
        assert!((c.sigma2[0] - 1e-5).abs() < 1e-20);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = ScalingConfig::standard(Axis::M);
        let text = toml::to_string(&c).unwrap();
        let back: ScalingConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
    }
}
