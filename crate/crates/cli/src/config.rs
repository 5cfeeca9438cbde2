//! Run configuration: a scenario plus sweep axes.
//!
//! The file is TOML. Every key except `sweep` belongs to the scenario; each
//! `[[sweep]]` table names a dotted scenario key and the values it takes.
//! Points are the cross product of the axes in declaration order, the first
//! axis varying slowest.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use snpd_core::sim::scenario::derive_seed;
use snpd_core::sim::ScenarioConfig;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted scenario key, e.g. `adversary.ratio` or `params.range`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
}

/// One resolved sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    /// `(parameter, value)` per axis, in axis order.
    pub overrides: Vec<(String, toml::Value)>,
    /// Scenario with overrides applied and the per-point seed.
    pub config: ScenarioConfig,
}

impl SweepPoint {
    /// `parameter=value` pairs joined by `;`.
    pub fn label(&self) -> String {
        self.overrides
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
        let sweep: Vec<SweepAxis> = match table.remove("sweep") {
            Some(v) => v.try_into().context("invalid [[sweep]] table")?,
            None => Vec::new(),
        };
        let scenario: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .context("invalid scenario")?;
        let config = Self { scenario, sweep };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        let value = toml::Value::try_from(self).expect("config serializes");
        toml::to_string(&value).expect("config serializes")
    }

    /// Checks the scenario and that every axis value applies cleanly.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        for axis in &self.sweep {
            ensure!(
                !axis.values.is_empty(),
                "sweep over {} has no values",
                axis.parameter
            );
            for v in &axis.values {
                apply(&self.scenario, &[(axis.parameter.clone(), v.clone())])
                    .with_context(|| format!("sweep {} = {v}", axis.parameter))?;
            }
        }
        Ok(())
    }

    /// All sweep points. An empty sweep gives one point.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let mut combos: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
        for axis in &self.sweep {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |v| {
                        let mut next = prefix.clone();
                        next.push((axis.parameter.clone(), v.clone()));
                        next
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .enumerate()
            .map(|(index, overrides)| {
                let mut config = apply(&self.scenario, &overrides)?;
                config.seed = derive_seed(config.seed, index as u64);
                Ok(SweepPoint {
                    index,
                    overrides,
                    config,
                })
            })
            .collect()
    }
}

/// Scenario with dotted-key overrides applied, revalidated.
pub fn apply(base: &ScenarioConfig, overrides: &[(String, toml::Value)]) -> Result<ScenarioConfig> {
    let mut value = toml::Value::try_from(base).context("serializing scenario")?;
    for (path, v) in overrides {
        set_path(&mut value, path, v.clone())?;
    }
    let config: ScenarioConfig = value.try_into()?;
    config.validate()?;
    Ok(config)
}

fn set_path(root: &mut toml::Value, path: &str, v: toml::Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields one key");
    let mut node = root;
    for key in parents {
        node = match node.get_mut(*key) {
            Some(child @ toml::Value::Table(_)) => child,
            _ => bail!("unknown parameter {path}"),
        };
    }
    let toml::Value::Table(table) = node else {
        bail!("unknown parameter {path}");
    };
    // Keys of unset optional fields are absent; the typed reparse rejects typos.
    let v = match (table.get(*last), v) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert(last.to_string(), v);
    Ok(())
}
