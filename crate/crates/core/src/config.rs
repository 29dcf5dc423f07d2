//! Run configuration: a TOML file, dotted-path overrides and flag overrides.
//!
//! Resolution order, later wins:
//!
//! 1. built-in defaults ([`RunConfig::default`]);
//! 2. the config file;
//! 3. `--set a.b=value` overrides, in command-line order;
//! 4. the dedicated flags `--seed`, `--horizon` and `--out`.
//!
//! Tables that carry a `kind` tag (`workload`, `service`, `startup`) are
//! replaced rather than merged when the tag changes, so
//! `--set workload.kind=trace --set workload.path=t.csv` switches the
//! arrival process cleanly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::sim::{ControlConfig, Distribution, SimConfig};
use crate::workload::WorkloadDescriptor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write `samples_smoothed.csv` next to `samples.csv`.
    pub smoothed: bool,
    /// Window of the sample-based moving average.
    pub window: usize,
    /// Write `actions.log`.
    pub actions: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            smoothed: true,
            window: 10,
            actions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub horizon: f64,
    pub workload: WorkloadDescriptor,
    pub service: Distribution,
    pub startup: Distribution,
    pub control: ControlConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            seed: sim.seed,
            horizon: sim.horizon,
            workload: sim.workload,
            service: sim.service,
            startup: sim.startup,
            control: sim.control,
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            horizon: self.horizon,
            workload: self.workload.clone(),
            service: self.service,
            startup: self.startup,
            control: self.control.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim().validate().map_err(|e| match e {
            Error::InvalidInput(msg) => Error::Config(msg),
            other => other,
        })?;
        if self.output.window == 0 {
            return Err(Error::config("output.window must be >= 1"));
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serialises the fully resolved configuration; parsing the result
    /// yields an equal `RunConfig`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialise config: {e}")))
    }

    /// Applies `key=value` overrides in order. Values use TOML syntax; a
    /// value that is not valid TOML is taken as a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let parsed = overrides
            .iter()
            .map(|o| parse_override(o.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.with_values(parsed.iter().map(|(k, v)| (k.as_str(), v.clone())))
    }

    pub fn with_values<'k>(&self, values: impl IntoIterator<Item = (&'k str, Value)>) -> Result<Self> {
        let mut tree = Value::try_from(self)
            .map_err(|e| Error::config(format!("cannot serialise config: {e}")))?;
        for (key, value) in values {
            set_path(&mut tree, key, value)?;
        }
        tree.try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("override: {}", e.message())))
    }
}

pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {raw:?} is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(format!("override {raw:?} has an empty key")));
    }
    Ok((key.to_owned(), parse_value(value.trim())))
}

fn parse_value(raw: &str) -> Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: Value,
    }
    toml::from_str::<Wrap>(&format!("v = {raw}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| Value::String(raw.to_owned()))
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut node = tree;
    for part in parts {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override {key}: {part} is not a table")))?;
        node = table
            .entry(part.to_owned())
            .or_insert_with(|| Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::config(format!("override {key}: parent is not a table")))?;
    if leaf == "kind" && table.get("kind") != Some(&value) {
        table.clear();
    }
    // Integer-valued overrides of float fields (`--set horizon=100`) are
    // widened so they deserialise.
    let value = match (table.get(leaf), value) {
        (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert(leaf.to_owned(), value);
    Ok(())
}
