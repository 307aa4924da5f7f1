//! Run manifests and the stage-sectioned configuration file.
//!
//! Configuration files are TOML. Each top-level table is named after a
//! subcommand (`coarsen`, `fom`, `train`, `rom`, ...) and maps long flag
//! names to values:
//!
//! ```toml
//! [train]
//! epochs = 500
//! lr = 1e-3
//! widths = [1, 8, 16]
//! ```
//!
//! Arrays become comma-separated values, `true` becomes a bare flag and
//! `false` drops it. Flags given on the command line win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binio::{read_all, write_atomic};
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name, enough to replay the run.
    pub args: Vec<String>,
    pub seed: Option<u64>,
    /// Effective settings, stringified.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
    /// Path -> sha256 of every file read.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    /// Path -> sha256 of every file written.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    pub hierarchy_hash: Option<String>,
    pub model_hash: Option<String>,
    #[serde(default)]
    pub metrics: Vec<MetricRecord>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            args,
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_hash(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), file_hash(path)?);
        Ok(())
    }

    /// `<output>.manifest.toml` next to the main output.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.toml");
        output.with_file_name(name)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_toml()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.as_ref().display())))
    }
}

pub fn file_hash(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    h.update(read_all(path)?);
    Ok(crate::mesh::hex_digest(h))
}

/// Parsed configuration file: section -> flag -> value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageConfig {
    sections: BTreeMap<String, toml::Table>,
}

impl StageConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut sections = BTreeMap::new();
        for (name, v) in table {
            match v {
                toml::Value::Table(t) => {
                    sections.insert(name, t);
                }
                _ => return Err(Error::Config(format!("top-level key `{name}` must be a [section]"))),
            }
        }
        Ok(Self { sections })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path.as_ref())?)
    }

    /// Entries of a section (or nested section, e.g. `["fom", "burgers"]`)
    /// as `--flag value` arguments. Nested tables are skipped.
    pub fn args_for(&self, path: &[&str]) -> Result<Vec<String>> {
        let Some((first, rest)) = path.split_first() else {
            return Ok(Vec::new());
        };
        let mut t = match self.sections.get(*first) {
            Some(t) => t,
            None => return Ok(Vec::new()),
        };
        for name in rest {
            match t.get(*name) {
                Some(toml::Value::Table(sub)) => t = sub,
                _ => return Ok(Vec::new()),
            }
        }
        let mut out = Vec::new();
        for (key, v) in t {
            let flag = format!("--{key}");
            match v {
                toml::Value::Table(_) => {}
                toml::Value::Boolean(true) => out.push(flag),
                toml::Value::Boolean(false) => {}
                toml::Value::Array(items) => {
                    let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
                    out.push(flag);
                    out.push(parts.join(","));
                }
                other => {
                    out.push(flag);
                    out.push(scalar(other)?);
                }
            }
        }
        Ok(out)
    }
}

fn scalar(v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(format!("{f:?}")),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(Error::Config(format!("unsupported config value {other}"))),
    }
}
