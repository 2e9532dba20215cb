//! Flat key-value run configuration.
//!
//! A TOML file is flattened to dotted keys (`[em] seed = 3` becomes `em.seed`)
//! and `--set key=value` overrides are applied on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;

const KNOWN_KEYS: &[&str] = &[
    "data",
    "bars",
    "fit",
    "schedule",
    "mixture",
    "contract_file",
    "out",
    "dot_dir",
    "session.start",
    "session.end",
    "session.interval_minutes",
    "session.max_missing_frac",
    "scale",
    "window",
    "components",
    "em.max_iter",
    "em.tol",
    "em.restarts",
    "em.seed",
    "em.var_floor",
    "tree.k",
    "tree.root",
    "tree.t0",
    "tree.dt",
    "r",
    "contract.kind",
    "contract.strike",
    "contract.expiry",
    "contract.exercise",
    "bench.steps",
    "bench.trigeorgis",
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, toml::Value>,
    base_dir: Option<PathBuf>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses the right-hand side of `--set` as a TOML value, or as a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let table: toml::Table = toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            flatten("", &table, &mut cfg.values);
            cfg.base_dir = path.parent().map(Path::to_path_buf);
        }
        for item in overrides {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--set expects key=value, got '{item}'"))
            })?;
            cfg.values
                .insert(k.trim().to_string(), parse_value(v.trim()));
        }
        if let Some(bad) = cfg
            .values
            .keys()
            .find(|k| !KNOWN_KEYS.contains(&k.as_str()))
        {
            return Err(CliError::Config(format!("unknown config key '{bad}'")));
        }
        Ok(cfg)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn type_error(key: &str, want: &str, v: &toml::Value) -> CliError {
        CliError::Config(format!("key '{key}' must be {want}, got {v}"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Float(f)) => Ok(*f),
            Some(toml::Value::Integer(i)) => Ok(*i as f64),
            Some(v) => Err(Self::type_error(key, "a number", v)),
        }
    }

    pub fn f64_required(&self, key: &str) -> Result<f64, CliError> {
        if !self.contains(key) {
            return Err(CliError::Config(format!("missing required key '{key}'")));
        }
        self.f64_or(key, 0.0)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(v) => Err(Self::type_error(key, "a non-negative integer", v)),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        self.u64_or(key, default as u64).map(|v| v as usize)
    }

    pub fn str_opt(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(Self::type_error(key, "a string", v)),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String, CliError> {
        Ok(self.str_opt(key)?.unwrap_or_else(|| default.to_string()))
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) if *i > 0 => Ok(*i as usize),
                    other => Err(Self::type_error(key, "a list of positive integers", other)),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(Self::type_error(key, "a list", v)),
        }
    }

    /// Paths from the config file resolve against the file's directory.
    pub fn path_opt(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        Ok(self.str_opt(key)?.map(|s| {
            let p = PathBuf::from(s);
            match &self.base_dir {
                Some(base) if p.is_relative() => base.join(p),
                _ => p,
            }
        }))
    }

    pub fn path_required(&self, key: &str) -> Result<PathBuf, CliError> {
        self.path_opt(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))
    }
}
