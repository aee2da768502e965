//! Effective configuration: flag > config file > `DPRP_SEED` (seed only) >
//! built-in default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "epsilon", "delta", "b", "k", "seed", "input", "output", "parallelism", "seeds", "trials", "x", "lambda",
    "check", "mode", "frames", "d", "zero_noise", "axis", "values", "repeats", "exact", "report",
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

/// A parsed config file.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).or_else(|e| err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).or_else(|e| err(format!("invalid config JSON: {e}")))?;
        let Value::Object(map) = doc else { return err("config must be a JSON object") };
        for key in map.keys() {
            if !KEYS.contains(&key.as_str()) {
                return err(format!("unknown config key {key:?}"));
            }
        }
        Ok(Self { values: map.into_iter().collect() })
    }

    fn list(&self, key: &str) -> Option<Vec<&Value>> {
        self.values.get(key).map(|v| match v {
            Value::Array(items) => items.iter().collect(),
            other => vec![other],
        })
    }

    pub fn f64s(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.list(key)
            .map(|items| {
                items
                    .into_iter()
                    .map(|v| v.as_f64().ok_or_else(|| ConfigError(format!("{key}: expected a number, got {v}"))))
                    .collect()
            })
            .transpose()
    }

    pub fn u64s(&self, key: &str) -> Result<Option<Vec<u64>>> {
        self.list(key)
            .map(|items| {
                items
                    .into_iter()
                    .map(|v| v.as_u64().ok_or_else(|| ConfigError(format!("{key}: expected a non-negative integer, got {v}"))))
                    .collect()
            })
            .transpose()
    }

    pub fn strings(&self, key: &str) -> Result<Option<Vec<String>>> {
        self.list(key)
            .map(|items| {
                items
                    .into_iter()
                    .map(|v| v.as_str().map(String::from).ok_or_else(|| ConfigError(format!("{key}: expected a string, got {v}"))))
                    .collect()
            })
            .transpose()
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(v) => err(format!("{key}: expected true or false, got {v}")),
        }
    }
}

/// Resolves values in precedence order and records the effective choice.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    pub effective: serde_json::Map<String, Value>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self { file, effective: serde_json::Map::new() }
    }

    fn record(&mut self, key: &str, v: Value) {
        self.effective.insert(key.to_string(), v);
    }

    /// List of numbers; empty flags fall back to the file, then `default`.
    pub fn f64_list(&mut self, key: &str, flag: &[f64], default: Option<Vec<f64>>) -> Result<Vec<f64>> {
        let v = if !flag.is_empty() { flag.to_vec() } else if let Some(v) = self.file.f64s(key)? { v } else { default.unwrap_or_default() };
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return err(format!("{key}: {bad} is not finite"));
        }
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    pub fn usize_list(&mut self, key: &str, flag: &[usize], default: Option<Vec<usize>>) -> Result<Vec<usize>> {
        let v = if !flag.is_empty() {
            flag.to_vec()
        } else if let Some(v) = self.file.u64s(key)? {
            v.into_iter().map(|x| x as usize).collect()
        } else {
            default.unwrap_or_default()
        };
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, flag: Option<f64>, default: Option<f64>) -> Result<f64> {
        let list: Vec<f64> = flag.into_iter().collect();
        let v = self.f64_list(key, &list, default.map(|d| vec![d]))?;
        match v.as_slice() {
            [x] => Ok(*x),
            [] => err(format!("--{} is required", key.replace('_', "-"))),
            _ => err(format!("{key}: expected a single value, got {}", v.len())),
        }
    }

    pub fn usize(&mut self, key: &str, flag: Option<usize>, default: Option<usize>) -> Result<usize> {
        let list: Vec<usize> = flag.into_iter().collect();
        let v = self.usize_list(key, &list, default.map(|d| vec![d]))?;
        match v.as_slice() {
            [x] => Ok(*x),
            [] => err(format!("--{} is required", key.replace('_', "-"))),
            _ => err(format!("{key}: expected a single value, got {}", v.len())),
        }
    }

    /// Seed: flag, then file, then `DPRP_SEED`, then 0.
    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let from_file = match self.file.u64s("seed")? {
            Some(v) if v.len() == 1 => Some(v[0]),
            Some(_) => return err("seed: expected a single value"),
            None => None,
        };
        let from_env = match std::env::var("DPRP_SEED") {
            Ok(s) => Some(s.trim().parse::<u64>().or_else(|_| err(format!("DPRP_SEED={s:?} is not an unsigned integer")))?),
            Err(_) => None,
        };
        let seed = flag.or(from_file).or(from_env).unwrap_or(0);
        self.record("seed", Value::from(seed));
        Ok(seed)
    }

    pub fn path(&mut self, key: &str, flag: Option<&Path>) -> Result<Option<PathBuf>> {
        let v = match flag {
            Some(p) => Some(p.to_path_buf()),
            None => match self.file.strings(key)? {
                Some(v) if v.len() == 1 => Some(PathBuf::from(&v[0])),
                Some(_) => return err(format!("{key}: expected a single path")),
                None => None,
            },
        };
        if let Some(p) = &v {
            self.record(key, Value::from(p.display().to_string()));
        }
        Ok(v)
    }

    pub fn string_list(&mut self, key: &str, flag: &[String], default: &[&str]) -> Result<Vec<String>> {
        let v = if !flag.is_empty() {
            flag.to_vec()
        } else if let Some(v) = self.file.strings(key)? {
            v
        } else {
            default.iter().map(|s| s.to_string()).collect()
        };
        self.record(key, Value::from(v.clone()));
        Ok(v)
    }

    pub fn flag(&mut self, key: &str, flag: bool) -> Result<bool> {
        let v = flag || self.file.bool(key)?.unwrap_or(false);
        self.record(key, Value::from(v));
        Ok(v)
    }

    /// `# `-prefixed provenance lines for CSV artifacts.
    pub fn header(&self, command: &str) -> Vec<String> {
        vec![
            format!("dprp {} {command}", env!("CARGO_PKG_VERSION")),
            format!("config {}", Value::Object(self.effective.clone())),
        ]
    }

    pub fn config_json(&self) -> Value {
        Value::Object(self.effective.clone())
    }
}
