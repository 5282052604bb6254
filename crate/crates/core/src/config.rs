//! Flat `key = value` text configuration.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CoreError, Result};

/// Parsed key/value pairs. `#` starts a comment; blank lines are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CoreError::Config { line: i + 1, message: format!("expected key=value, got {line:?}") })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(CoreError::Config { line: i + 1, message: "empty key".into() });
            }
            if entries.insert(key.to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(CoreError::Config { line: i + 1, message: format!("duplicate key {key}") });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get_parsed(key)
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get_parsed(key)
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| CoreError::Config { line: *line, message: format!("cannot parse {key} = {v:?}") }),
        }
    }
}
