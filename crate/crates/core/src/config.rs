//! Declarative run configuration: `key = value` lines grouped under optional
//! `[section]` headers, `#` or `;` comments. Section names are for the reader;
//! keys are looked up globally and a key may be set in only one section.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, ZossError};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    /// section → key → raw value; keys outside any section live under `""`.
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn err(line: usize, msg: impl std::fmt::Display) -> ZossError {
    ZossError::Config(format!("line {line}: {msg}"))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut section = String::new();
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find(['#', ';']) {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(err(line_no, "empty section name"));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected `key = value`, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            if k.is_empty() {
                return Err(err(line_no, "empty key"));
            }
            if let Some(prev) = seen.insert(k.to_string(), section.clone()) {
                return Err(err(line_no, format!("key {k:?} already set in section [{prev}]")));
            }
            cfg.sections
                .entry(section.clone())
                .or_default()
                .insert(k.to_string(), v.to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ZossError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.sections.values().find_map(|s| s.get(key)).map(|s| s.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| ZossError::Config(format!("{key} = {v:?}: {e}"))),
        }
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse_list(v)
                .map(Some)
                .map_err(|e| ZossError::Config(format!("{key}: {e}"))),
        }
    }

    pub fn keys(&self) -> Vec<&str> {
        self.sections
            .values()
            .flat_map(|s| s.keys().map(|k| k.as_str()))
            .collect()
    }
}

pub fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}
