//! Merges flags over the config file and records every resolved value.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use zoss_core::config::Config;

/// Every key any subcommand reads.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "out",
    "loss",
    "d",
    "radius",
    "n",
    "T",
    "K",
    "m",
    "algorithm",
    "schedule",
    "C",
    "c",
    "mu",
    "t0",
    "replicas",
    "swap",
    "test_size",
    "m_values",
    "K_values",
    "mu_values",
    "points",
    "mc",
    "v",
    "L",
    "beta",
    "table1",
    "format",
];

pub struct Resolver {
    cfg: Config,
    used: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn new(cfg: Config) -> Result<Self> {
        for k in cfg.keys() {
            if !KNOWN_KEYS.contains(&k) {
                bail!("unknown config key {k:?}");
            }
        }
        Ok(Self {
            cfg,
            used: BTreeMap::new(),
        })
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.cfg.get::<T>(key)?,
        };
        self.used
            .insert(key.into(), serde_json::to_value(&v).context(key.to_string())?);
        Ok(v)
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.cfg.get::<T>(key)?.unwrap_or(default),
        };
        self.used
            .insert(key.into(), serde_json::to_value(&v).context(key.to_string())?);
        Ok(v)
    }

    pub fn list<T>(&mut self, key: &str, flag: Option<Vec<T>>, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.cfg.get_list::<T>(key)?.unwrap_or(default),
        };
        self.used
            .insert(key.into(), serde_json::to_value(&v).context(key.to_string())?);
        Ok(v)
    }

    /// Overwrites a recorded value with the one actually used (e.g. a derived default).
    pub fn record<T: Serialize>(&mut self, key: &str, v: &T) {
        self.used
            .insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn used(&self) -> &BTreeMap<String, Value> {
        &self.used
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let cfg = Config::parse("[x]\nn = 30\nT = 7\n").unwrap();
        let mut r = Resolver::new(cfg).unwrap();
        assert_eq!(r.value("n", Some(5usize), 1).unwrap(), 5);
        assert_eq!(r.value("T", None, 1usize).unwrap(), 7);
        assert_eq!(r.value("m", None, 3usize).unwrap(), 3);
        assert_eq!(r.used()["n"], 5);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(Resolver::new(Config::parse("bogus = 1").unwrap()).is_err());
    }

    #[test]
    fn lists_parse_from_file() {
        let mut r = Resolver::new(Config::parse("swap = 1, 4,9").unwrap()).unwrap();
        assert_eq!(r.list::<usize>("swap", None, vec![]).unwrap(), vec![1, 4, 9]);
    }
}
