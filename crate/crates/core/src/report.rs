//! JSON / CSV serialization shared by every report type.
//!
//! Reports carry no timestamps, maps are ordered and floats are printed by the
//! shortest round-trip algorithm, so identical inputs give identical bytes.
//! JSON has no infinities; non-finite floats are written as the strings
//! `"inf"`, `"-inf"` and `"nan"`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// `{lemma, params, estimate, stderr, bound, pass}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierRecord {
    pub lemma: String,
    pub params: BTreeMap<String, f64>,
    #[serde(with = "float")]
    pub estimate: f64,
    #[serde(with = "float")]
    pub stderr: f64,
    #[serde(with = "float")]
    pub bound: f64,
    pub pass: bool,
}

impl VerifierRecord {
    pub fn new(lemma: &str, pass: bool) -> Self {
        Self {
            lemma: lemma.to_string(),
            params: BTreeMap::new(),
            estimate: 0.0,
            stderr: 0.0,
            bound: 0.0,
            pass,
        }
    }

    pub fn param(mut self, key: &str, v: f64) -> Self {
        self.params.insert(key.to_string(), v);
        self
    }

    pub fn values(mut self, estimate: f64, stderr: f64, bound: f64) -> Self {
        self.estimate = estimate;
        self.stderr = stderr;
        self.bound = bound;
        self
    }
}

/// `#[serde(with = "float")]` for an `f64` that may be non-finite.
pub mod float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not a float: {other:?}"))),
            },
        }
    }
}

/// Same as [`float`] for string-keyed maps.
pub mod float_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(serde::Serialize, Deserialize)]
    struct F(#[serde(with = "super::float")] f64);

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &F(*v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, F>::deserialize(d)?;
        Ok(raw.into_iter().map(|(k, v)| (k, v.0)).collect())
    }
}

/// Same as [`float`] for optional values.
pub mod float_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(serde::Serialize, Deserialize)]
    struct F(#[serde(with = "super::float")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_some(&F(*x)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<F>::deserialize(d)?.map(|f| f.0))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Formats a float for CSV cells, matching the JSON spelling of non-finite values.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes `header` then `rows` as CSV to a string.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::ZossError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    std::fs::write(path, csv_string(header, rows)?)?;
    Ok(())
}
