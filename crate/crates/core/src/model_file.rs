//! TOML model files.
//!
//! ```toml
//! states = ["calm", "stormy"]
//! H = [["0.9", "0.1"], ["0.775", "0.225"]]
//! omega = ["2/3", "1/3"]
//! epsilon = 0.3
//! ```
//!
//! Numbers may be TOML floats or integers, or strings holding a decimal or
//! a fraction `p/q` so fixtures can state exact values.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::envmodel::EnvironmentSpec;
use crate::error::{Result, RwreError};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Number {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Number {
    fn value(&self) -> Result<f64> {
        match self {
            Number::Float(v) => Ok(*v),
            Number::Int(v) => Ok(*v as f64),
            Number::Text(s) => parse_number(s),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    states: Option<Vec<String>>,
    #[serde(rename = "H", alias = "h")]
    h: Vec<Vec<Number>>,
    omega: Vec<Number>,
    epsilon: Number,
}

/// Parses `"0.775"`, `"2/3"` or `"1e-3"`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || RwreError::ModelFile(format!("cannot parse number {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            Ok(p / q)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

pub fn parse_model(text: &str) -> Result<EnvironmentSpec> {
    let raw: RawModel = toml::from_str(text).map_err(|e| RwreError::ModelFile(e.to_string()))?;
    let k = raw.omega.len();
    if raw.h.len() != k || raw.h.iter().any(|r| r.len() != k) {
        return Err(RwreError::Dimension(format!("H must be {k}x{k} to match omega")));
    }
    let mut h = DMatrix::zeros(k, k);
    for (i, row) in raw.h.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            h[(i, j)] = v.value()?;
        }
    }
    let omega = raw.omega.iter().map(Number::value).collect::<Result<Vec<_>>>()?;
    let states = raw.states.unwrap_or_else(|| (0..k).map(|i| format!("s{i}")).collect());
    EnvironmentSpec::new(states, h, omega, raw.epsilon.value()?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EnvironmentSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text)
}
