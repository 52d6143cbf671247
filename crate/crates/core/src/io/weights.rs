use std::fmt::Write as _;

use super::{parse_f64, parse_int};
use crate::error::{Error, Result};
use crate::model::WeightVector;

pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsFile {
    pub comments: Vec<String>,
    pub config_hash: Option<String>,
    pub weights: WeightVector,
}

/// `version: 1`, optional `config_hash: <hex>`, then `d: v1 ... vκ` for
/// `d = 1..D` in order.
pub fn parse_weights(text: &str, path: &str) -> Result<WeightsFile> {
    let mut comments = Vec::new();
    let mut version = None;
    let mut config_hash = None;
    let mut per_degree: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.to_string());
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(path, ln, "expected `key: value`"))?;
        let value = value.trim();
        match key.trim() {
            "version" => {
                let v: u32 = parse_int(path, ln, value, "version")?;
                if v != WEIGHTS_VERSION {
                    return Err(Error::parse(path, ln, format!("unsupported weights version {v}")));
                }
                version = Some(v);
            }
            "config_hash" => config_hash = Some(value.to_string()),
            k => {
                let d: usize = parse_int(path, ln, k, "degree")?;
                if d != per_degree.len() + 1 {
                    return Err(Error::parse(path, ln, format!("expected degree {}, found {d}", per_degree.len() + 1)));
                }
                let vals = value
                    .split_whitespace()
                    .map(|v| parse_f64(path, ln, v, "weight"))
                    .collect::<Result<Vec<f64>>>()?;
                per_degree.push(vals);
            }
        }
    }
    if version.is_none() {
        return Err(Error::parse(path, 1, "missing version line"));
    }
    let weights = WeightVector::new(per_degree).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    Ok(WeightsFile {
        comments,
        config_hash,
        weights,
    })
}

pub fn emit_weights(file: &WeightsFile) -> String {
    let mut s = String::new();
    for c in &file.comments {
        let _ = writeln!(s, "#{c}");
    }
    let _ = writeln!(s, "version: {WEIGHTS_VERSION}");
    if let Some(h) = &file.config_hash {
        let _ = writeln!(s, "config_hash: {h}");
    }
    for (i, w) in file.weights.per_degree().iter().enumerate() {
        let vals: Vec<String> = w.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}: {}", i + 1, vals.join(" "));
    }
    s
}
