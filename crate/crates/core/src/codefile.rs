//! Text format for density codes.
//!
//! ```text
//! # density-code v1, n=2, m=3, Sx=64, Sy=48, lambda=0.0001, alpha=none, polarity=light-on-dark, seq=halton
//! 3.2000000000000001e1,1.6000000000000000e1
//! ...
//! ```
//!
//! Readers ignore header keys they do not know.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::encoder::{DensityCode, Provenance};
use crate::error::{Error, Result};

const MAGIC: &str = "density-code v1";

/// Format a real with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_string(code: &DensityCode) -> String {
    let mut out = format!("# {MAGIC}, n=2, m={}", code.len());
    if let Some(p) = code.provenance() {
        let alpha = p.alpha.map_or_else(|| "none".to_string(), |a| a.to_string());
        out.push_str(&format!(
            ", Sx={}, Sy={}, lambda={}, alpha={alpha}, polarity={}, seq={}",
            p.width, p.height, p.lambda, p.polarity, p.sequence
        ));
    }
    out.push('\n');
    for [x, y] in code.points() {
        out.push_str(&fmt_real(*x));
        out.push(',');
        out.push_str(&fmt_real(*y));
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<DensityCode> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedCode("empty file".into()))?;
    let body = header
        .strip_prefix('#')
        .map(str::trim)
        .ok_or_else(|| Error::MalformedCode("missing '#' header line".into()))?;
    let mut fields = body.split(',').map(str::trim);
    if fields.next() != Some(MAGIC) {
        return Err(Error::MalformedCode(format!("expected '{MAGIC}' header")));
    }
    let keys: HashMap<&str, &str> = fields.filter_map(|kv| kv.split_once('=')).collect();

    let n: usize = required(&keys, "n")?;
    if n != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: n,
        });
    }
    let m: usize = required(&keys, "m")?;

    let mut points = Vec::with_capacity(m);
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<&str> = line.split(',').map(str::trim).collect();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.len(),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedCode(format!("line {}: bad number {s:?}", lineno + 2)))
        };
        points.push([parse(values[0])?, parse(values[1])?]);
    }
    if points.len() != m {
        return Err(Error::MalformedCode(format!(
            "header says m={m}, found {} points",
            points.len()
        )));
    }

    let provenance = match (keys.get("Sx"), keys.get("Sy"), keys.get("lambda"), keys.get("polarity")) {
        (Some(_), Some(_), Some(_), Some(pol)) => Some(Provenance {
            width: required(&keys, "Sx")?,
            height: required(&keys, "Sy")?,
            lambda: required(&keys, "lambda")?,
            alpha: match keys.get("alpha") {
                None | Some(&"none") => None,
                Some(a) => Some(
                    a.parse()
                        .map_err(|_| Error::MalformedCode(format!("bad alpha {a:?}")))?,
                ),
            },
            polarity: pol.parse()?,
            sequence: keys.get("seq").unwrap_or(&"halton").to_string(),
        }),
        _ => None,
    };
    Ok(match provenance {
        Some(p) => DensityCode::with_provenance(points, p),
        None => DensityCode::from_points(points),
    })
}

fn required<T: std::str::FromStr>(keys: &HashMap<&str, &str>, key: &str) -> Result<T> {
    let raw = keys
        .get(key)
        .ok_or_else(|| Error::MalformedCode(format!("header lacks '{key}'")))?;
    raw.parse()
        .map_err(|_| Error::MalformedCode(format!("bad value for '{key}': {raw:?}")))
}

pub fn write(code: &DensityCode, path: &Path) -> Result<()> {
    fs::write(path, to_string(code)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<DensityCode> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}
