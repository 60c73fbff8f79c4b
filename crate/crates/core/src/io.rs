//! Report serialization: JSON with a schema version and 17 significant
//! digits, and the field CSV layout `node_index,x[,y],class,value`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};

use crate::domain::ScalarField;
use crate::error::{GelfandError, Result};

pub const SCHEMA_VERSION: &str = "1";

/// `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn widen(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if !(n.is_i64() || n.is_u64()) => {
                // Parsing our own formatting cannot fail for finite x.
                Value::Number(fmt_f64(x).parse::<Number>().unwrap_or(n))
            }
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(widen).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, widen(v))).collect()),
        other => other,
    }
}

/// Pretty JSON of `report` plus a `schema_version` field. Keys are sorted.
pub fn to_json(report: &impl Serialize) -> Result<String> {
    let body = widen(serde_json::to_value(report)?);
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), Value::String(SCHEMA_VERSION.into()));
    match body {
        Value::Object(o) => out.extend(o),
        other => {
            out.insert("data".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(out))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json(path: &Path, report: &impl Serialize) -> Result<()> {
    fs::write(path, to_json(report)?)?;
    Ok(())
}

/// Field CSV: one row per node, ghosts included, with the node class.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    let mut w = csv::Writer::from_path(path)?;
    let two_d = grid.coord_dim() == 2;
    if two_d {
        w.write_record(["node_index", "x", "y", "class", "value"])?;
    } else {
        w.write_record(["node_index", "x", "class", "value"])?;
    }
    for i in 0..grid.len() {
        let [x, y] = grid.coords(i);
        let mut rec = vec![i.to_string(), fmt_f64(x)];
        if two_d {
            rec.push(fmt_f64(y));
        }
        rec.push(grid.class(i).as_str().to_string());
        rec.push(fmt_f64(field.at(i)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic numeric table with a header row.
pub fn write_table_csv<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar for wall-clock metadata, which never goes into the reports.
pub fn write_run_meta(dir: &Path, lines: &[(&str, String)]) -> Result<()> {
    let mut f = fs::File::create(dir.join("run_meta.txt"))?;
    for (k, v) in lines {
        writeln!(f, "{k}: {v}").map_err(GelfandError::from)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct R {
        x: f64,
        n: usize,
        v: Vec<f64>,
        missing: f64,
    }

    #[test]
    fn floats_round_trip_with_17_digits() {
        let r = R {
            x: 0.1,
            n: 7,
            v: vec![std::f64::consts::PI, -1e-300],
            missing: f64::NAN,
        };
        let s = to_json(&r).unwrap();
        assert!(s.contains("\"schema_version\": \"1\""));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 7"));
        assert!(s.contains("\"missing\": null"));
        let back: Value = serde_json::from_str(&s).unwrap();
        let pi: f64 = back["v"][0].to_string().parse().unwrap();
        assert_eq!(pi, std::f64::consts::PI);
        assert_eq!(s, to_json(&r).unwrap());
    }

    #[test]
    fn fmt_handles_non_finite() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }
}
