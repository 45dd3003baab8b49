//! Artifact writers: CSV tables and the summary document.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! value parsed back from any artifact recovers the identical bit pattern
//! and rerunning a configuration reproduces files byte for byte.

use serde_json::{json, Value};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Render a float so it parses back to the same f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        // keep artifacts strictly parseable
        if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    }
}

/// A rectangular table cell.
#[derive(Clone, Debug)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Write a header plus rows, LF line endings. Every row must match the
/// header width. An empty row set produces a header-only file.
pub fn emit_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> std::io::Result<()> {
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(
            row.len(),
            header.len(),
            "csv row {i} has {} cells, header has {}",
            row.len(),
            header.len()
        );
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let rendered: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&rendered.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())
}

/// The summary document has a fixed shape across every experiment:
/// `config`, `verdicts`, `metrics`, `timings`. Timings stay empty so reruns
/// of the same configuration are byte-identical; wall-clock goes to stderr.
pub fn write_summary(
    path: &Path,
    config: Value,
    verdicts: Value,
    metrics: Value,
) -> std::io::Result<()> {
    let doc = json!({
        "config": config,
        "verdicts": verdicts,
        "metrics": metrics,
        "timings": {},
    });
    let mut f = fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(&doc).expect("serializable").as_bytes())?;
    f.write_all(b"\n")
}

/// JSON value for a mean +- stderr pair.
pub fn ms_json(ms: mmfg::sim::MeanStderr) -> Value {
    json!({"mean": ms.mean, "stderr": ms.stderr})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bitwise() {
        for &x in &[
            0.1,
            -0.1,
            1.0 / 3.0,
            6.02214076e23,
            5e-324,
            f64::MAX,
            -0.0,
            123456.789,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s}");
        }
        assert_eq!(fmt_f64(0.1), "0.1");
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = std::env::temp_dir().join(format!("mmfg-csv-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        emit_csv(&path, &["a", "b"], &[]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
        fs::remove_dir_all(&dir).ok();
    }
}
