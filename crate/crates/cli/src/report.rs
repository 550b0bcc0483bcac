//! Report emission. Every report starts with a header naming the schema
//! version and the full configuration, followed by one record per line.
//!
//! JSONL: the header is `{"schema": "csp-report/1", "config": {...}}` and
//! each record is a JSON object. CSV: the header is the same JSON object on
//! a `# ` comment line, then a column row (the sorted union of record keys)
//! and one row per record; nested values are written as JSON text.
//!
//! Object keys are sorted and floats are printed in shortest round-trip
//! form, so equal inputs give byte-identical output.

use std::collections::BTreeSet;
use std::io::{self, Write};

use serde_json::{json, Value};

use csp_core::harness::{ExperimentConfig, REPORT_SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

pub fn header(config: &ExperimentConfig) -> Value {
    json!({ "schema": REPORT_SCHEMA, "config": config })
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_report<W: Write>(
    mut out: W,
    format: Format,
    config: &ExperimentConfig,
    records: &[Value],
) -> io::Result<()> {
    match format {
        Format::Jsonl => {
            writeln!(out, "{}", header(config))?;
            for r in records {
                writeln!(out, "{r}")?;
            }
        }
        Format::Csv => {
            writeln!(out, "# {}", header(config))?;
            let columns: BTreeSet<&str> = records
                .iter()
                .filter_map(Value::as_object)
                .flat_map(|o| o.keys().map(String::as_str))
                .collect();
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&columns)?;
            for r in records {
                w.write_record(columns.iter().map(|c| r.get(*c).map(cell).unwrap_or_default()))?;
            }
            w.flush()?;
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            subcommand: "sample crp".into(),
            params: BTreeMap::from([("theta".into(), 1.0)]),
            settings: BTreeMap::new(),
            n: 3,
            reps: 2,
            seed: 0,
            tolerance: None,
            output: None,
        }
    }

    #[test]
    fn jsonl_header_then_records() {
        let mut buf = Vec::new();
        let records = [json!({"rep": 0, "draw": "[[1,2,3]]"}), json!({"rep": 1, "draw": "[[1],[2,3]]"})];
        write_report(&mut buf, Format::Jsonl, &config(), &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let head: Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(head["schema"], "csp-report/1");
        assert_eq!(head["config"]["params"]["theta"], 1.0);
        assert_eq!(lines[1], r#"{"draw":"[[1,2,3]]","rep":0}"#);
    }

    #[test]
    fn csv_quotes_nested_values_and_fills_gaps() {
        let mut buf = Vec::new();
        let records = [json!({"a": 1, "w": [0.5, 0.25]}), json!({"b": "x,y"})];
        write_report(&mut buf, Format::Csv, &config(), &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# {"));
        assert_eq!(lines[1], "a,b,w");
        assert_eq!(lines[2], "1,,\"[0.5,0.25]\"");
        assert_eq!(lines[3], ",\"x,y\",");
    }
}
