use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Value};

use crate::CliError;

/// Bumped whenever a CSV column set changes.
pub const CSV_SCHEMA: u32 = 1;

/// Effective configuration of a run, echoed at the top of every output.
pub struct Header {
    command: &'static str,
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            entries: Vec::new(),
        }
    }

    pub fn set(mut self, key: &str, value: impl Display) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn comments(&self) -> Vec<String> {
        let mut lines = vec![
            format!("shuffled-sgd {}", self.command),
            format!("csv_schema = {CSV_SCHEMA}"),
        ];
        lines.extend(self.entries.iter().map(|(k, v)| format!("{k} = {v}")));
        lines
    }

    pub fn json(&self) -> Value {
        let config: Map<String, Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        serde_json::json!({ "command": self.command, "config": config })
    }
}

/// Writes to `path`, or to `fallback` when no path is given.
pub fn with_output<T>(
    path: Option<&Path>,
    fallback: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<T, CliError>,
) -> Result<T, CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            let out = body(&mut w)?;
            w.flush()?;
            Ok(out)
        }
        None => body(fallback),
    }
}

/// Comment header, column names, then records; LF line endings.
pub fn write_csv(out: &mut dyn Write, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    for line in header.comments() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(out: &mut dyn Write, value: &Value) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Typical power-iteration count used for cost estimates.
const TYPICAL_ITERATIONS: f64 = 100.0;

/// Estimated flops of `evaluations` spectral-norm estimates on a matrix with
/// `nnz` stored entries and `n` rows.
pub fn spectral_cost(nnz: usize, n: usize, evaluations: usize) -> f64 {
    4.0 * (nnz + n) as f64 * TYPICAL_ITERATIONS * evaluations as f64
}

pub fn check_budget(cost: f64, force: bool, max_cost: f64) -> Result<(), CliError> {
    if force || cost <= max_cost {
        return Ok(());
    }
    Err(CliError::Usage(format!(
        "estimated cost {cost:.2e} flops exceeds the budget {max_cost:.2e}; \
         rerun with --force or a larger --max-cost"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let header = Header::new("demo").set("seed", 3);
        let mut buf = Vec::new();
        write_csv(&mut buf, &header, &["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# shuffled-sgd demo\n# csv_schema = 1\n# seed = 3\na,b\n1,\"x,y\"\n"
        );
    }

    #[test]
    fn budget() {
        assert!(check_budget(10.0, false, 100.0).is_ok());
        assert!(check_budget(1e3, true, 100.0).is_ok());
        let err = check_budget(1e3, false, 100.0).unwrap_err();
        assert!(err.to_string().contains("--force"));
    }
}
