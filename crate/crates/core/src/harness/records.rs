//! CSV and JSON artifacts.
//!
//! The CSV has the header `lambda,metric,value,stderr,runs,seed` and one row
//! per (λ, metric). Floats use Rust's shortest round-trip formatting, so the
//! file is a pure function of the configuration and seed. Wall time and other
//! run metadata only go to the JSON sidecar.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "lambda,metric,value,stderr,runs,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub lambda: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub runs: usize,
    pub seed: u64,
}

/// Tyler runs that hit `max_iter` at one grid point; their last iterate is
/// still used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TylerFailures {
    pub lambda: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub tyler_non_converged: Vec<TylerFailures>,
    pub wall_time_seconds: f64,
}

impl ExperimentOutput {
    pub fn find(&self, lambda: f64, metric: &str) -> Option<&ExperimentRecord> {
        self.records
            .iter()
            .find(|r| r.lambda == lambda && r.metric == metric)
    }
}

pub fn write_csv<W: Write>(mut w: W, records: &[ExperimentRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        if r.metric.contains([',', '\n', '"']) {
            return Err(Error::Config(format!("metric name {:?} is not CSV-safe", r.metric)));
        }
        if !r.value.is_finite() || !r.stderr.is_finite() {
            return Err(Error::Degenerate(format!(
                "non-finite {} at λ = {}: {} ± {}",
                r.metric, r.lambda, r.value, r.stderr
            )));
        }
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.lambda, r.metric, r.value, r.stderr, r.runs, r.seed
        )?;
    }
    Ok(())
}

pub fn csv_string(records: &[ExperimentRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: cannot parse {name} from {field:?}")))
}

/// Parses a harness CSV, rejecting wrong headers, short rows and
/// non-numeric fields.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))??;
    if header.trim() != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!(
                "line {lineno}: expected 6 fields, got {}",
                fields.len()
            )));
        }
        out.push(ExperimentRecord {
            lambda: parse_field(fields[0], "lambda", lineno)?,
            metric: fields[1].trim().to_string(),
            value: parse_field(fields[2], "value", lineno)?,
            stderr: parse_field(fields[3], "stderr", lineno)?,
            runs: parse_field(fields[4], "runs", lineno)?,
            seed: parse_field(fields[5], "seed", lineno)?,
        });
    }
    if out.is_empty() {
        return Err(Error::Config("CSV has no records".into()));
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<ExperimentRecord>> {
    read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    records: &'a [ExperimentRecord],
    tyler_non_converged: &'a [TylerFailures],
    wall_time_seconds: f64,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `<path>` (CSV) and `<path>.json` next to it.
pub fn write_outputs(path: &Path, config: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(&mut w, &output.records)?;
    w.flush()?;
    let sidecar = Sidecar {
        config,
        records: &output.records,
        tyler_non_converged: &output.tyler_non_converged,
        wall_time_seconds: output.wall_time_seconds,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(lambda: f64, metric: &str, value: f64) -> ExperimentRecord {
        ExperimentRecord {
            lambda,
            metric: metric.into(),
            value,
            stderr: 0.1 * value,
            runs: 100,
            seed: 42,
        }
    }

    #[test]
    fn round_trip() {
        let records = vec![rec(2.0, "eps_cscm", 0.123456789012345), rec(2.5, "eps_ccscrb", 1e-17)];
        let text = csv_string(&records).unwrap();
        assert!(text.starts_with("lambda,metric,value,stderr,runs,seed\n2,eps_cscm,0.123456789012345,"));
        let back = read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(read_csv("".as_bytes()).is_err());
        assert!(read_csv("lambda,metric,value\n".as_bytes()).is_err());
        assert!(read_csv(format!("{CSV_HEADER}\n").as_bytes()).is_err());
        assert!(read_csv(format!("{CSV_HEADER}\n2,eps,1.0,0.1,100\n").as_bytes()).is_err());
        assert!(read_csv(format!("{CSV_HEADER}\n2,eps,abc,0.1,100,1\n").as_bytes()).is_err());
        let mut bad = rec(2.0, "a,b", 1.0);
        bad.metric = "a,b".into();
        assert!(csv_string(&[bad]).is_err());
        assert!(csv_string(&[rec(2.0, "eps", f64::NAN)]).is_err());
    }
}
