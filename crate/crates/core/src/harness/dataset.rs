//! Experiment records and their CSV form.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "n",
    "N",
    "mech_param",
    "trial",
    "estimator",
    "rel_op_error",
    "bound_thm1",
    "bound_thm2",
    "bound_thm3",
    "wall_ms",
];

/// Trial column: a trial index or an aggregate over trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrialLabel {
    Index(usize),
    Mean,
    Rms,
    Stderr,
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Index(i) => write!(f, "{i}"),
            Self::Mean => f.write_str("mean"),
            Self::Rms => f.write_str("rms"),
            Self::Stderr => f.write_str("stderr"),
        }
    }
}

impl std::str::FromStr for TrialLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "rms" => Ok(Self::Rms),
            "stderr" => Ok(Self::Stderr),
            _ => s
                .parse()
                .map(Self::Index)
                .map_err(|_| Error::InvalidInput(format!("bad trial label {s:?}"))),
        }
    }
}

/// One CSV row. Errors and bounds are relative to `||Sigma||`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub experiment: String,
    pub n: usize,
    pub n_samples: usize,
    pub mech_param: Option<f64>,
    pub trial: TrialLabel,
    pub estimator: String,
    pub rel_op_error: f64,
    pub bound_thm1: Option<f64>,
    pub bound_thm2: Option<f64>,
    pub bound_thm3: Option<f64>,
    pub wall_ms: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::InvalidInput(format!("line {line}: bad number {s:?}")))
}

/// Writes `records` as CSV preceded by a `#` comment line (if given).
pub fn write_csv<W: Write>(mut out: W, comment: Option<&str>, records: &[Record]) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.n.to_string(),
            r.n_samples.to_string(),
            opt(r.mech_param),
            r.trial.to_string(),
            r.estimator.clone(),
            r.rel_op_error.to_string(),
            opt(r.bound_thm1),
            opt(r.bound_thm2),
            opt(r.bound_thm3),
            opt(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, comment: Option<&str>, records: &[Record]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), comment, records)
}

/// Reads records, skipping `#` comment lines.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<Record>> {
    let mut body = String::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if !line.starts_with('#') {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "unexpected CSV header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("line {line}: bad integer {s:?}")))
        };
        out.push(Record {
            experiment: row[0].to_string(),
            n: num(&row[1])?,
            n_samples: num(&row[2])?,
            mech_param: parse_opt(&row[3], line)?,
            trial: row[4].parse()?,
            estimator: row[5].to_string(),
            rel_op_error: parse_opt(&row[6], line)?
                .ok_or_else(|| Error::InvalidInput(format!("line {line}: missing error")))?,
            bound_thm1: parse_opt(&row[7], line)?,
            bound_thm2: parse_opt(&row[8], line)?,
            bound_thm3: parse_opt(&row[9], line)?,
            wall_ms: parse_opt(&row[10], line)?,
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<Record>> {
    read_csv(std::fs::File::open(path)?)
}

/// CSV text without its `#` comment lines.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: TrialLabel) -> Record {
        Record {
            experiment: "mcar_uniform".into(),
            n: 50,
            n_samples: 15,
            mech_param: Some(0.4),
            trial,
            estimator: "known_p".into(),
            rel_op_error: 0.1 + 0.2,
            bound_thm1: Some(1e-7),
            bound_thm2: None,
            bound_thm3: None,
            wall_ms: None,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![record(TrialLabel::Index(3)), record(TrialLabel::Rms)];
        let mut buf = Vec::new();
        write_csv(&mut buf, Some("generated"), &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# generated\nexperiment,n,N,"));
        assert!(!text.contains('\r'));
        assert!(text.contains(",0.30000000000000004,"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn body_strips_comments() {
        assert_eq!(csv_body("# t=1\na\nb\n"), "a\nb\n");
    }
}
