//! Plot data: one whitespace-separated file per curve and a gnuplot script.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::dataset::{Record, TrialLabel};
use crate::error::{Error, Result};

/// A curve of mean error against `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub experiment: String,
    pub estimator: String,
    pub mech_param: Option<f64>,
    /// `(N, mean, stderr)`, ascending in `N`.
    pub points: Vec<(usize, f64, f64)>,
}

impl Curve {
    pub fn label(&self) -> String {
        match self.mech_param {
            Some(p) => format!("{} {}", self.estimator, p),
            None => self.estimator.clone(),
        }
    }

    fn file_name(&self, stem: &str) -> String {
        let mut name = format!("{stem}_{}_{}", self.experiment, self.estimator);
        if let Some(p) = self.mech_param {
            name.push('_');
            name.push_str(&p.to_string());
        }
        name.push_str(".dat");
        name
    }
}

/// Groups the `mean` rows of a dataset into curves, in order of first
/// appearance; `stderr` rows supply error bars.
pub fn curves(records: &[Record]) -> Vec<Curve> {
    let mut out: Vec<Curve> = Vec::new();
    for r in records.iter().filter(|r| r.trial == TrialLabel::Mean) {
        let stderr = records
            .iter()
            .find(|s| {
                s.trial == TrialLabel::Stderr
                    && s.n_samples == r.n_samples
                    && s.estimator == r.estimator
                    && s.mech_param == r.mech_param
                    && s.experiment == r.experiment
            })
            .map(|s| s.rel_op_error)
            .unwrap_or(0.0);
        let point = (r.n_samples, r.rel_op_error, stderr);
        match out.iter_mut().find(|c| {
            c.experiment == r.experiment
                && c.estimator == r.estimator
                && c.mech_param == r.mech_param
        }) {
            Some(c) => c.points.push(point),
            None => out.push(Curve {
                experiment: r.experiment.clone(),
                estimator: r.estimator.clone(),
                mech_param: r.mech_param,
                points: vec![point],
            }),
        }
    }
    for c in &mut out {
        c.points.sort_by_key(|p| p.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub data_files: Vec<PathBuf>,
    pub script: PathBuf,
}

/// Writes `<stem>_*.dat` curve files and `<stem>.gp` into `dir`.
pub fn emit_plot_data(records: &[Record], dir: &Path, stem: &str) -> Result<PlotOutput> {
    let curves = curves(records);
    if curves.is_empty() {
        return Err(Error::InvalidInput(
            "dataset has no aggregated rows to plot".into(),
        ));
    }
    let mut script = String::new();
    writeln!(script, "set logscale xy").unwrap();
    writeln!(script, "set xlabel 'N'").unwrap();
    writeln!(script, "set ylabel 'relative operator-norm error'").unwrap();
    writeln!(script, "set key outside right").unwrap();
    let mut data_files = Vec::with_capacity(curves.len());
    let mut plots = Vec::with_capacity(curves.len());
    for c in &curves {
        let name = c.file_name(stem);
        let mut text = String::from("# N mean stderr\n");
        for (nn, mean, se) in &c.points {
            writeln!(text, "{nn} {mean} {se}").unwrap();
        }
        let path = dir.join(&name);
        std::fs::write(&path, text)?;
        data_files.push(path);
        let style = if c.estimator == "sample_scaled" {
            "dt 3"
        } else {
            "dt 1"
        };
        plots.push(format!(
            "'{name}' using 1:2 with lines {style} title '{}'",
            c.label()
        ));
    }
    writeln!(script, "plot {}", plots.join(", \\\n     ")).unwrap();
    let script_path = dir.join(format!("{stem}.gp"));
    std::fs::write(&script_path, script)?;
    Ok(PlotOutput {
        data_files,
        script: script_path,
    })
}
