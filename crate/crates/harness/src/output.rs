//! CSV and JSON writers plus per-round aggregation across replications.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::HarnessError;

/// Header of every `<id>_summary.csv`; comparison files prepend `algorithm`.
pub const SUMMARY_HEADER: [&str; 4] = ["round", "mean_cum_regret", "std_cum_regret", "mean_ratio"];

pub fn summary_header(with_algorithm: bool) -> Vec<&'static str> {
    let mut h = Vec::with_capacity(5);
    if with_algorithm {
        h.push("algorithm");
    }
    h.extend(SUMMARY_HEADER);
    h
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Cross-replication statistics of the cumulative regret, one entry per round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundStats {
    pub mean_cum_regret: Vec<f64>,
    pub std_cum_regret: Vec<f64>,
    /// Mean over replications of `R_t / B_t`.
    pub mean_ratio: Vec<f64>,
}

impl RoundStats {
    /// `curves[k][t]` is replication `k`'s cumulative regret after round `t + 1`.
    pub fn from_curves(curves: &[Vec<f64>], bounds: &[f64]) -> Self {
        let rounds = bounds.len();
        let mut stats = Self::default();
        let mut column = Vec::with_capacity(curves.len());
        for (t, &bound) in bounds.iter().enumerate().take(rounds) {
            column.clear();
            column.extend(curves.iter().map(|c| c[t]));
            let (mean, std) = mean_std(&column);
            stats.mean_cum_regret.push(mean);
            stats.std_cum_regret.push(std);
            stats.mean_ratio.push(column.iter().map(|r| r / bound).sum::<f64>() / column.len() as f64);
        }
        stats
    }

    pub fn rounds(&self) -> usize {
        self.mean_cum_regret.len()
    }

    pub fn write_rows(&self, sink: &mut CsvSink, algorithm: Option<&str>) -> Result<(), HarnessError> {
        for t in 0..self.rounds() {
            let mut fields = Vec::with_capacity(5);
            if let Some(a) = algorithm {
                fields.push(a.to_string());
            }
            fields.push((t + 1).to_string());
            fields.push(self.mean_cum_regret[t].to_string());
            fields.push(self.std_cum_regret[t].to_string());
            fields.push(self.mean_ratio[t].to_string());
            sink.row(&fields)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path, algorithm: Option<&str>) -> Result<(), HarnessError> {
        let mut sink = CsvSink::create(path)?;
        sink.row(summary_header(algorithm.is_some()))?;
        self.write_rows(&mut sink, algorithm)?;
        sink.finish()
    }
}

/// A CSV file that reports failures with its path.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(io_err(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: csv::Writer::from_writer(BufWriter::new(file)),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), HarnessError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| self.csv_err(e))
    }

    pub fn finish(mut self) -> Result<(), HarnessError> {
        self.writer.flush().map_err(io_err(&self.path))
    }

    fn csv_err(&self, e: csv::Error) -> HarnessError {
        HarnessError::Io {
            path: self.path.clone(),
            source: std::io::Error::other(e),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}
