//! Machine-readable run metrics.
//!
//! CSV columns: `epoch, samples, train_error, test_error, test_silent,
//! synops_per_sample, weight_updates, error_pos, error_neg, saturations,
//! weights_inside, spikes`, where `spikes` lists per-population training
//! spike counts separated by `;`. Files hold no wall-clock values, so runs
//! with the same seed produce identical bytes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub samples: usize,
    pub train_error: f64,
    pub test_error: Option<f64>,
    pub test_silent: Option<usize>,
    pub synops_per_sample: Option<f64>,
    pub weight_updates: u64,
    pub error_pos: u64,
    pub error_neg: u64,
    pub saturations: u64,
    /// Fraction of weights strictly inside the 8-bit range (quantized runs).
    pub weights_inside: Option<f64>,
    pub spikes: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FirstSpikeMetrics {
    pub samples: usize,
    /// Error after the first `k` output spikes, for `k = 1..`.
    pub error: Vec<f64>,
    pub synops_per_sample: Vec<f64>,
    pub no_spike: usize,
    /// Decision over every output spike of the window.
    pub full_window_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub model: String,
    pub rule: String,
    pub arch: Vec<usize>,
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    pub first_spike: Option<FirstSpikeMetrics>,
}

const HEADER: &str = "epoch,samples,train_error,test_error,test_silent,synops_per_sample,weight_updates,error_pos,error_neg,saturations,weights_inside,spikes";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl Metrics {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER}")?;
        for e in &self.epochs {
            write_row(&mut out, e)?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Write `metrics.csv` and `metrics.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        std::fs::write(dir.join("metrics.csv"), csv)?;
        let mut json = Vec::new();
        self.write_json(&mut json)?;
        json.push(b'\n');
        std::fs::write(dir.join("metrics.json"), json)?;
        Ok(())
    }
}

fn write_row<W: Write>(out: &mut W, e: &EpochMetrics) -> Result<()> {
    let spikes: Vec<String> = e.spikes.iter().map(|s| s.to_string()).collect();
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        e.epoch,
        e.samples,
        e.train_error,
        opt(&e.test_error),
        opt(&e.test_silent),
        opt(&e.synops_per_sample),
        e.weight_updates,
        e.error_pos,
        e.error_neg,
        e.saturations,
        opt(&e.weights_inside),
        spikes.join(";")
    )?;
    Ok(())
}

/// Append one epoch row to a CSV file, writing the header if the file is
/// new or empty.
pub fn append_csv_row(path: &Path, e: &EpochMetrics) -> Result<()> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(f, "{HEADER}")?;
    }
    write_row(&mut f, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Metrics {
        Metrics {
            model: "quantized".into(),
            rule: "perbp".into(),
            arch: vec![784, 100, 10],
            seed: 3,
            epochs: vec![EpochMetrics {
                epoch: 0,
                samples: 10,
                train_error: 0.1 + 0.2,
                test_error: Some(1.0 / 3.0),
                test_silent: Some(0),
                synops_per_sample: Some(12345.5),
                weight_updates: 9,
                error_pos: 1,
                error_neg: 2,
                saturations: 0,
                weights_inside: Some(0.75),
                spikes: vec![5, 6, 7],
            }],
            first_spike: Some(FirstSpikeMetrics {
                samples: 4,
                error: vec![0.5, 0.25],
                synops_per_sample: vec![100.0, 150.0],
                no_spike: 1,
                full_window_error: 0.25,
            }),
        }
    }

    #[test]
    fn empty_metrics_give_header_only() {
        let mut buf = Vec::new();
        Metrics::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{HEADER}\n"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        assert_eq!(Metrics::from_json(&buf).unwrap(), m);
    }

    #[test]
    fn csv_row_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(
            row,
            "0,10,0.30000000000000004,0.3333333333333333,0,12345.5,9,1,2,0,0.75,5;6;7"
        );
    }

    #[test]
    fn appended_rows_match_full_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = sample();
        append_csv_row(&path, &m.epochs[0]).unwrap();
        append_csv_row(&path, &m.epochs[0]).unwrap();
        let mut two = m.clone();
        two.epochs.push(m.epochs[0].clone());
        let mut buf = Vec::new();
        two.write_csv(&mut buf).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), buf);
    }
}
