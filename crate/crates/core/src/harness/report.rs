//! Run artefacts: `metrics.csv`, `summary.json`, model files and the
//! optional `pseudo_trace.jsonl`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::TrainConfig;
use crate::harness::train::MetricsReport;
use crate::ndcore::MlpParams;
use crate::pseudo::PseudoState;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";
pub const BEST_MODEL_FILE: &str = "model_best.json";
pub const FINAL_MODEL_FILE: &str = "model_final.json";
pub const PSEUDO_TRACE_FILE: &str = "pseudo_trace.jsonl";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    let n_classes = report.rows.first().map_or(0, |r| r.test_per_class.len());
    let mut header: Vec<String> = [
        "epoch",
        "phi",
        "obs_term",
        "unobs_term",
        "regularizer",
        "total",
        "train_map",
        "test_map",
        "mean_confidence",
        "agreement",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n_classes).map(|j| format!("test_ap{j}")));
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.epoch.to_string(),
            r.phi.to_string(),
            r.loss.obs_term.to_string(),
            r.loss.unobs_term.to_string(),
            r.loss.regularizer.to_string(),
            r.loss.total.to_string(),
            r.train_map.to_string(),
            r.test_map.to_string(),
            r.mean_confidence.to_string(),
            r.agreement.to_string(),
        ];
        rec.extend(r.test_per_class.iter().map(|v| fmt_opt(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub best_epoch: usize,
    pub best_test_map: f64,
    pub final_test_map: f64,
    pub final_train_map: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_observed: usize,
    pub config: TrainConfig,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn save_model(params: &MlpParams, path: &Path) -> Result<()> {
    write_json(params, path)
}

pub fn load_model(path: &Path) -> Result<MlpParams> {
    let params: MlpParams = serde_json::from_str(&fs::read_to_string(path)?)?;
    params.validate()?;
    Ok(params)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    epoch: usize,
    image: usize,
    latent: &'a [f64],
    soft: &'a [f64],
    momentum: &'a [f64],
}

/// Streams one JSON line per image per epoch.
pub struct PseudoTraceWriter {
    out: BufWriter<File>,
}

impl PseudoTraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn write_epoch(&mut self, epoch: usize, states: &[PseudoState]) -> Result<()> {
        for (image, s) in states.iter().enumerate() {
            let line = TraceLine {
                epoch,
                image,
                latent: &s.latent,
                soft: &s.soft,
                momentum: &s.momentum,
            };
            serde_json::to_writer(&mut self.out, &line)?;
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
