//! Grid sweeps over label settings, losses and seeds.
//!
//! For every seed a synthetic dataset is generated with that seed; each
//! (setting, seed) pair gets its own mask, and every loss trains on the same
//! data and mask. Runs are independent and run in parallel; results are
//! collected in grid order, so output files do not depend on scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{generate, Generated, SyntheticSpec};
use crate::error::{Error, Result};
use crate::harness::config::{KvFile, TrainConfig};
use crate::harness::train::train;
use crate::labels::{LabelSetting, SeededRng};
use crate::losses::LossKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: TrainConfig,
    pub data: SyntheticSpec,
    pub settings: Vec<LabelSetting>,
    pub losses: Vec<LossKind>,
    pub seeds: Vec<u64>,
}

impl SweepConfig {
    pub fn run_count(&self) -> usize {
        self.settings.len() * self.losses.len() * self.seeds.len()
    }

    /// Train keys, data keys and the three axes `settings`, `losses`,
    /// `seeds` (comma-separated) in one flat file. `data_seed` is not
    /// accepted: the data seed is the run seed.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let mut base = TrainConfig::default();
        let settings = kv.take_list::<LabelSetting>("settings")?;
        let losses = kv.take_list::<LossKind>("losses")?;
        let seeds = kv.take_list::<u64>("seeds")?;
        base.apply_kv(&mut kv)?;
        let mut data = SyntheticSpec::default();
        data.apply_kv(&mut kv)?;
        kv.finish()?;
        let cfg = SweepConfig {
            settings: settings.unwrap_or_else(|| vec![base.setting]),
            losses: losses.unwrap_or_else(|| vec![base.loss]),
            seeds: seeds.unwrap_or_else(|| vec![base.seed]),
            base,
            data,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv_text(
            &std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.data
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.run_count() == 0 {
            return Err(Error::Config("sweep has an empty axis".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub setting: LabelSetting,
    pub loss: LossKind,
    pub seed: u64,
    pub best_test_map: Option<f64>,
    pub best_epoch: Option<usize>,
    pub final_test_map: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub setting: LabelSetting,
    pub loss: LossKind,
    pub runs: usize,
    pub failed: usize,
    pub median_best_test_map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn median(&self, setting: LabelSetting, loss: LossKind) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.setting == setting && c.loss == loss)
            .and_then(|c| c.median_best_test_map)
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn one_run(
    cfg: &SweepConfig,
    data: &Result<Generated>,
    setting: LabelSetting,
    loss: LossKind,
    seed: u64,
) -> SweepRow {
    let outcome = (|| {
        let data = data.as_ref().map_err(|e| Error::Data(e.to_string()))?;
        let obs = setting.apply(&data.train.gt, &mut SeededRng::new(seed))?;
        let run_cfg = TrainConfig {
            loss,
            setting,
            seed,
            ..cfg.base.clone()
        };
        train(&run_cfg, &data.train, &data.test, &obs)
    })();
    let mut row = SweepRow {
        setting,
        loss,
        seed,
        best_test_map: None,
        best_epoch: None,
        final_test_map: None,
        error: None,
    };
    match outcome {
        Ok(o) => {
            row.best_test_map = Some(o.report.best_test_map);
            row.best_epoch = Some(o.report.best_epoch);
            row.final_test_map = Some(o.report.final_test_map);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs the full grid. Failures are recorded per row and do not stop the sweep.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let datasets: BTreeMap<u64, Result<Generated>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let spec = SyntheticSpec {
                seed,
                ..cfg.data.clone()
            };
            (seed, generate(&spec))
        })
        .collect();

    let grid: Vec<(LabelSetting, LossKind, u64)> = cfg
        .settings
        .iter()
        .flat_map(|&s| {
            cfg.losses
                .iter()
                .flat_map(move |&l| cfg.seeds.iter().map(move |&seed| (s, l, seed)))
        })
        .collect();
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&(setting, loss, seed)| one_run(cfg, &datasets[&seed], setting, loss, seed))
        .collect();

    let mut cells = Vec::new();
    for &setting in &cfg.settings {
        for &loss in &cfg.losses {
            let cell_rows: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.setting == setting && r.loss == loss)
                .collect();
            let mut maps: Vec<f64> = cell_rows.iter().filter_map(|r| r.best_test_map).collect();
            cells.push(SweepCell {
                setting,
                loss,
                runs: cell_rows.len(),
                failed: cell_rows.iter().filter(|r| r.error.is_some()).count(),
                median_best_test_map: median(&mut maps),
            });
        }
    }
    Ok(SweepResult { rows, cells })
}

pub const RUNS_FILE: &str = "runs.csv";
pub const CELLS_FILE: &str = "summary.csv";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join(RUNS_FILE))?;
    w.write_record([
        "setting",
        "fraction",
        "loss",
        "seed",
        "best_test_map",
        "best_epoch",
        "final_test_map",
        "error",
    ])?;
    for r in &result.rows {
        w.write_record([
            r.setting.kind.to_string(),
            r.setting.effective_fraction().to_string(),
            r.loss.to_string(),
            r.seed.to_string(),
            opt(&r.best_test_map),
            opt(&r.best_epoch),
            opt(&r.final_test_map),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join(CELLS_FILE))?;
    w.write_record([
        "setting",
        "fraction",
        "loss",
        "runs",
        "failed",
        "median_best_test_map",
    ])?;
    for c in &result.cells {
        w.write_record([
            c.setting.kind.to_string(),
            c.setting.effective_fraction().to_string(),
            c.loss.to_string(),
            c.runs.to_string(),
            c.failed.to_string(),
            opt(&c.median_best_test_map),
        ])?;
    }
    w.flush()?;
    Ok(())
}
