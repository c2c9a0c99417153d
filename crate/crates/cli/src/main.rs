//! `plmcl` experiment harness: synthetic data, masks, training, evaluation
//! and sweeps.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numerical abort,
//! 1 anything else (for example an unwritable output directory).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use plmcl::datagen::{
    load_dataset_csv, load_dataset_dir, load_observations_csv, save_dataset_dir,
    save_observations_csv, Split,
};
use plmcl::harness::report::{
    save_model, write_json, write_metrics_csv, PseudoTraceWriter, RunSummary, BEST_MODEL_FILE,
    FINAL_MODEL_FILE, METRICS_FILE, PSEUDO_TRACE_FILE, SUMMARY_FILE, TIMING_FILE,
};
use plmcl::harness::sweep::write_sweep;
use plmcl::harness::{load_model, train_with_observer};
use plmcl::{
    evaluate, generate, sweep, Dataset, Error, LabelSetting, SeededRng, SettingKind, SweepConfig,
    SyntheticSpec, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "plmcl",
    version,
    about = "Partial-label multi-label training harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/test split and its teacher.
    GenData {
        /// Key-value spec file; defaults apply to missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hide labels of a ground-truth CSV under a label setting.
    Mask {
        #[arg(long)]
        setting: SettingKind,
        /// Labeled fraction for fpl/sspl/sfl.
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a data directory with an observation file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-epoch pseudo-label states.
        #[arg(long)]
        pseudo_trace: bool,
    },
    /// Print mAP and per-class AP of a saved model as JSON.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Data directory (its test split is used) or a dataset CSV.
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a grid of settings, losses and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error tagged with the exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

fn config_err(error: Error) -> Failure {
    Failure { code: 2, error }
}

fn data_err(error: Error) -> Failure {
    Failure { code: 3, error }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match &error {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Shape { .. }
            | Error::NoPositive { .. }
            | Error::NoPositiveClasses
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::NumericalAbort { .. } | Error::NonFinite(_) => 4,
            Error::Io(_) => 1,
        };
        Failure { code, error }
    }
}

type CliResult = Result<(), Failure>;

fn gen_data(spec: Option<&Path>, out: &Path) -> CliResult {
    let spec = match spec {
        Some(p) => SyntheticSpec::from_file(p).map_err(config_err)?,
        None => SyntheticSpec::default(),
    };
    let generated = generate(&spec)?;
    save_dataset_dir(&generated, out)?;
    eprintln!(
        "wrote {} train / {} test rows to {}",
        generated.train.len(),
        generated.test.len(),
        out.display()
    );
    Ok(())
}

fn mask(setting: SettingKind, fraction: f64, seed: u64, input: &Path, out: &Path) -> CliResult {
    let ds = load_dataset_csv(input, Split::Train).map_err(data_err)?;
    let obs = LabelSetting::new(setting, fraction).apply(&ds.gt, &mut SeededRng::new(seed))?;
    save_observations_csv(&ds, &obs, out)?;
    eprintln!(
        "{} of {} labels observed",
        obs.observed_count(),
        obs.n_rows() * obs.n_classes()
    );
    Ok(())
}

fn train_cmd(config: &Path, data: &Path, obs: &Path, out: &Path, trace: bool) -> CliResult {
    let cfg = TrainConfig::from_file(config).map_err(config_err)?;
    let dir = load_dataset_dir(data).map_err(data_err)?;
    let (ids, observations) = load_observations_csv(obs).map_err(data_err)?;
    if ids != dir.train.ids {
        return Err(data_err(Error::Data(format!(
            "{} rows do not match the training ids",
            obs.display()
        ))));
    }
    std::fs::create_dir_all(out).map_err(Error::from)?;

    let start = Instant::now();
    let mut writer = if trace {
        Some(PseudoTraceWriter::create(&out.join(PSEUDO_TRACE_FILE))?)
    } else {
        None
    };
    let outcome = train_with_observer(
        &cfg,
        &dir.train,
        &dir.test,
        &observations,
        &mut |epoch, states| match writer.as_mut() {
            Some(w) => w.write_epoch(epoch, states),
            None => Ok(()),
        },
    )?;
    if let Some(w) = writer {
        w.finish()?;
    }
    let seconds = start.elapsed().as_secs_f64();

    let report = &outcome.report;
    write_metrics_csv(report, &out.join(METRICS_FILE))?;
    save_model(&outcome.best, &out.join(BEST_MODEL_FILE))?;
    save_model(&outcome.last, &out.join(FINAL_MODEL_FILE))?;
    let summary = RunSummary {
        best_epoch: report.best_epoch,
        best_test_map: report.best_test_map,
        final_test_map: report.final_test_map,
        final_train_map: report.rows.last().map_or(0.0, |r| r.train_map),
        n_train: dir.train.len(),
        n_test: dir.test.len(),
        n_observed: observations.observed_count(),
        config: cfg,
    };
    write_json(&summary, &out.join(SUMMARY_FILE))?;
    write_json(
        &serde_json::json!({ "wall_seconds": seconds }),
        &out.join(TIMING_FILE),
    )?;
    println!(
        "best test mAP {:.4} at epoch {}, final {:.4}",
        report.best_test_map, report.best_epoch, report.final_test_map
    );
    Ok(())
}

fn eval_cmd(model: &Path, data: &Path) -> CliResult {
    let params = load_model(model).map_err(data_err)?;
    let ds: Dataset = if data.is_dir() {
        load_dataset_dir(data).map_err(data_err)?.test
    } else {
        load_dataset_csv(data, Split::Test).map_err(data_err)?
    };
    let report = evaluate(&params, &ds).map_err(|e| match e {
        e @ (Error::NonFinite(_) | Error::NumericalAbort { .. }) => Failure::from(e),
        e => data_err(e),
    })?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Failure::from(Error::from(e)))?
    );
    Ok(())
}

fn sweep_cmd(config: &Path, out: &Path) -> CliResult {
    let cfg = SweepConfig::from_file(config).map_err(config_err)?;
    let start = Instant::now();
    let result = sweep(&cfg)?;
    write_sweep(&result, out)?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    for cell in &result.cells {
        println!(
            "{:<10} {:<6} median best test mAP {}",
            cell.setting.to_string(),
            cell.loss.to_string(),
            cell.median_best_test_map
                .map_or_else(|| "-".to_string(), |m| format!("{m:.4}"))
        );
    }
    eprintln!(
        "{} runs ({} failed) in {:.1}s",
        result.rows.len(),
        failed,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData { spec, out } => gen_data(spec.as_deref(), out),
        Command::Mask {
            setting,
            fraction,
            seed,
            input,
            out,
        } => mask(*setting, *fraction, *seed, input, out),
        Command::Train {
            config,
            data,
            obs,
            out,
            pseudo_trace,
        } => train_cmd(config, data, obs, out, *pseudo_trace),
        Command::Eval { model, data } => eval_cmd(model, data),
        Command::Sweep { config, out } => sweep_cmd(config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
