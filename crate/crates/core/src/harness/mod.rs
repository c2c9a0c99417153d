//! Training loop, sweeps, configuration and run artefacts.

pub mod config;
pub mod report;
pub mod sweep;
pub mod train;

pub use config::{KvFile, TrainConfig, TwoPhase};
pub use report::{load_model, save_model, PseudoTraceWriter, RunSummary};
pub use sweep::{sweep, SweepCell, SweepConfig, SweepResult, SweepRow};
pub use train::{evaluate, train, train_with_observer, EpochRow, MetricsReport, TrainOutcome};
