//! Partial-label multi-label classification with momentum-updated soft
//! pseudo labels.
//!
//! Images with missing labels get a soft pseudo label per unobserved class.
//! Pseudo labels start at 0.5 and move through a momentum recurrence whose
//! step size shrinks as they become confident; the classifier is trained on
//! the observed labels plus the pseudo labels, with the pseudo-label term
//! weighted by a schedule that grows with training progress and label
//! confidence.
//!
//! Modules, bottom-up:
//!
//! - [`ndcore`]: sigmoid/BCE and the small tanh MLP with analytic backprop
//! - [`labels`]: FFL/FPL/FSPL/SFL/SSPL masks over ground truth
//! - [`pseudo`]: pseudo-label state and its per-epoch update
//! - [`losses`]: scheduled objective and AN / AN-LS / WAN baselines
//! - [`metrics`]: AP and mAP
//! - [`datagen`]: synthetic teacher data and the CSV format
//! - [`harness`]: training loop, evaluation, sweeps, config and outputs

pub mod datagen;
pub mod error;
pub mod harness;
pub mod labels;
pub mod losses;
pub mod metrics;
pub mod ndcore;
pub mod pseudo;

pub use datagen::{generate, Dataset, Generated, Split, SyntheticSpec};
pub use error::{Error, Result};
pub use harness::{evaluate, sweep, train, MetricsReport, SweepConfig, TrainConfig, TrainOutcome};
pub use labels::{
    GroundTruthMatrix, LabelSetting, Observation, ObservationMatrix, SeededRng, SettingKind,
};
pub use losses::{LossBreakdown, LossKind};
pub use metrics::{average_precision, mean_average_precision, EvalBatch, MapReport};
pub use ndcore::{bce, sigmoid, ForwardCache, MlpParams};
pub use pseudo::{PseudoHyper, PseudoState};
