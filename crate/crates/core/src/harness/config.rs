//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys are exactly the field names of the struct being configured;
//! unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::SyntheticSpec;
use crate::error::{Error, Result};
use crate::labels::{LabelSetting, SettingKind};
use crate::losses::{default_wan_gamma, LossKind, PlmclLossConfig, Regularizer, DEFAULT_LS_EPS};
use crate::pseudo::PseudoHyper;

/// Parsed key-value pairs that remember their source line.
#[derive(Debug, Default)]
pub struct KvFile {
    entries: BTreeMap<String, (String, usize)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let key = k.trim().to_string();
            if entries
                .insert(key.clone(), (v.trim().to_string(), idx + 1))
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    idx + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Remove and parse `key` if present.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("line {line}: bad value for `{key}`: {e}"))),
        }
    }

    pub fn take_into<T>(&mut self, key: &str, slot: &mut T) -> Result<()>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Comma-separated list.
    pub fn take_list<T>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>().map_err(|e| {
                        Error::Config(format!("line {line}: bad item `{s}` in `{key}`: {e}"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Error if any key was left unconsumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (_, line))) => Err(Error::Config(format!("line {line}: unknown key `{k}`"))),
        }
    }
}

/// Output-layer-only epochs followed by full fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoPhase {
    pub head_epochs: usize,
    pub finetune_epochs: usize,
}

impl Default for TwoPhase {
    fn default() -> Self {
        Self {
            head_epochs: 5,
            finetune_epochs: 5,
        }
    }
}

impl FromStr for TwoPhase {
    type Err = Error;

    /// `<head>,<finetune>`
    fn from_str(s: &str) -> Result<Self> {
        let (h, f) = s.split_once(',').ok_or_else(|| {
            Error::Config(format!("two_phase expects `head,finetune`, got `{s}`"))
        })?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad epoch count `{v}` in two_phase")))
        };
        Ok(TwoPhase {
            head_epochs: parse(h)?,
            finetune_epochs: parse(f)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub setting: LabelSetting,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub n: u32,
    pub reg_weight: f64,
    pub expected_positives: f64,
    pub hidden_width: usize,
    pub seed: u64,
    pub two_phase: Option<TwoPhase>,
    /// Label smoothing for `an_ls`.
    pub ls_eps: f64,
    /// Assumed-negative weight for `wan`; `None` means `1/(L−1)`.
    pub wan_gamma: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let hyper = PseudoHyper::default();
        let reg = Regularizer::default();
        Self {
            loss: LossKind::Plmcl,
            setting: LabelSetting::new(SettingKind::Sspl, 0.2),
            epochs: 10,
            batch_size: 16,
            lr: 1e-2,
            beta1: hyper.beta1,
            beta2: PlmclLossConfig::default().beta2,
            alpha: hyper.alpha,
            lambda: hyper.lambda,
            n: hyper.n,
            reg_weight: reg.weight,
            expected_positives: reg.expected_positives,
            hidden_width: 0,
            seed: 0,
            two_phase: None,
            ls_eps: DEFAULT_LS_EPS,
            wan_gamma: None,
        }
    }
}

impl TrainConfig {
    pub fn pseudo_hyper(&self) -> PseudoHyper {
        PseudoHyper {
            beta1: self.beta1,
            alpha: self.alpha,
            lambda: self.lambda,
            n: self.n,
        }
    }

    pub fn plmcl_loss(&self) -> PlmclLossConfig {
        PlmclLossConfig {
            beta2: self.beta2,
            reg: Regularizer {
                weight: self.reg_weight,
                expected_positives: self.expected_positives,
            },
        }
    }

    pub fn wan_gamma_for(&self, n_classes: usize) -> f64 {
        self.wan_gamma
            .unwrap_or_else(|| default_wan_gamma(n_classes))
    }

    /// Total epochs, accounting for the two-phase schedule.
    pub fn total_epochs(&self) -> usize {
        match self.two_phase {
            Some(tp) => tp.head_epochs + tp.finetune_epochs,
            None => self.epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.total_epochs() == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (name, v) in [
            ("lr", self.lr),
            ("beta2", self.beta2),
            ("expected_positives", self.expected_positives),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.reg_weight >= 0.0 && self.reg_weight.is_finite()) {
            return bad(format!(
                "reg_weight must be non-negative, got {}",
                self.reg_weight
            ));
        }
        if !(0.0..=0.5).contains(&self.ls_eps) {
            return bad(format!("ls_eps must lie in [0, 0.5], got {}", self.ls_eps));
        }
        if let Some(g) = self.wan_gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return bad(format!("wan_gamma must be non-negative, got {g}"));
            }
        }
        self.pseudo_hyper()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Apply the keys of `kv` that name `TrainConfig` fields.
    pub fn apply_kv(&mut self, kv: &mut KvFile) -> Result<()> {
        kv.take_into("loss", &mut self.loss)?;
        if let Some(s) = kv.take::<LabelSetting>("setting")? {
            self.setting = s;
        }
        if let Some(f) = kv.take::<f64>("fraction")? {
            self.setting.fraction = f;
        }
        kv.take_into("epochs", &mut self.epochs)?;
        kv.take_into("batch_size", &mut self.batch_size)?;
        kv.take_into("lr", &mut self.lr)?;
        kv.take_into("beta1", &mut self.beta1)?;
        kv.take_into("beta2", &mut self.beta2)?;
        kv.take_into("alpha", &mut self.alpha)?;
        kv.take_into("lambda", &mut self.lambda)?;
        kv.take_into("n", &mut self.n)?;
        kv.take_into("reg_weight", &mut self.reg_weight)?;
        kv.take_into("expected_positives", &mut self.expected_positives)?;
        kv.take_into("hidden_width", &mut self.hidden_width)?;
        kv.take_into("seed", &mut self.seed)?;
        kv.take_into("ls_eps", &mut self.ls_eps)?;
        if let Some(v) = kv.take::<String>("two_phase")? {
            self.two_phase = match v.as_str() {
                "none" | "off" | "" => None,
                "on" => Some(TwoPhase::default()),
                s => Some(s.parse()?),
            };
        }
        if let Some(v) = kv.take::<String>("wan_gamma")? {
            self.wan_gamma = match v.as_str() {
                "auto" | "default" => None,
                s => Some(
                    s.parse()
                        .map_err(|_| Error::Config(format!("bad value for `wan_gamma`: {s}")))?,
                ),
            };
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let mut cfg = Self::default();
        cfg.apply_kv(&mut kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv_text(
            &std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        )
    }
}

impl SyntheticSpec {
    pub fn apply_kv(&mut self, kv: &mut KvFile) -> Result<()> {
        kv.take_into("n_images", &mut self.n_images)?;
        kv.take_into("n_test", &mut self.n_test)?;
        kv.take_into("n_features", &mut self.n_features)?;
        kv.take_into("n_classes", &mut self.n_classes)?;
        kv.take_into(
            "target_label_cardinality",
            &mut self.target_label_cardinality,
        )?;
        kv.take_into("noise_std", &mut self.noise_std)?;
        kv.take_into("seed", &mut self.seed)?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut kv = KvFile::read(path)?;
        let mut spec = Self::default();
        spec.apply_kv(&mut kv)?;
        kv.finish()?;
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}
