//! Training configuration and its `key = value` file format.

use std::path::Path;

use super::{ScorerKind, TrainError};
use crate::loss::{LossConfig, LossKind};

/// Bounds of the hyperparameter search ranges.
pub const LR_RANGE: (f64, f64) = (1e-5, 1e-2);
pub const DECAY_RANGE: (f64, f64) = (1e-5, 1e-2);
pub const BATCH_SIZES: [usize; 3] = [48, 64, 80];
pub const ALPHAS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossChoice {
    Bce,
    BceSf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub alpha: f64,
    pub loss: LossChoice,
    pub seed: u64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub scorer: ScorerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.01,
            weight_decay: 0.01,
            batch_size: 64,
            epochs: 50,
            alpha: 1.0,
            loss: LossChoice::Bce,
            seed: 0,
            plateau_factor: 0.3,
            plateau_patience: 2,
            scorer: ScorerKind::Linear,
        }
    }
}

impl TrainConfig {
    /// Reported optimum for plain BCE.
    pub fn bce_optimum() -> Self {
        Self::default()
    }

    /// Reported optimum for the ordinal loss.
    pub fn bce_sf_optimum() -> Self {
        Self {
            initial_lr: 0.001,
            weight_decay: 0.001,
            alpha: 2.0,
            loss: LossChoice::BceSf,
            ..Self::default()
        }
    }

    pub fn loss_kind(&self) -> Result<LossKind, TrainError> {
        Ok(match self.loss {
            LossChoice::Bce => LossKind::Bce,
            LossChoice::BceSf => LossKind::BceSf(LossConfig::new(self.alpha)?),
        })
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.initial_lr.is_finite() && self.initial_lr >= 0.0) {
            return bad(format!(
                "initial_lr must be finite and nonnegative, got {}",
                self.initial_lr
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!(
                "plateau_factor must lie in (0, 1), got {}",
                self.plateau_factor
            ));
        }
        if self.plateau_patience == 0 {
            return bad("plateau_patience must be at least 1".into());
        }
        if let ScorerKind::OneHidden { hidden: 0 } = self.scorer {
            return bad("hidden must be positive".into());
        }
        self.loss_kind()?;
        Ok(())
    }

    /// Parses `key = value` lines. `#` starts a comment; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut cfg = Self::default();
        let mut hidden = 16usize;
        let mut scorer = "linear".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                TrainError::Config(format!("line {line_no}: expected `key = value`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let err =
                || TrainError::Config(format!("line {line_no}: bad value `{value}` for {key}"));
            match key {
                "initial_lr" => cfg.initial_lr = value.parse().map_err(|_| err())?,
                "weight_decay" => cfg.weight_decay = value.parse().map_err(|_| err())?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| err())?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| err())?,
                "alpha" => cfg.alpha = value.parse().map_err(|_| err())?,
                "seed" => cfg.seed = value.parse().map_err(|_| err())?,
                "plateau_factor" => cfg.plateau_factor = value.parse().map_err(|_| err())?,
                "plateau_patience" => cfg.plateau_patience = value.parse().map_err(|_| err())?,
                "loss" => {
                    cfg.loss = match value.to_ascii_lowercase().as_str() {
                        "bce" => LossChoice::Bce,
                        "bce-sf" | "bce_sf" | "bcesf" => LossChoice::BceSf,
                        _ => return Err(err()),
                    }
                }
                "scorer" => scorer = value.to_string(),
                "hidden" => hidden = value.parse().map_err(|_| err())?,
                _ => {
                    return Err(TrainError::Config(format!(
                        "line {line_no}: unknown key `{key}`"
                    )))
                }
            }
        }
        cfg.scorer = match scorer.as_str() {
            "linear" => ScorerKind::Linear,
            "one_hidden" => ScorerKind::OneHidden { hidden },
            other => return Err(TrainError::Config(format!("unknown scorer `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let loss = match self.loss {
            LossChoice::Bce => "bce",
            LossChoice::BceSf => "bce-sf",
        };
        let mut out = format!(
            "initial_lr = {}\nweight_decay = {}\nbatch_size = {}\nepochs = {}\nalpha = {}\nloss = {loss}\nseed = {}\nplateau_factor = {}\nplateau_patience = {}\n",
            self.initial_lr,
            self.weight_decay,
            self.batch_size,
            self.epochs,
            self.alpha,
            self.seed,
            self.plateau_factor,
            self.plateau_patience,
        );
        match self.scorer {
            ScorerKind::Linear => out.push_str("scorer = linear\n"),
            ScorerKind::OneHidden { hidden } => {
                out.push_str(&format!("scorer = one_hidden\nhidden = {hidden}\n"))
            }
        }
        out
    }
}
