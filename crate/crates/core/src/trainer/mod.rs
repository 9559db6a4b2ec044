//! Deterministic mini-batch SGD for the reference scorers, with weight
//! decay and a reduce-on-plateau learning-rate schedule.

mod config;
mod protocol;
mod scorer;
mod synthetic;

pub use config::{LossChoice, TrainConfig, ALPHAS, BATCH_SIZES, DECAY_RANGE, LR_RANGE};
pub use protocol::{
    compare_protocol, ComparisonReport, ComparisonRow, SeedDelta, COMPARE_HEADER_PREFIX, MIN_SEEDS,
};
pub use scorer::{pool_features, Scorer, ScorerKind, MODEL_MAGIC, MODEL_VERSION, POOL_GRID};
pub use synthetic::{gen_synthetic, SyntheticData, SyntheticSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::loss::{FlareClass, LossError, LossKind};
use crate::metrics::{sweep_threshold, MetricsError};

/// Minimum drop in validation loss that counts as an improvement.
pub const PLATEAU_MIN_DELTA: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("model file line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },
    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<TrainError>,
    },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One training instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub class: FlareClass,
    pub longitude: f64,
}

impl Example {
    pub fn target(&self) -> u8 {
        self.class.target()
    }
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mix = seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// One pass over `data` in a seeded shuffled order. Each mini-batch applies
/// `theta <- theta - lr * (grad L + weight_decay * theta)`, with bias terms
/// exempt from decay. Returns the mean instance loss seen during the pass.
pub fn sgd_epoch(
    scorer: &mut Scorer,
    data: &[Example],
    cfg: &TrainConfig,
    loss: &LossKind,
    lr: f64,
    epoch: usize,
) -> Result<f64, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Config("no training examples".into()));
    }
    for e in data {
        if e.features.len() != scorer.input_dim() {
            return Err(TrainError::Dimension {
                expected: scorer.input_dim(),
                got: e.features.len(),
            });
        }
    }
    let mask = scorer.decay_mask();
    let mut grad = vec![0.0; scorer.params().len()];
    let mut total = 0.0;
    let order = epoch_order(data.len(), cfg.seed, epoch);
    for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut batch_loss = 0.0;
        for &i in batch {
            let e = &data[i];
            let logit = scorer.forward_unchecked(&e.features);
            if !logit.is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: batch_no,
                });
            }
            batch_loss += loss.instance(logit, e.class)?;
            scorer.backward_unchecked(&e.features, loss.grad(logit, e.class)? * scale, &mut grad);
        }
        if !batch_loss.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                batch: batch_no,
            });
        }
        total += batch_loss;
        let decay = cfg.weight_decay;
        for ((p, g), &m) in scorer.params_mut().iter_mut().zip(&grad).zip(&mask) {
            let d = if m { decay * *p } else { 0.0 };
            *p -= lr * (g + d);
        }
    }
    Ok(total / data.len() as f64)
}

/// Multiplies the learning rate by `factor` once validation loss has failed
/// to improve for `patience` consecutive epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    best: f64,
    stale: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        assert!(factor > 0.0 && factor < 1.0, "factor must lie in (0, 1)");
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            lr,
            factor,
            patience,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records one epoch's validation loss; returns the rate for the next epoch.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best - PLATEAU_MIN_DELTA {
            self.best = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.factor;
                self.stale = 0;
            }
        }
        self.lr
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub val_loss: f64,
    /// Rate used during this epoch.
    pub lr: f64,
    /// Best CSS over the threshold grid on the validation set.
    pub val_css: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub scorer: Scorer,
    pub history: TrainHistory,
    /// CSS-optimal grid threshold on the validation set.
    pub threshold: f64,
    pub val_css: f64,
}

pub fn predict(scorer: &Scorer, data: &[Example]) -> Result<Vec<f64>, TrainError> {
    data.iter()
        .map(|e| Ok(crate::loss::sigmoid(scorer.forward(&e.features)?)?))
        .collect()
}

fn mean_loss(scorer: &Scorer, data: &[Example], loss: &LossKind) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for e in data {
        total += loss.instance(scorer.forward(&e.features)?, e.class)?;
    }
    Ok(total / data.len() as f64)
}

fn labels(data: &[Example]) -> Vec<u8> {
    data.iter().map(Example::target).collect()
}

fn check_set(name: &str, data: &[Example]) -> Result<usize, TrainError> {
    let dim = data
        .first()
        .ok_or_else(|| TrainError::Config(format!("{name} set is empty")))?
        .features
        .len();
    let fl = data.iter().filter(|e| e.class.is_flare()).count();
    if fl == 0 || fl == data.len() {
        return Err(TrainError::Config(format!(
            "{name} set must contain both FL and NF instances"
        )));
    }
    if let Some(e) = data.iter().find(|e| e.features.len() != dim) {
        return Err(TrainError::Dimension {
            expected: dim,
            got: e.features.len(),
        });
    }
    Ok(dim)
}

/// Trains from a seeded initialisation, then calibrates the decision
/// threshold on the validation set.
pub fn train(
    cfg: &TrainConfig,
    train_set: &[Example],
    val_set: &[Example],
) -> Result<TrainOutcome, TrainError> {
    let scorer = Scorer::init(cfg.scorer, check_set("training", train_set)?, cfg.seed);
    train_from(cfg, scorer, train_set, val_set)
}

/// As [`train`], starting from the given parameters.
pub fn train_from(
    cfg: &TrainConfig,
    mut scorer: Scorer,
    train_set: &[Example],
    val_set: &[Example],
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let dim = check_set("training", train_set)?;
    if check_set("validation", val_set)? != dim || scorer.input_dim() != dim {
        return Err(TrainError::Dimension {
            expected: dim,
            got: scorer.input_dim(),
        });
    }
    let loss = cfg.loss_kind()?;
    let val_labels = labels(val_set);
    let mut sched = PlateauScheduler::new(cfg.initial_lr, cfg.plateau_factor, cfg.plateau_patience);
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let lr = sched.lr();
        let train_loss = sgd_epoch(&mut scorer, train_set, cfg, &loss, lr, epoch)?;
        let val_loss = mean_loss(&scorer, val_set, &loss)?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFinite { epoch, batch: 0 });
        }
        let val_css = sweep_threshold(&predict(&scorer, val_set)?, &val_labels)?.best_css;
        sched.step(val_loss);
        history.epochs.push(EpochRecord {
            train_loss,
            val_loss,
            lr,
            val_css,
        });
        log::debug!(
            "epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr} css {val_css:.4}"
        );
    }
    let sweep = sweep_threshold(&predict(&scorer, val_set)?, &val_labels)?;
    Ok(TrainOutcome {
        scorer,
        history,
        threshold: sweep.best_threshold,
        val_css: sweep.best_css,
    })
}
