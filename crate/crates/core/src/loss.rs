//! Binary cross-entropy and its ordinality-aware variant.
//!
//! The weighted loss scales every instance term by `alpha / log10(beta)`,
//! where `beta` is a power of ten tied to the instance's flare sub-class.
//! Sub-classes at the extremes of each binary side (FQ and X) get
//! `log10(beta) = 1` and therefore the largest multiplier; C-class sits
//! closest to the decision boundary and gets the smallest.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROB_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("logit must be finite, got {0}")]
    NonFiniteLogit(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("target must be 0 or 1, got {0}")]
    InvalidTarget(u8),
    #[error("target {target} is inconsistent with flare class {class} (label is a function of the class)")]
    InconsistentTarget { target: u8, class: FlareClass },
    #[error("batch is empty")]
    EmptyBatch,
    #[error(
        "batch vectors differ in length: logits {logits}, targets {targets}, classes {classes}"
    )]
    LengthMismatch {
        logits: usize,
        targets: usize,
        classes: usize,
    },
    #[error("alpha must be finite and positive, got {0}")]
    InvalidAlpha(f64),
}

/// GOES flare magnitude category, ordered from flare-quiet to X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlareClass {
    FQ,
    A,
    B,
    C,
    M,
    X,
}

impl FlareClass {
    pub const ALL: [FlareClass; 6] = [
        FlareClass::FQ,
        FlareClass::A,
        FlareClass::B,
        FlareClass::C,
        FlareClass::M,
        FlareClass::X,
    ];

    /// Position on the ordinal scale, `FQ = 0` through `X = 5`.
    pub fn rank(self) -> usize {
        self as usize
    }

    /// True for the ≥M sub-classes.
    pub fn is_flare(self) -> bool {
        matches!(self, FlareClass::M | FlareClass::X)
    }

    pub fn binary_label(self) -> BinaryLabel {
        if self.is_flare() {
            BinaryLabel::Fl
        } else {
            BinaryLabel::Nf
        }
    }

    /// Binary training target: 1 for FL, 0 for NF.
    pub fn target(self) -> u8 {
        self.is_flare() as u8
    }

    /// Ordinal weight of the sub-class. Powers of ten that grow toward the
    /// binary decision boundary from both sides.
    pub fn beta(self) -> f64 {
        match self {
            FlareClass::FQ => 10.0,
            FlareClass::A => 1e2,
            FlareClass::B => 1e3,
            FlareClass::C => 1e4,
            FlareClass::M => 1e2,
            FlareClass::X => 10.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FlareClass::FQ => "FQ",
            FlareClass::A => "A",
            FlareClass::B => "B",
            FlareClass::C => "C",
            FlareClass::M => "M",
            FlareClass::X => "X",
        }
    }
}

impl fmt::Display for FlareClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlareClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FQ" => Ok(FlareClass::FQ),
            "A" => Ok(FlareClass::A),
            "B" => Ok(FlareClass::B),
            "C" => Ok(FlareClass::C),
            "M" => Ok(FlareClass::M),
            "X" => Ok(FlareClass::X),
            other => Err(format!("unknown flare class `{other}`")),
        }
    }
}

/// Binary label under the ≥M threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryLabel {
    Nf,
    Fl,
}

impl BinaryLabel {
    pub fn target(self) -> u8 {
        match self {
            BinaryLabel::Nf => 0,
            BinaryLabel::Fl => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Nf => "NF",
            BinaryLabel::Fl => "FL",
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinaryLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NF" | "0" => Ok(BinaryLabel::Nf),
            "FL" | "1" => Ok(BinaryLabel::Fl),
            other => Err(format!("unknown binary label `{other}`")),
        }
    }
}

/// Scaling of the weighted loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
}

impl LossConfig {
    /// Values outside `[1, 4]` are accepted but logged.
    pub fn new(alpha: f64) -> Result<Self, LossError> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(LossError::InvalidAlpha(alpha));
        }
        if !(1.0..=4.0).contains(&alpha) {
            log::warn!("alpha = {alpha} is outside the recommended range [1, 4]");
        }
        Ok(Self { alpha })
    }

    /// Per-instance multiplier `alpha / log10(beta)`.
    pub fn weight(&self, class: FlareClass) -> f64 {
        self.alpha / class.beta().log10()
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

/// Logistic function, split on the sign of the input so neither branch
/// exponentiates a large positive number.
pub fn sigmoid(logit: f64) -> Result<f64, LossError> {
    if !logit.is_finite() {
        return Err(LossError::NonFiniteLogit(logit));
    }
    Ok(sigmoid_unchecked(logit))
}

#[inline]
pub(crate) fn sigmoid_unchecked(logit: f64) -> f64 {
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

fn check_target(target: u8) -> Result<(), LossError> {
    if target > 1 {
        Err(LossError::InvalidTarget(target))
    } else {
        Ok(())
    }
}

/// Single-instance binary cross-entropy with the probability clamped to
/// `[PROB_EPSILON, 1 - PROB_EPSILON]`.
pub fn bce(prob: f64, target: u8) -> Result<f64, LossError> {
    check_target(target)?;
    if !(0.0..=1.0).contains(&prob) {
        return Err(LossError::InvalidProbability(prob));
    }
    let p = prob.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    Ok(if target == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    })
}

fn check_pair(target: u8, class: FlareClass) -> Result<(), LossError> {
    check_target(target)?;
    if class.target() != target {
        return Err(LossError::InconsistentTarget { target, class });
    }
    Ok(())
}

/// Weighted loss of one instance given its logit.
pub fn bce_sf_instance(
    logit: f64,
    target: u8,
    class: FlareClass,
    cfg: &LossConfig,
) -> Result<f64, LossError> {
    check_pair(target, class)?;
    let p = sigmoid(logit)?;
    Ok(cfg.alpha * bce(p, target)? * (1.0 / class.beta().log10()))
}

/// Derivative of [`bce_sf_instance`] with respect to the logit.
pub fn grad_bce_sf(
    logit: f64,
    target: u8,
    class: FlareClass,
    cfg: &LossConfig,
) -> Result<f64, LossError> {
    check_pair(target, class)?;
    let p = sigmoid(logit)?;
    Ok(cfg.weight(class) * (p - target as f64))
}

/// Logits, targets and sub-classes for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch {
    logits: Vec<f64>,
    targets: Vec<u8>,
    classes: Vec<FlareClass>,
}

impl LossBatch {
    pub fn new(
        logits: Vec<f64>,
        targets: Vec<u8>,
        classes: Vec<FlareClass>,
    ) -> Result<Self, LossError> {
        if logits.len() != targets.len() || logits.len() != classes.len() {
            return Err(LossError::LengthMismatch {
                logits: logits.len(),
                targets: targets.len(),
                classes: classes.len(),
            });
        }
        if logits.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        for (&t, &c) in targets.iter().zip(&classes) {
            check_pair(t, c)?;
        }
        Ok(Self {
            logits,
            targets,
            classes,
        })
    }

    /// Targets are derived from the classes.
    pub fn from_classes(logits: Vec<f64>, classes: Vec<FlareClass>) -> Result<Self, LossError> {
        let targets = classes.iter().map(|c| c.target()).collect();
        Self::new(logits, targets, classes)
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, u8, FlareClass)> + '_ {
        self.logits
            .iter()
            .zip(&self.targets)
            .zip(&self.classes)
            .map(|((&l, &t), &c)| (l, t, c))
    }
}

/// Mean of [`bce_sf_instance`] over the batch.
pub fn bce_sf_batch(batch: &LossBatch, cfg: &LossConfig) -> Result<f64, LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let mut total = 0.0;
    for (logit, target, class) in batch.iter() {
        total += bce_sf_instance(logit, target, class, cfg)?;
    }
    Ok(total / batch.len() as f64)
}

/// Which objective a trainer minimises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Bce,
    BceSf(LossConfig),
}

impl LossKind {
    pub fn instance(&self, logit: f64, class: FlareClass) -> Result<f64, LossError> {
        match self {
            LossKind::Bce => bce(sigmoid(logit)?, class.target()),
            LossKind::BceSf(cfg) => bce_sf_instance(logit, class.target(), class, cfg),
        }
    }

    pub fn grad(&self, logit: f64, class: FlareClass) -> Result<f64, LossError> {
        match self {
            LossKind::Bce => Ok(sigmoid(logit)? - class.target() as f64),
            LossKind::BceSf(cfg) => grad_bce_sf(logit, class.target(), class, cfg),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::BceSf(_) => "bce-sf",
        }
    }
}
