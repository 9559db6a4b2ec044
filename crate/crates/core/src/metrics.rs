//! Confusion matrices, forecast skill scores and threshold calibration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("scores ({scores}) and labels ({labels}) differ in length")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no instances to evaluate")]
    Empty,
    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(u8),
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("score must be a finite probability, got {0}")]
    InvalidScore(f64),
    #[error("{0} is undefined for this confusion matrix")]
    Undefined(&'static str),
    #[error("longitude {0} is outside [-90, 90]")]
    InvalidLongitude(f64),
    #[error("invalid zone: {0}")]
    InvalidZone(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Actual positives.
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Actual negatives.
    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(MetricsError::InvalidLabel(l));
    }
    if let Some(&s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MetricsError::InvalidScore(s));
    }
    Ok(())
}

fn confusion_unchecked(scores: &[f64], labels: &[u8], threshold: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    cm
}

/// Thresholds a forecast: an instance is predicted FL iff `score >= threshold`.
pub fn confusion(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<ConfusionMatrix, MetricsError> {
    check_inputs(scores, labels)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetricsError::InvalidThreshold(threshold));
    }
    Ok(confusion_unchecked(scores, labels, threshold))
}

/// True skill statistic: recall minus false-alarm rate.
pub fn tss(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if cm.positives() == 0 || cm.negatives() == 0 {
        return Err(MetricsError::Undefined("TSS"));
    }
    Ok(cm.tp as f64 / cm.positives() as f64 - cm.fp as f64 / cm.negatives() as f64)
}

/// Heidke skill score.
pub fn hss(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let p = tp + fn_;
    let n = tn + fp;
    let denom = p * (fn_ + tn) + (tp + fp) * n;
    if denom == 0.0 {
        return Err(MetricsError::Undefined("HSS"));
    }
    Ok(2.0 * (tp * tn - fn_ * fp) / denom)
}

/// Composite skill score: geometric mean of TSS and HSS, zero when their
/// signs disagree.
pub fn css(tss: f64, hss: f64) -> f64 {
    let prod = tss * hss;
    if prod < 0.0 {
        0.0
    } else {
        prod.sqrt()
    }
}

/// TSS, HSS and CSS of one confusion matrix. `None` marks an undefined score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkillScores {
    pub tss: Option<f64>,
    pub hss: Option<f64>,
    pub css: Option<f64>,
}

impl SkillScores {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let t = tss(cm).ok();
        let h = hss(cm).ok();
        let c = match (t, h) {
            (Some(t), Some(h)) => Some(css(t, h)),
            _ => None,
        };
        Self {
            tss: t,
            hss: h,
            css: c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZoneMode {
    /// `|lon| <= hi`
    Cumulative,
    /// `lo < |lon| <= hi`; a zone starting at 0 also takes `|lon| = 0`.
    Annular,
}

impl ZoneMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ZoneMode::Cumulative => "cumulative",
            ZoneMode::Annular => "annular",
        }
    }
}

/// Band of absolute solar longitude, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneSpec {
    pub lo: f64,
    pub hi: f64,
    pub mode: ZoneMode,
}

impl ZoneSpec {
    pub fn new(lo: f64, hi: f64, mode: ZoneMode) -> Result<Self, MetricsError> {
        if !(0.0..=90.0).contains(&lo) || !(0.0..=90.0).contains(&hi) || lo >= hi {
            return Err(MetricsError::InvalidZone(format!(
                "bounds must satisfy 0 <= lo < hi <= 90, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi, mode })
    }

    pub fn cumulative(hi: f64) -> Result<Self, MetricsError> {
        Self::new(0.0, hi, ZoneMode::Cumulative)
    }

    pub fn annular(lo: f64, hi: f64) -> Result<Self, MetricsError> {
        Self::new(lo, hi, ZoneMode::Annular)
    }

    /// Whole disk, `±90°`.
    pub fn full_disk() -> Self {
        Self {
            lo: 0.0,
            hi: 90.0,
            mode: ZoneMode::Cumulative,
        }
    }

    pub fn contains(&self, longitude: f64) -> bool {
        let a = longitude.abs();
        match self.mode {
            ZoneMode::Cumulative => a <= self.hi,
            ZoneMode::Annular => (a > self.lo || (self.lo == 0.0 && a == 0.0)) && a <= self.hi,
        }
    }

    /// Parses the zone list syntax `30,60,90` (cumulative) or
    /// `annular:0-30,30-60,60-90`.
    pub fn parse_list(s: &str) -> Result<Vec<ZoneSpec>, MetricsError> {
        let bad = |msg: &str| MetricsError::InvalidZone(format!("{msg} in `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("bad number"));
        if let Some(rest) = s.strip_prefix("annular:") {
            rest.split(',')
                .map(|part| {
                    let (lo, hi) = part.split_once('-').ok_or_else(|| bad("expected lo-hi"))?;
                    ZoneSpec::annular(num(lo)?, num(hi)?)
                })
                .collect()
        } else {
            s.split(',')
                .map(|part| ZoneSpec::cumulative(num(part)?))
                .collect()
        }
    }
}

impl FromStr for ZoneSpec {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut zones = ZoneSpec::parse_list(s)?;
        if zones.len() != 1 {
            return Err(MetricsError::InvalidZone(format!(
                "expected one zone, got `{s}`"
            )));
        }
        Ok(zones.remove(0))
    }
}

impl fmt::Display for ZoneSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            ZoneMode::Cumulative => write!(f, "±{}", self.hi),
            ZoneMode::Annular => write!(f, "({}, {}]", self.lo, self.hi),
        }
    }
}

/// Evaluation of one threshold over one set of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillReport {
    pub threshold: f64,
    pub zone: ZoneSpec,
    pub confusion: ConfusionMatrix,
    pub scores: SkillScores,
    pub n_fl: u64,
    pub n_nf: u64,
}

impl SkillReport {
    fn new(threshold: f64, zone: ZoneSpec, confusion: ConfusionMatrix) -> Self {
        Self {
            threshold,
            zone,
            scores: SkillScores::from_confusion(&confusion),
            n_fl: confusion.positives(),
            n_nf: confusion.negatives(),
            confusion,
        }
    }
}

/// Outcome of the 99-point threshold grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    pub best_threshold: f64,
    pub best_css: f64,
    pub table: Vec<SkillReport>,
}

/// Threshold grid `0.01, 0.02, …, 0.99`.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (1..=99).map(|k| k as f64 / 100.0)
}

/// Picks the grid threshold with the highest CSS. Ties go to the smaller
/// threshold; thresholds where CSS is undefined count as 0.
pub fn sweep_threshold(scores: &[f64], labels: &[u8]) -> Result<ThresholdSweep, MetricsError> {
    check_inputs(scores, labels)?;
    let n_fl = labels.iter().filter(|&&l| l == 1).count();
    if n_fl == 0 {
        return Err(MetricsError::Undefined("threshold sweep (no FL instances)"));
    }
    if n_fl == labels.len() {
        return Err(MetricsError::Undefined("threshold sweep (no NF instances)"));
    }

    let table: Vec<SkillReport> = threshold_grid()
        .map(|t| {
            SkillReport::new(
                t,
                ZoneSpec::full_disk(),
                confusion_unchecked(scores, labels, t),
            )
        })
        .collect();

    let mut best_threshold = table[0].threshold;
    let mut best_css = table[0].scores.css.unwrap_or(0.0);
    for row in &table[1..] {
        let c = row.scores.css.unwrap_or(0.0);
        if c > best_css {
            best_css = c;
            best_threshold = row.threshold;
        }
    }
    Ok(ThresholdSweep {
        best_threshold,
        best_css,
        table,
    })
}

/// Skill scores restricted to each longitude zone.
pub fn zone_report(
    longitudes: &[f64],
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
    zones: &[ZoneSpec],
) -> Result<Vec<SkillReport>, MetricsError> {
    check_inputs(scores, labels)?;
    if longitudes.len() != scores.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: longitudes.len(),
        });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetricsError::InvalidThreshold(threshold));
    }
    if let Some(&lon) = longitudes.iter().find(|l| !(-90.0..=90.0).contains(*l)) {
        return Err(MetricsError::InvalidLongitude(lon));
    }

    Ok(zones
        .iter()
        .map(|zone| {
            let mut zs = Vec::new();
            let mut zl = Vec::new();
            for ((&lon, &s), &l) in longitudes.iter().zip(scores).zip(labels) {
                if zone.contains(lon) {
                    zs.push(s);
                    zl.push(l);
                }
            }
            SkillReport::new(threshold, *zone, confusion_unchecked(&zs, &zl, threshold))
        })
        .collect())
}

/// Marker written in place of an undefined score.
pub const UNDEFINED: &str = "undefined";

pub const REPORT_HEADER: [&str; 13] = [
    "zone_lo",
    "zone_hi",
    "mode",
    "threshold",
    "tp",
    "fp",
    "tn",
    "fn",
    "tss",
    "hss",
    "css",
    "n_fl",
    "n_nf",
];

fn fmt_score(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| x.to_string())
}

impl SkillReport {
    /// Fields in [`REPORT_HEADER`] order.
    pub fn csv_fields(&self) -> Vec<String> {
        let cm = &self.confusion;
        vec![
            self.zone.lo.to_string(),
            self.zone.hi.to_string(),
            self.zone.mode.as_str().to_string(),
            self.threshold.to_string(),
            cm.tp.to_string(),
            cm.fp.to_string(),
            cm.tn.to_string(),
            cm.fn_.to_string(),
            fmt_score(self.scores.tss),
            fmt_score(self.scores.hss),
            fmt_score(self.scores.css),
            self.n_fl.to_string(),
            self.n_nf.to_string(),
        ]
    }
}

/// Writes one CSV row per report, with a header row.
pub fn write_report_csv<W: Write>(out: W, reports: &[SkillReport]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}
