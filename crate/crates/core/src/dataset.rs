//! Flare catalog labeling, tri-monthly partitioning, undersampling and the
//! sample manifest.
//!
//! Manifest CSV columns:
//! `sample_id, ar_id, observation_time, longitude_deg, raster_path,
//! flare_class, label, partition, augmented`. `flare_class`, `label` and
//! `partition` may be empty for samples that have not been labeled or split.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, NaiveDateTime, SecondsFormat, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::augment::sample_seed;
use crate::loss::{BinaryLabel, FlareClass};

pub const PREDICTION_WINDOW_HOURS: i64 = 24;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("peak flux must be positive and finite, got {0}")]
    InvalidFlux(f64),
    #[error("keep rate for {class} must lie in (0, 1], got {rate}")]
    InvalidRate { class: FlareClass, rate: f64 },
    #[error("partition {0} has no samples")]
    MissingPartition(u8),
    #[error("sample `{0}` has no partition assigned")]
    Unpartitioned(String),
    #[error("sample `{0}` has no flare class")]
    Unlabeled(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parses ISO-8601 timestamps; values without an offset are taken as UTC.
pub fn parse_time(s: &str) -> Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(format!("invalid timestamp `{s}`"))
}

pub fn format_time(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// GOES class from peak X-ray flux (W m^-2); each bound is strict.
pub fn flux_to_class(peak_flux: f64) -> Result<FlareClass, DatasetError> {
    if !(peak_flux.is_finite() && peak_flux > 0.0) {
        return Err(DatasetError::InvalidFlux(peak_flux));
    }
    Ok(if peak_flux > 1e-4 {
        FlareClass::X
    } else if peak_flux > 1e-5 {
        FlareClass::M
    } else if peak_flux > 1e-6 {
        FlareClass::C
    } else if peak_flux > 1e-7 {
        FlareClass::B
    } else if peak_flux > 1e-8 {
        FlareClass::A
    } else {
        FlareClass::FQ
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEvent {
    pub ar_id: String,
    pub start_time: DateTime<Utc>,
    pub peak_flux: f64,
}

/// Flare events indexed by active region, sorted by start time.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    by_ar: HashMap<String, Vec<(DateTime<Utc>, FlareClass)>>,
}

impl Catalog {
    pub fn new(events: impl IntoIterator<Item = CatalogEvent>) -> Result<Self, DatasetError> {
        let mut by_ar: HashMap<String, Vec<(DateTime<Utc>, FlareClass)>> = HashMap::new();
        for e in events {
            let class = flux_to_class(e.peak_flux)?;
            by_ar
                .entry(e.ar_id)
                .or_default()
                .push((e.start_time, class));
        }
        for v in by_ar.values_mut() {
            v.sort();
        }
        Ok(Self { by_ar })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &'static str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or(DatasetError::MissingColumn(name))
        };
        let (ar, start, flux) = (col("ar_id")?, col("start_time")?, col("peak_flux")?);
        let mut events = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let err = |msg: String| DatasetError::Parse { line, msg };
            let peak_flux: f64 = rec[flux]
                .parse()
                .map_err(|_| err(format!("bad peak_flux `{}`", &rec[flux])))?;
            if !(peak_flux.is_finite() && peak_flux > 0.0) {
                return Err(err(format!("peak_flux must be positive, got {peak_flux}")));
            }
            events.push(CatalogEvent {
                ar_id: rec[ar].to_string(),
                start_time: parse_time(&rec[start]).map_err(err)?,
                peak_flux,
            });
        }
        Self::new(events)
    }

    /// Strongest class among `ar_id`'s events starting in `(from, to]`.
    pub fn max_class_in(
        &self,
        ar_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    ) -> Option<FlareClass> {
        let events = self.by_ar.get(ar_id)?;
        let lo = events.partition_point(|(t, _)| *t <= from);
        let hi = events.partition_point(|(t, _)| *t <= to);
        events[lo..hi].iter().map(|&(_, c)| c).max()
    }
}

/// Class and binary label from the strongest flare of the AR in the
/// 24 h after the observation; no event means flare-quiet.
pub fn label_sample(
    observation_time: DateTime<Utc>,
    ar_id: &str,
    catalog: &Catalog,
) -> (FlareClass, BinaryLabel) {
    let end = observation_time + Duration::hours(PREDICTION_WINDOW_HOURS);
    let class = catalog
        .max_class_in(ar_id, observation_time, end)
        .unwrap_or(FlareClass::FQ);
    (class, class.binary_label())
}

/// Tri-monthly partition `1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition(u8);

impl Partition {
    pub fn new(p: u8) -> Option<Self> {
        (1..=4).contains(&p).then_some(Self(p))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Calendar quarter of the AR onset month.
pub fn partition(ar_onset_time: DateTime<Utc>) -> Partition {
    Partition(((ar_onset_time.month0() / 3) + 1) as u8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    pub ar_id: String,
    pub observation_time: DateTime<Utc>,
    pub longitude: f64,
    pub raster_path: String,
    pub flare_class: Option<FlareClass>,
    pub partition: Option<Partition>,
    pub augmented: bool,
}

impl Sample {
    pub fn label(&self) -> Option<BinaryLabel> {
        self.flare_class.map(FlareClass::binary_label)
    }

    pub fn require_class(&self) -> Result<FlareClass, DatasetError> {
        self.flare_class
            .ok_or_else(|| DatasetError::Unlabeled(self.sample_id.clone()))
    }
}

/// Labels every sample in place from the catalog.
pub fn label_all(samples: &mut [Sample], catalog: &Catalog) {
    for s in samples {
        s.flare_class = Some(label_sample(s.observation_time, &s.ar_id, catalog).0);
    }
}

/// Onset of each AR: the earliest observation of it in `samples`.
pub fn ar_onsets(samples: &[Sample]) -> BTreeMap<String, DateTime<Utc>> {
    let mut onsets: BTreeMap<String, DateTime<Utc>> = BTreeMap::new();
    for s in samples {
        onsets
            .entry(s.ar_id.clone())
            .and_modify(|t| *t = (*t).min(s.observation_time))
            .or_insert(s.observation_time);
    }
    onsets
}

/// Assigns every sample the partition of its AR's onset.
pub fn assign_partitions(samples: &mut [Sample]) {
    let onsets = ar_onsets(samples);
    for s in samples {
        s.partition = Some(partition(onsets[&s.ar_id]));
    }
}

/// Keep rates for NF sub-classes; FL samples are always kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UndersampleSpec {
    pub fq: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub seed: u64,
}

impl Default for UndersampleSpec {
    fn default() -> Self {
        Self {
            fq: 0.08,
            a: 0.30,
            b: 0.30,
            c: 0.30,
            seed: 0,
        }
    }
}

impl UndersampleSpec {
    pub fn rate(&self, class: FlareClass) -> Option<f64> {
        match class {
            FlareClass::FQ => Some(self.fq),
            FlareClass::A => Some(self.a),
            FlareClass::B => Some(self.b),
            FlareClass::C => Some(self.c),
            FlareClass::M | FlareClass::X => None,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for class in [FlareClass::FQ, FlareClass::A, FlareClass::B, FlareClass::C] {
            let rate = self.rate(class).expect("NF class");
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(DatasetError::InvalidRate { class, rate });
            }
        }
        Ok(())
    }
}

/// Bernoulli-thins NF samples at their sub-class rate. Each decision is
/// drawn from a generator seeded by the sample id and `spec.seed`, so the
/// result does not depend on input order.
pub fn undersample(
    samples: &[Sample],
    spec: &UndersampleSpec,
) -> Result<Vec<Sample>, DatasetError> {
    spec.validate()?;
    let mut kept = Vec::new();
    for s in samples {
        let class = s.require_class()?;
        let keep = match spec.rate(class) {
            None => true,
            Some(rate) => {
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(&s.sample_id, spec.seed));
                rng.random::<f64>() < rate
            }
        };
        if keep {
            kept.push(s.clone());
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl Role {
    pub fn of(p: Partition) -> Role {
        match p.get() {
            1 | 2 => Role::Train,
            3 => Role::Validation,
            _ => Role::Test,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RoleSplit<'a> {
    pub train: Vec<&'a Sample>,
    pub validation: Vec<&'a Sample>,
    pub test: Vec<&'a Sample>,
}

/// Partitions 1-2 train, 3 validates, 4 tests. Every partition must be present.
pub fn split_roles(samples: &[Sample]) -> Result<RoleSplit<'_>, DatasetError> {
    let mut seen = [false; 4];
    let mut split = RoleSplit::default();
    for s in samples {
        let p = s
            .partition
            .ok_or_else(|| DatasetError::Unpartitioned(s.sample_id.clone()))?;
        seen[p.get() as usize - 1] = true;
        match Role::of(p) {
            Role::Train => split.train.push(s),
            Role::Validation => split.validation.push(s),
            Role::Test => split.test.push(s),
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(DatasetError::MissingPartition(missing as u8 + 1));
    }
    Ok(split)
}

pub const MANIFEST_HEADER: [&str; 9] = [
    "sample_id",
    "ar_id",
    "observation_time",
    "longitude_deg",
    "raster_path",
    "flare_class",
    "label",
    "partition",
    "augmented",
];

fn parse_row(rec: &csv::StringRecord, idx: &[usize; 9]) -> Result<Sample, String> {
    let f = |i: usize| rec.get(idx[i]).unwrap_or("");
    let longitude: f64 = f(3)
        .parse()
        .map_err(|_| format!("bad longitude_deg `{}`", f(3)))?;
    if !(-90.0..=90.0).contains(&longitude) {
        return Err(format!("longitude_deg {longitude} outside [-90, 90]"));
    }
    let flare_class = match f(5) {
        "" => None,
        s => Some(s.parse::<FlareClass>()?),
    };
    let label = match f(6) {
        "" => None,
        s => Some(s.parse::<BinaryLabel>()?),
    };
    if label != flare_class.map(FlareClass::binary_label) {
        return Err(format!(
            "label `{}` is inconsistent with flare_class `{}`",
            f(6),
            f(5)
        ));
    }
    let partition = match f(7) {
        "" => None,
        s => Some(
            s.parse::<u8>()
                .ok()
                .and_then(Partition::new)
                .ok_or_else(|| format!("bad partition `{s}`"))?,
        ),
    };
    let augmented = match f(8).to_ascii_lowercase().as_str() {
        "true" | "1" => true,
        "false" | "0" | "" => false,
        other => return Err(format!("bad augmented flag `{other}`")),
    };
    if f(0).is_empty() {
        return Err("empty sample_id".into());
    }
    Ok(Sample {
        sample_id: f(0).to_string(),
        ar_id: f(1).to_string(),
        observation_time: parse_time(f(2))?,
        longitude,
        raster_path: f(4).to_string(),
        flare_class,
        partition,
        augmented,
    })
}

pub fn read_manifest<R: io::Read>(reader: R) -> Result<Vec<Sample>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(MANIFEST_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(DatasetError::MissingColumn(name))?;
    }
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        samples.push(parse_row(&rec, &idx).map_err(|msg| DatasetError::Parse { line, msg })?);
    }
    Ok(samples)
}

pub fn write_manifest<W: io::Write>(writer: W, samples: &[Sample]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MANIFEST_HEADER)?;
    for s in samples {
        w.write_record([
            s.sample_id.clone(),
            s.ar_id.clone(),
            format_time(&s.observation_time),
            s.longitude.to_string(),
            s.raster_path.clone(),
            s.flare_class.map_or(String::new(), |c| c.to_string()),
            s.label().map_or(String::new(), |l| l.to_string()),
            s.partition.map_or(String::new(), |p| p.to_string()),
            s.augmented.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Sample>, DatasetError> {
    read_manifest(std::fs::File::open(path)?)
}

pub fn save_manifest(path: impl AsRef<Path>, samples: &[Sample]) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    write_manifest(&mut buf, samples)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Class and partition counts of a manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestSummary {
    pub total: usize,
    pub per_class: [usize; 6],
    pub unlabeled: usize,
    /// Index 0 counts samples without a partition.
    pub per_partition: [usize; 5],
    pub augmented: usize,
}

impl ManifestSummary {
    pub fn of(samples: &[Sample]) -> Self {
        let mut s = ManifestSummary {
            total: samples.len(),
            ..Default::default()
        };
        for x in samples {
            match x.flare_class {
                Some(c) => s.per_class[c.rank()] += 1,
                None => s.unlabeled += 1,
            }
            s.per_partition[x.partition.map_or(0, |p| p.get() as usize)] += 1;
            s.augmented += x.augmented as usize;
        }
        s
    }

    pub fn n_fl(&self) -> usize {
        self.per_class[FlareClass::M.rank()] + self.per_class[FlareClass::X.rank()]
    }

    pub fn n_nf(&self) -> usize {
        self.per_class[..4].iter().sum()
    }

    /// NF instances per FL instance, rounded to the nearest integer.
    pub fn imbalance_ratio(&self) -> Option<u64> {
        (self.n_fl() > 0).then(|| (self.n_nf() as f64 / self.n_fl() as f64).round() as u64)
    }
}

impl fmt::Display for ManifestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples: {}", self.total)?;
        for c in FlareClass::ALL {
            writeln!(f, "class {}: {}", c, self.per_class[c.rank()])?;
        }
        if self.unlabeled > 0 {
            writeln!(f, "unlabeled: {}", self.unlabeled)?;
        }
        writeln!(f, "FL: {}  NF: {}", self.n_fl(), self.n_nf())?;
        match self.imbalance_ratio() {
            Some(r) => writeln!(f, "imbalance ratio 1:{r}")?,
            None => writeln!(f, "imbalance ratio undefined (no FL samples)")?,
        }
        for p in 1..=4 {
            writeln!(f, "partition {p}: {}", self.per_partition[p])?;
        }
        if self.per_partition[0] > 0 {
            writeln!(f, "unpartitioned: {}", self.per_partition[0])?;
        }
        write!(f, "augmented: {}", self.augmented)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> DateTime<Utc> {
        parse_time(s).unwrap()
    }

    fn sample(id: &str, ar: &str, time: &str, class: Option<FlareClass>) -> Sample {
        Sample {
            sample_id: id.into(),
            ar_id: ar.into(),
            observation_time: t(time),
            longitude: 12.5,
            raster_path: format!("{id}.mgr"),
            flare_class: class,
            partition: None,
            augmented: false,
        }
    }

    #[test]
    fn flux_buckets() {
        assert_eq!(flux_to_class(2e-5).unwrap(), FlareClass::M);
        assert_eq!(flux_to_class(5e-7).unwrap(), FlareClass::B);
        assert_eq!(flux_to_class(5e-6).unwrap(), FlareClass::C);
        assert_eq!(flux_to_class(1e-8).unwrap(), FlareClass::FQ);
        assert_eq!(flux_to_class(1.1e-8).unwrap(), FlareClass::A);
        assert_eq!(flux_to_class(1e-4).unwrap(), FlareClass::M);
        assert_eq!(flux_to_class(3e-4).unwrap(), FlareClass::X);
        assert!(flux_to_class(0.0).is_err());
        assert!(flux_to_class(-1e-6).is_err());
    }

    #[test]
    fn flux_monotone() {
        let mut prev = FlareClass::FQ;
        let mut f = 1e-10;
        while f < 1e-2 {
            let c = flux_to_class(f).unwrap();
            assert!(c >= prev);
            prev = c;
            f *= 1.07;
        }
    }

    fn event(ar: &str, time: &str, flux: f64) -> CatalogEvent {
        CatalogEvent {
            ar_id: ar.into(),
            start_time: t(time),
            peak_flux: flux,
        }
    }

    #[test]
    fn labeling_window() {
        let obs = t("2014-01-01T00:00:00Z");
        let cat = Catalog::new([event("7115", "2014-01-01T05:00:00Z", 1.2e-5)]).unwrap();
        assert_eq!(
            label_sample(obs, "7115", &cat),
            (FlareClass::M, BinaryLabel::Fl)
        );

        let cat = Catalog::new([
            event("1", "2014-01-01T03:00:00Z", 9e-6),
            event("1", "2014-01-01T20:00:00Z", 2e-7),
        ])
        .unwrap();
        assert_eq!(
            label_sample(obs, "1", &cat),
            (FlareClass::C, BinaryLabel::Nf)
        );
        assert_eq!(
            label_sample(obs, "2", &cat),
            (FlareClass::FQ, BinaryLabel::Nf)
        );

        // window is (obs, obs + 24h]
        let cat = Catalog::new([
            event("1", "2014-01-01T00:00:00Z", 5e-4),
            event("1", "2014-01-02T00:00:01Z", 5e-4),
        ])
        .unwrap();
        assert_eq!(label_sample(obs, "1", &cat).0, FlareClass::FQ);
        let cat = Catalog::new([event("1", "2014-01-02T00:00:00Z", 5e-4)]).unwrap();
        assert_eq!(label_sample(obs, "1", &cat).0, FlareClass::X);
    }

    #[test]
    fn labeling_is_monotone_in_events() {
        let obs = t("2015-06-01T12:00:00Z");
        let mut events = vec![event("9", "2015-06-01T13:00:00Z", 3e-8)];
        let mut prev = label_sample(obs, "9", &Catalog::new(events.clone()).unwrap()).0;
        for (h, flux) in [
            (2, 1e-7),
            (5, 5e-9),
            (10, 4e-6),
            (30, 1e-3),
            (23, 2e-7),
            (24, 2e-5),
        ] {
            events.push(event(
                "9",
                &format!(
                    "2015-06-{:02}T{:02}:00:00Z",
                    1 + (12 + h) / 24,
                    (12 + h) % 24
                ),
                flux,
            ));
            let c = label_sample(obs, "9", &Catalog::new(events.clone()).unwrap()).0;
            assert!(c >= prev);
            prev = c;
        }
        assert_eq!(prev, FlareClass::M);
    }

    #[test]
    fn quarter_partitions() {
        assert_eq!(partition(t("2012-05-14T00:00:00Z")).get(), 2);
        assert_eq!(partition(t("2017-12-31T23:59:59Z")).get(), 4);
        assert_eq!(partition(t("2011-01-01T00:00:00Z")).get(), 1);
        assert_eq!(partition(t("2011-09-30T00:00:00Z")).get(), 3);
    }

    #[test]
    fn ar_inherits_onset_partition() {
        let mut s = vec![
            sample("a1", "100", "2012-03-31T22:00:00Z", None),
            sample("a2", "100", "2012-04-02T10:00:00Z", None),
            sample("b1", "200", "2012-04-05T00:00:00Z", None),
        ];
        assign_partitions(&mut s);
        assert_eq!(s[0].partition, s[1].partition);
        assert_eq!(s[1].partition.unwrap().get(), 1);
        assert_eq!(s[2].partition.unwrap().get(), 2);
    }

    #[test]
    fn undersample_behaviour() {
        let spec = UndersampleSpec {
            seed: 11,
            ..Default::default()
        };
        let fl: Vec<Sample> = (0..5)
            .map(|i| {
                sample(
                    &format!("m{i}"),
                    "1",
                    "2012-01-01T00:00:00Z",
                    Some(FlareClass::M),
                )
            })
            .collect();
        assert_eq!(undersample(&fl, &spec).unwrap(), fl);

        let fq: Vec<Sample> = (0..10_000)
            .map(|i| {
                sample(
                    &format!("q{i}"),
                    "1",
                    "2012-01-01T00:00:00Z",
                    Some(FlareClass::FQ),
                )
            })
            .collect();
        let kept = undersample(&fq, &spec).unwrap();
        assert!((700..=900).contains(&kept.len()), "kept {}", kept.len());
        assert_eq!(kept, undersample(&fq, &spec).unwrap());

        let bad = UndersampleSpec { a: 0.0, ..spec };
        assert!(matches!(
            undersample(&fq, &bad),
            Err(DatasetError::InvalidRate { .. })
        ));
        let unlabeled = [sample("u", "1", "2012-01-01T00:00:00Z", None)];
        assert!(undersample(&unlabeled, &spec).is_err());
    }

    #[test]
    fn roles() {
        let mut s: Vec<Sample> = ["01", "05", "08", "11"]
            .iter()
            .enumerate()
            .map(|(i, m)| {
                sample(
                    &format!("s{i}"),
                    &format!("ar{i}"),
                    &format!("2013-{m}-10T00:00:00Z"),
                    Some(FlareClass::B),
                )
            })
            .collect();
        assign_partitions(&mut s);
        let split = split_roles(&s).unwrap();
        assert_eq!(split.train.len(), 2);
        assert_eq!(split.validation[0].sample_id, "s2");
        assert_eq!(split.test[0].sample_id, "s3");

        s.pop();
        assert!(matches!(
            split_roles(&s),
            Err(DatasetError::MissingPartition(4))
        ));
        s[0].partition = None;
        assert!(matches!(
            split_roles(&s),
            Err(DatasetError::Unpartitioned(_))
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let mut s = vec![
            sample("a", "7115", "2017-09-06T06:00:00Z", Some(FlareClass::X)),
            sample("b", "7115", "2017-09-06T07:00:00Z", Some(FlareClass::FQ)),
            sample("c, quoted", "12", "2011-02-01T00:00:00.5Z", None),
        ];
        s[0].longitude = -87.123456789;
        s[1].augmented = true;
        s[1].partition = Partition::new(3);
        let mut buf = Vec::new();
        write_manifest(&mut buf, &s).unwrap();
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), s);

        let header_only = MANIFEST_HEADER.join(",") + "\n";
        assert!(read_manifest(header_only.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn manifest_errors_name_the_line() {
        let text = format!(
            "{}\na,1,2012-01-01T00:00:00Z,0,a.mgr,M,FL,1,false\nb,1,2012-01-01T00:00:00Z,0,b.mgr,C,FL,1,false\n",
            MANIFEST_HEADER.join(",")
        );
        match read_manifest(text.as_bytes()) {
            Err(DatasetError::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("inconsistent"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = format!(
            "{}\na,1,yesterday,0,a.mgr,,,,false\n",
            MANIFEST_HEADER.join(",")
        );
        assert!(matches!(
            read_manifest(text.as_bytes()),
            Err(DatasetError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_manifest("sample_id,ar_id\n".as_bytes()),
            Err(DatasetError::MissingColumn(_))
        ));
    }

    #[test]
    fn summary_reports_imbalance() {
        let mut s = Vec::new();
        for i in 0..49 {
            s.push(sample(
                &format!("n{i}"),
                "1",
                "2012-01-01T00:00:00Z",
                Some(FlareClass::B),
            ));
        }
        s.push(sample(
            "f",
            "1",
            "2012-01-01T00:00:00Z",
            Some(FlareClass::X),
        ));
        let summary = ManifestSummary::of(&s);
        assert_eq!(summary.imbalance_ratio(), Some(49));
        assert!(summary.to_string().contains("imbalance ratio 1:49"));
    }
}
