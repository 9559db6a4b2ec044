//! Side-by-side BCE vs. ordinal-loss comparison over several seeds.

use std::io::Write;

use rayon::prelude::*;

use super::{gen_synthetic, predict, train, SyntheticSpec, TrainConfig, TrainError};
use crate::metrics::{zone_report, SkillReport, ZoneSpec, REPORT_HEADER};

pub const MIN_SEEDS: usize = 5;

/// Columns that precede the zone-report columns in the comparison CSV.
pub const COMPARE_HEADER_PREFIX: [&str; 2] = ["seed", "loss"];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub seed: u64,
    pub loss: &'static str,
    pub report: SkillReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedDelta {
    pub seed: u64,
    pub threshold_bce: f64,
    pub threshold_bce_sf: f64,
    pub css_bce: f64,
    pub css_bce_sf: f64,
}

impl SeedDelta {
    pub fn delta(&self) -> f64 {
        self.css_bce_sf - self.css_bce
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// One row per (seed, loss, zone), seeds in input order.
    pub rows: Vec<ComparisonRow>,
    /// Full-disk test CSS per seed.
    pub deltas: Vec<SeedDelta>,
}

impl ComparisonReport {
    pub fn mean_delta(&self) -> f64 {
        self.deltas.iter().map(SeedDelta::delta).sum::<f64>() / self.deltas.len() as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COMPARE_HEADER_PREFIX.iter().chain(REPORT_HEADER.iter()))?;
        for row in &self.rows {
            let mut rec = vec![row.seed.to_string(), row.loss.to_string()];
            rec.extend(row.report.csv_fields());
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct SeedResult {
    rows: Vec<ComparisonRow>,
    delta: SeedDelta,
}

fn run_seed(
    seed: u64,
    cfg_bce: &TrainConfig,
    cfg_bcesf: &TrainConfig,
    spec: &SyntheticSpec,
    zones: &[ZoneSpec],
) -> Result<SeedResult, TrainError> {
    let data = gen_synthetic(&SyntheticSpec {
        seed,
        ..spec.clone()
    })?;
    let lons: Vec<f64> = data.test.iter().map(|e| e.longitude).collect();
    let labels: Vec<u8> = data.test.iter().map(|e| e.target()).collect();

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for cfg in [cfg_bce, cfg_bcesf] {
        let cfg = TrainConfig {
            seed,
            ..cfg.clone()
        };
        let loss = cfg.loss_kind()?.name();
        let outcome = train(&cfg, &data.train, &data.validation)?;
        let scores = predict(&outcome.scorer, &data.test)?;
        let full = zone_report(
            &lons,
            &scores,
            &labels,
            outcome.threshold,
            &[ZoneSpec::full_disk()],
        )?;
        summary.push((outcome.threshold, full[0].scores.css.unwrap_or(0.0)));
        for report in zone_report(&lons, &scores, &labels, outcome.threshold, zones)? {
            rows.push(ComparisonRow { seed, loss, report });
        }
    }
    Ok(SeedResult {
        rows,
        delta: SeedDelta {
            seed,
            threshold_bce: summary[0].0,
            threshold_bce_sf: summary[1].0,
            css_bce: summary[0].1,
            css_bce_sf: summary[1].1,
        },
    })
}

/// For every seed: generate data, train both configurations with that seed,
/// calibrate each on validation and score the test split per zone. Seeds run
/// in parallel; results are merged in input order.
pub fn compare_protocol(
    seeds: &[u64],
    cfg_bce: &TrainConfig,
    cfg_bcesf: &TrainConfig,
    spec: &SyntheticSpec,
    zones: &[ZoneSpec],
) -> Result<ComparisonReport, TrainError> {
    if seeds.len() < MIN_SEEDS {
        return Err(TrainError::Config(format!(
            "at least {MIN_SEEDS} seeds are required, got {}",
            seeds.len()
        )));
    }
    if zones.is_empty() {
        return Err(TrainError::Config("no evaluation zones".into()));
    }
    let results: Vec<Result<SeedResult, TrainError>> = seeds
        .par_iter()
        .map(|&seed| {
            run_seed(seed, cfg_bce, cfg_bcesf, spec, zones).map_err(|e| TrainError::Seed {
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    let mut report = ComparisonReport {
        rows: Vec::new(),
        deltas: Vec::new(),
    };
    for r in results {
        let r = r?;
        report.rows.extend(r.rows);
        report.deltas.push(r.delta);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::LossChoice;

    fn quick(loss: LossChoice) -> TrainConfig {
        TrainConfig {
            initial_lr: 0.5,
            weight_decay: 0.0,
            batch_size: 16,
            epochs: 8,
            alpha: 1.0,
            loss,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn noiseless_data_hits_the_ceiling() {
        let spec = SyntheticSpec {
            counts: [20, 10, 10, 10, 10, 5],
            noise: 0.0,
            dim: 2,
            means: [0.0, 1.0, 2.0, 3.0, 6.0, 7.0],
            seed: 0,
        };
        let zones = ZoneSpec::parse_list("30,60,90").unwrap();
        let r = compare_protocol(
            &[1, 2, 3, 4, 5],
            &quick(LossChoice::Bce),
            &quick(LossChoice::BceSf),
            &spec,
            &zones,
        )
        .unwrap();
        assert_eq!(r.rows.len(), 5 * 2 * 3);
        for d in &r.deltas {
            assert_eq!((d.css_bce, d.css_bce_sf), (1.0, 1.0));
        }
        assert_eq!(r.mean_delta(), 0.0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("seed,loss,zone_lo,zone_hi,mode,threshold,"));
        assert_eq!(text.lines().count(), 31);
    }

    #[test]
    fn needs_five_seeds() {
        let r = compare_protocol(
            &[1, 2],
            &quick(LossChoice::Bce),
            &quick(LossChoice::BceSf),
            &SyntheticSpec::default(),
            &[ZoneSpec::full_disk()],
        );
        assert!(matches!(r, Err(TrainError::Config(_))));
    }

    #[test]
    fn failures_name_the_seed() {
        let spec = SyntheticSpec {
            counts: [5, 0, 0, 0, 0, 0],
            ..SyntheticSpec::default()
        };
        let r = compare_protocol(
            &[9, 8, 7, 6, 5],
            &quick(LossChoice::Bce),
            &quick(LossChoice::BceSf),
            &spec,
            &[ZoneSpec::full_disk()],
        );
        match r {
            Err(TrainError::Seed { seed, .. }) => assert_eq!(seed, 9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
