use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use flarecast_core::dataset::{Role, Sample};
use flarecast_core::loss::sigmoid;
use flarecast_core::metrics::{sweep_threshold, write_report_csv, zone_report};
use flarecast_core::preprocess::scale_to_bytes;
use flarecast_core::trainer::{
    compare_protocol, pool_features, Example, Scorer, SyntheticSpec, TrainConfig, MIN_SEEDS,
    POOL_GRID,
};
use flarecast_core::{ByteImage, Raster, ZoneSpec};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::io::{read_labels, read_manifest, read_scores, resolve, write_scores};
use crate::{CompareArgs, EvaluateArgs, RoleFilter, ScoreArgs, SweepArgs, TrainArgs};

fn load_config(path: &Path) -> CliResult<TrainConfig> {
    TrainConfig::load(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn parse_zones(s: &str) -> CliResult<Vec<ZoneSpec>> {
    ZoneSpec::parse_list(s).map_err(|e| CliError::usage(format!("--zones: {e}")))
}

/// Pooled features of a sample's image; `.mgr` rasters are byte-scaled first.
fn features(manifest: &Path, s: &Sample) -> CliResult<Vec<f64>> {
    let path = resolve(manifest, &s.raster_path);
    let ctx = |e: CliError| e.context(path.display());
    let image = if path.extension().and_then(|e| e.to_str()) == Some("pgm") {
        ByteImage::read_pgm(&path).map_err(|e| ctx(e.into()))?
    } else {
        let r = Raster::read_mgr(&path).map_err(|e| ctx(e.into()))?;
        scale_to_bytes(&r).map_err(|e| ctx(e.into()))?
    };
    pool_features(&image, POOL_GRID).map_err(|e| ctx(e.into()))
}

fn examples(manifest: &Path, samples: &[&Sample]) -> CliResult<Vec<Example>> {
    samples
        .par_iter()
        .map(|s| {
            Ok(Example {
                features: features(manifest, s)?,
                class: s.require_class()?,
                longitude: s.longitude,
            })
        })
        .collect()
}

fn role_of(s: &Sample) -> CliResult<Role> {
    s.partition.map(Role::of).ok_or_else(|| {
        CliError::data(format!(
            "sample `{}` has no partition; run `split` first",
            s.sample_id
        ))
    })
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let samples = read_manifest(&a.manifest)?;
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for s in &samples {
        match role_of(s)? {
            Role::Train => tr.push(s),
            Role::Validation => va.push(s),
            Role::Test => {}
        }
    }
    let train_set = examples(&a.manifest, &tr)?;
    let val_set = examples(&a.manifest, &va)?;
    let outcome = flarecast_core::trainer::train(&cfg, &train_set, &val_set)?;
    outcome.scorer.save(&a.out, Some(outcome.threshold))?;
    if let Some(path) = &a.history {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["epoch", "train_loss", "val_loss", "lr", "val_css"])?;
        for (i, e) in outcome.history.epochs.iter().enumerate() {
            w.write_record([
                i.to_string(),
                format!("{:?}", e.train_loss),
                format!("{:?}", e.val_loss),
                format!("{:?}", e.lr),
                format!("{:?}", e.val_css),
            ])?;
        }
        w.flush()?;
    }
    println!(
        "trained on {} samples, validated on {}: threshold {:.2}, validation CSS {:.4}",
        train_set.len(),
        val_set.len(),
        outcome.threshold,
        outcome.val_css
    );
    Ok(())
}

pub fn score(a: &ScoreArgs) -> CliResult<()> {
    let (scorer, _) =
        Scorer::load(&a.model).map_err(|e| CliError::from(e).context(a.model.display()))?;
    let samples = read_manifest(&a.manifest)?;
    let wanted = match a.role {
        RoleFilter::All => None,
        RoleFilter::Train => Some(Role::Train),
        RoleFilter::Validation => Some(Role::Validation),
        RoleFilter::Test => Some(Role::Test),
    };
    let mut chosen = Vec::new();
    for s in &samples {
        if wanted.is_none() || Some(role_of(s)?) == wanted {
            chosen.push(s);
        }
    }
    let rows: Vec<(String, f64)> = chosen
        .par_iter()
        .map(|s| {
            let x = features(&a.manifest, s)?;
            let p = sigmoid(scorer.forward(&x)?).map_err(|e| CliError::numeric(e.to_string()))?;
            Ok((s.sample_id.clone(), p))
        })
        .collect::<CliResult<_>>()?;
    write_scores(&a.out, &rows)?;
    println!("scored {} samples", rows.len());
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(CliError::usage(format!(
            "--threshold must lie in (0, 1), got {}",
            a.threshold
        )));
    }
    let zones = parse_zones(&a.zones)?;
    let samples = read_manifest(&a.manifest)?;
    let by_id: BTreeMap<&str, &Sample> =
        samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    let (mut lon, mut score, mut label) = (Vec::new(), Vec::new(), Vec::new());
    for (id, p) in read_scores(&a.scores)? {
        let s = by_id.get(id.as_str()).ok_or_else(|| {
            CliError::data(format!(
                "scored sample `{id}` is not in {}",
                a.manifest.display()
            ))
        })?;
        lon.push(s.longitude);
        score.push(p);
        label.push(s.require_class()?.target());
    }
    let reports = zone_report(&lon, &score, &label, a.threshold, &zones)?;
    write_report_csv(BufWriter::new(File::create(&a.report)?), &reports)?;
    for r in &reports {
        let f = r.csv_fields();
        println!("zone {}: TSS {} HSS {} CSS {}", r.zone, f[8], f[9], f[10]);
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> CliResult<()> {
    let labels = read_labels(&a.labels)?;
    let (mut scores, mut ys) = (Vec::new(), Vec::new());
    for (id, p) in read_scores(&a.scores)? {
        let y = labels.get(&id).ok_or_else(|| {
            CliError::data(format!(
                "no label for sample `{id}` in {}",
                a.labels.display()
            ))
        })?;
        scores.push(p);
        ys.push(*y);
    }
    let result = sweep_threshold(&scores, &ys)?;
    if let Some(path) = &a.table {
        write_report_csv(BufWriter::new(File::create(path)?), &result.table)?;
    }
    println!(
        "best_threshold={:.2} best_css={:.6}",
        result.best_threshold, result.best_css
    );
    Ok(())
}

pub fn compare(a: &CompareArgs) -> CliResult<()> {
    if a.seeds < MIN_SEEDS {
        return Err(CliError::usage(format!(
            "--seeds must be at least {MIN_SEEDS}, got {}",
            a.seeds
        )));
    }
    let zones = parse_zones(&a.zones)?;
    let cfg_bce = load_config(&a.config_bce)?;
    let cfg_sf = load_config(&a.config_bcesf)?;
    let mut spec = SyntheticSpec::default();
    if let Some(noise) = a.noise {
        spec.noise = noise;
    }
    spec.validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| a.seed + i).collect();
    let report = compare_protocol(&seeds, &cfg_bce, &cfg_sf, &spec, &zones)?;
    report.write_csv(BufWriter::new(File::create(&a.report)?))?;
    for d in &report.deltas {
        println!(
            "seed {}: CSS bce {:.4} (t={:.2}) bce-sf {:.4} (t={:.2}) delta {:+.4}",
            d.seed,
            d.css_bce,
            d.threshold_bce,
            d.css_bce_sf,
            d.threshold_bce_sf,
            d.delta()
        );
    }
    println!("mean delta {:+.4}", report.mean_delta());
    Ok(())
}
