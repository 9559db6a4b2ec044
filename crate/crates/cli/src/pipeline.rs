use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use flarecast_core::augment::augment_all;
use flarecast_core::dataset::{Role, Sample};
use flarecast_core::preprocess::{scale_to_bytes_with_cap, Outcome, Pipeline};
use flarecast_core::{BitmapMask, Raster};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::io::{manifest_relative, read_manifest, resolve, write_manifest};
use crate::{AugmentArgs, OnlyClass, PreprocessArgs};

pub const PREPROCESS_LOG: &str = "preprocess_log.csv";

/// Stems of `*.mgr` files in `dir`, sorted.
fn raster_stems(dir: &Path) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::from(e).context(dir.display()))?;
    let mut stems = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("mgr") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn process_one(pipeline: &Pipeline, input: &Path, out: &Path, stem: &str) -> CliResult<Outcome> {
    let mgr = input.join(format!("{stem}.mgr"));
    let msk = input.join(format!("{stem}.msk"));
    if !msk.exists() {
        return Err(CliError::data(format!(
            "no mask {} for {}",
            msk.display(),
            mgr.display()
        )));
    }
    let raster = Raster::read_mgr(&mgr).map_err(|e| CliError::from(e).context(mgr.display()))?;
    let mask = BitmapMask::read_msk(&msk).map_err(|e| CliError::from(e).context(msk.display()))?;
    let outcome = pipeline
        .process(&raster, &mask)
        .map_err(|e| CliError::from(e).context(stem))?;
    if let Outcome::Kept { raster, image, .. } = &outcome {
        raster.write_mgr(out.join(format!("{stem}.mgr")))?;
        image.write_pgm(out.join(format!("{stem}.pgm")))?;
    }
    Ok(outcome)
}

pub fn preprocess(a: &PreprocessArgs) -> CliResult<()> {
    let pipeline = Pipeline {
        min_width: a.min_width,
        cap: a.cap,
        noise_floor: a.noise_floor,
        ..Pipeline::default()
    };
    pipeline.validate()?;
    fs::create_dir_all(&a.out)?;
    if same_dir(&a.input, &a.out) {
        return Err(CliError::usage("--out must differ from --in"));
    }
    let stems = raster_stems(&a.input)?;
    if stems.is_empty() {
        return Err(CliError::data(format!(
            "no .mgr rasters in {}",
            a.input.display()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let results: Vec<CliResult<Outcome>> = pool.install(|| {
        stems
            .par_iter()
            .map(|stem| process_one(&pipeline, &a.input, &a.out, stem))
            .collect()
    });

    let mut log = csv::Writer::from_path(a.out.join(PREPROCESS_LOG))?;
    log.write_record(["stem", "status", "crop_width", "crop_height"])?;
    let mut kept = BTreeMap::new();
    for (stem, r) in stems.iter().zip(results) {
        let (status, w, h, path) = match r? {
            Outcome::Kept {
                crop_width,
                crop_height,
                ..
            } => (
                "kept",
                crop_width,
                crop_height,
                Some(a.out.join(format!("{stem}.mgr"))),
            ),
            Outcome::Dropped {
                crop_width,
                crop_height,
            } => ("dropped", crop_width, crop_height, None),
        };
        log.write_record([stem.as_str(), status, &w.to_string(), &h.to_string()])?;
        kept.insert(stem.clone(), path);
    }
    log.flush()?;
    let n_kept = kept.values().filter(|p| p.is_some()).count();
    println!(
        "processed {}: kept {n_kept}, dropped {}",
        kept.len(),
        kept.len() - n_kept
    );

    if let Some(manifest) = &a.manifest {
        update_manifest(manifest, &kept)?;
    }
    Ok(())
}

/// Points samples at their processed rasters and removes dropped ones.
fn update_manifest(manifest: &Path, kept: &BTreeMap<String, Option<PathBuf>>) -> CliResult<()> {
    let samples = read_manifest(manifest)?;
    let mut out = Vec::with_capacity(samples.len());
    let mut untouched = 0;
    for mut s in samples {
        let stem = Path::new(&s.raster_path)
            .file_stem()
            .and_then(|x| x.to_str())
            .unwrap_or("")
            .to_string();
        match kept.get(&stem) {
            Some(Some(path)) => {
                s.raster_path = manifest_relative(manifest, path)?;
                out.push(s);
            }
            Some(None) => log::info!("dropping sample {} (patch too narrow)", s.sample_id),
            None => {
                untouched += 1;
                out.push(s);
            }
        }
    }
    if untouched > 0 {
        log::warn!("{untouched} manifest samples have no matching input raster");
    }
    write_manifest(manifest, &out)
}

fn augmentable(s: &Sample, only: OnlyClass) -> CliResult<bool> {
    if s.augmented {
        return Ok(false);
    }
    if let Some(p) = s.partition {
        if Role::of(p) != Role::Train {
            return Ok(false);
        }
    }
    Ok(match only {
        OnlyClass::All => true,
        OnlyClass::Fl => s
            .flare_class
            .ok_or_else(|| {
                CliError::data(format!(
                    "sample `{}` is unlabeled; run `label` first",
                    s.sample_id
                ))
            })?
            .is_flare(),
    })
}

pub fn augment(a: &AugmentArgs) -> CliResult<()> {
    if !(a.cap.is_finite() && a.cap > 0.0) {
        return Err(CliError::usage(format!(
            "cap must be positive, got {}",
            a.cap
        )));
    }
    let samples = read_manifest(&a.manifest)?;
    fs::create_dir_all(&a.out)?;
    let mut fresh = Vec::new();
    for s in &samples {
        if !augmentable(s, a.only_class)? {
            continue;
        }
        let src = resolve(&a.manifest, &s.raster_path);
        if src.extension().and_then(|e| e.to_str()) != Some("mgr") {
            return Err(CliError::data(format!(
                "sample `{}`: augmentation needs a processed .mgr raster, got {}",
                s.sample_id,
                src.display()
            )));
        }
        let raster =
            Raster::read_mgr(&src).map_err(|e| CliError::from(e).context(src.display()))?;
        for (kind, r) in augment_all(&raster, &s.sample_id, a.seed, a.cap)? {
            let id = format!("{}{}", s.sample_id, kind.suffix());
            let mgr = a.out.join(format!("{id}.mgr"));
            r.write_mgr(&mgr)?;
            scale_to_bytes_with_cap(&r, a.cap)?.write_pgm(a.out.join(format!("{id}.pgm")))?;
            fresh.push(Sample {
                sample_id: id,
                raster_path: manifest_relative(&a.manifest, &mgr)?,
                augmented: true,
                ..s.clone()
            });
        }
    }
    let new_ids: BTreeSet<&str> = fresh.iter().map(|s| s.sample_id.as_str()).collect();
    let mut out: Vec<Sample> = samples.iter().filter(|s| !s.augmented).cloned().collect();
    out.extend(
        samples
            .iter()
            .filter(|s| s.augmented && !new_ids.contains(s.sample_id.as_str()))
            .cloned(),
    );
    let n_new = fresh.len();
    out.extend(fresh);
    write_manifest(&a.manifest, &out)?;
    println!("wrote {n_new} augmented samples");
    Ok(())
}
