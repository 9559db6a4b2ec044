use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use flarecast_core::dataset::{load_manifest, save_manifest, Sample};
use flarecast_core::BinaryLabel;

use crate::error::{CliError, CliResult};

pub fn read_manifest(path: &Path) -> CliResult<Vec<Sample>> {
    load_manifest(path).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn write_manifest(path: &Path, samples: &[Sample]) -> CliResult<()> {
    save_manifest(path, samples).map_err(|e| CliError::from(e).context(path.display()))
}

fn manifest_dir(manifest: &Path) -> PathBuf {
    match manifest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Raster paths in a manifest are relative to the manifest's directory.
pub fn resolve(manifest: &Path, raster_path: &str) -> PathBuf {
    let p = Path::new(raster_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_dir(manifest).join(p)
    }
}

/// Inverse of [`resolve`]: relative to the manifest's directory when the
/// file lives below it, absolute otherwise.
pub fn manifest_relative(manifest: &Path, file: &Path) -> CliResult<String> {
    let file = std::path::absolute(file)?;
    let dir = std::path::absolute(manifest_dir(manifest))?;
    let rel = file
        .strip_prefix(&dir)
        .map(Path::to_path_buf)
        .unwrap_or(file);
    rel.to_str()
        .map(str::to_string)
        .ok_or_else(|| CliError::data(format!("non-UTF-8 path {}", rel.display())))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::data(format!("{}: missing column `{name}`", path.display())))
}

/// `sample_id,score` rows, in file order. Duplicate ids are an error.
pub fn read_scores(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let headers = rdr.headers()?.clone();
    let (id, sc) = (
        column(&headers, "sample_id", path)?,
        column(&headers, "score", path)?,
    );
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let sample = rec.get(id).unwrap_or("").to_string();
        let raw = rec.get(sc).unwrap_or("");
        let score: f64 = raw.trim().parse().map_err(|_| {
            CliError::data(format!("{} line {line}: bad score `{raw}`", path.display()))
        })?;
        if !seen.insert(sample.clone()) {
            return Err(CliError::data(format!(
                "{} line {line}: duplicate sample_id `{sample}`",
                path.display()
            )));
        }
        out.push((sample, score));
    }
    Ok(out)
}

pub fn write_scores(path: &Path, rows: &[(String, f64)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id", "score"])?;
    for (id, s) in rows {
        w.write_record([id.as_str(), &format!("{s:?}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `sample_id,label` pairs; extra columns (as in a manifest) are ignored.
pub fn read_labels(path: &Path) -> CliResult<BTreeMap<String, u8>> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| CliError::from(e).context(path.display()))?;
    let headers = rdr.headers()?.clone();
    let (id, lb) = (
        column(&headers, "sample_id", path)?,
        column(&headers, "label", path)?,
    );
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(lb).unwrap_or("").trim();
        let label: BinaryLabel = raw.parse().map_err(|_| {
            CliError::data(format!(
                "{} line {}: bad label `{raw}`",
                path.display(),
                i + 2
            ))
        })?;
        out.insert(rec.get(id).unwrap_or("").to_string(), label.target());
    }
    Ok(out)
}
