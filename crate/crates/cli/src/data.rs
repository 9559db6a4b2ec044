use std::collections::BTreeSet;

use flarecast_core::dataset::{
    assign_partitions, label_all, undersample as thin, Catalog, ManifestSummary, Role,
    UndersampleSpec,
};

use crate::error::{CliError, CliResult};
use crate::io::{read_manifest, write_manifest};
use crate::{LabelArgs, ReportArgs, SplitArgs, UndersampleArgs};

pub fn label(a: &LabelArgs) -> CliResult<()> {
    let catalog =
        Catalog::load(&a.catalog).map_err(|e| CliError::from(e).context(a.catalog.display()))?;
    let mut samples = read_manifest(&a.manifest)?;
    label_all(&mut samples, &catalog);
    write_manifest(&a.manifest, &samples)?;
    print!("{}", ManifestSummary::of(&samples));
    Ok(())
}

pub fn split(a: &SplitArgs) -> CliResult<()> {
    let mut samples = read_manifest(&a.manifest)?;
    assign_partitions(&mut samples);
    write_manifest(&a.manifest, &samples)?;
    let summary = ManifestSummary::of(&samples);
    for p in 1..=4 {
        let n = summary.per_partition[p];
        if n == 0 {
            log::warn!("partition {p} is empty");
        }
        println!("partition {p}: {n}");
    }
    Ok(())
}

pub fn undersample(a: &UndersampleArgs) -> CliResult<()> {
    let spec = UndersampleSpec {
        fq: a.fq,
        a: a.abc,
        b: a.abc,
        c: a.abc,
        seed: a.seed,
    };
    spec.validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let samples = read_manifest(&a.manifest)?;
    let mut train = Vec::new();
    for s in &samples {
        let p = s.partition.ok_or_else(|| {
            CliError::data(format!(
                "sample `{}` has no partition; run `split` first",
                s.sample_id
            ))
        })?;
        if Role::of(p) == Role::Train {
            train.push(s.clone());
        }
    }
    let kept: BTreeSet<String> = thin(&train, &spec)?
        .into_iter()
        .map(|s| s.sample_id)
        .collect();
    let out: Vec<_> = samples
        .iter()
        .filter(|s| s.partition.map(Role::of) != Some(Role::Train) || kept.contains(&s.sample_id))
        .cloned()
        .collect();
    write_manifest(a.out.as_deref().unwrap_or(&a.manifest), &out)?;
    println!(
        "training partitions: kept {} of {} samples",
        kept.len(),
        train.len()
    );
    print!("{}", ManifestSummary::of(&out));
    Ok(())
}

pub fn report(a: &ReportArgs) -> CliResult<()> {
    let samples = read_manifest(&a.manifest)?;
    print!("{}", ManifestSummary::of(&samples));
    Ok(())
}
