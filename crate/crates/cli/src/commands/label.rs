//! `label` — ground-truth change labels for long-term survey data.
//!
//! Samples are grouped by exact location and time block. Per location,
//! block, and feature, the block's values (the missing indicator standing
//! in when a sample did not measure the feature) are reduced to robust
//! center/spread statistics; each block is then labeled against the
//! location's reference block (the lowest block id unless overridden).
//! Emits `block-labels.csv`.

use std::collections::BTreeMap;
use std::path::Path;

use rfm_core::{
    read_fingerprints, robust_stats, BlockStats, ChangeStatus, DatasetFormat, Error, FeatureId,
    LabeledFingerprint, Result, label_inter_block, MISSING_DBM,
};

use crate::config::RunConfig;
use crate::report::{csv_writer, finish_csv, fmt_f64, write_record};

pub fn run(
    _cfg: &RunConfig,
    out_dir: &Path,
    dataset: &Path,
    format: DatasetFormat,
    reference_block: Option<u32>,
) -> Result<()> {
    let ingest = read_fingerprints(dataset, format)?;
    let groups = group_by_location(&ingest.points)?;

    let path = out_dir.join("block-labels.csv");
    let mut writer = csv_writer(&path)?;
    write_record(
        &mut writer,
        &path,
        [
            "x",
            "y",
            "block",
            "feature",
            "center_dbm",
            "spread_dbm",
            "count",
            "status",
        ],
    )?;

    let mut changed_rows = 0usize;
    let mut total_rows = 0usize;
    for group in &groups {
        let reference = match reference_block {
            Some(block) => block,
            None => *group.blocks.keys().next().expect("group holds >= 1 block"),
        };
        let reference_samples = group.blocks.get(&reference).ok_or_else(|| {
            Error::InvalidInput(format!(
                "reference block {reference} has no samples at ({}, {})",
                group.location[0], group.location[1]
            ))
        })?;
        // Every feature seen anywhere at this location is labeled in every
        // block; absence is an observation (the missing indicator), so a
        // transmitter that vanished in one epoch still gets statistics.
        let features: Vec<&FeatureId> = group.features.iter().copied().collect();
        let mut reference_stats: BTreeMap<&FeatureId, BlockStats> = BTreeMap::new();
        for feature in &features {
            reference_stats.insert(feature, block_stats(reference_samples, feature)?);
        }
        for (&block, samples) in &group.blocks {
            for feature in &features {
                let stats = if block == reference {
                    reference_stats[feature]
                } else {
                    block_stats(samples, feature)?
                };
                let status = if block == reference {
                    ChangeStatus::Stable
                } else {
                    label_inter_block(&stats, &reference_stats[feature])
                };
                total_rows += 1;
                changed_rows += usize::from(status.is_changed());
                write_record(
                    &mut writer,
                    &path,
                    [
                        fmt_f64(group.location[0]),
                        fmt_f64(group.location[1]),
                        block.to_string(),
                        feature.to_string(),
                        fmt_f64(stats.center_dbm),
                        fmt_f64(stats.spread_dbm),
                        stats.count.to_string(),
                        status_str(status).to_string(),
                    ],
                )?;
            }
        }
    }
    finish_csv(writer)?;
    println!(
        "label: {} locations, {} labels ({} changed)",
        groups.len(),
        total_rows,
        changed_rows
    );
    Ok(())
}

/// All samples of one surveyed location, split by block.
struct LocationGroup<'a> {
    location: [f64; 2],
    blocks: BTreeMap<u32, Vec<&'a LabeledFingerprint>>,
    features: std::collections::BTreeSet<&'a FeatureId>,
}

/// Groups samples by exact location, in first-seen order.
fn group_by_location(points: &[LabeledFingerprint]) -> Result<Vec<LocationGroup<'_>>> {
    let mut order: Vec<(u64, u64)> = Vec::new();
    let mut groups: BTreeMap<(u64, u64), LocationGroup<'_>> = BTreeMap::new();
    for point in points {
        let block = point.block.ok_or_else(|| {
            Error::InvalidInput("labeling requires a block column on every sample".into())
        })?;
        let key = (point.location[0].to_bits(), point.location[1].to_bits());
        let group = groups.entry(key).or_insert_with(|| {
            order.push(key);
            LocationGroup {
                location: point.location,
                blocks: BTreeMap::new(),
                features: std::collections::BTreeSet::new(),
            }
        });
        group.blocks.entry(block).or_default().push(point);
        group.features.extend(point.fingerprint.features());
    }
    Ok(order
        .into_iter()
        .map(|key| groups.remove(&key).expect("ordered key exists"))
        .collect())
}

/// Robust statistics of one feature over one block's samples.
fn block_stats(samples: &[&LabeledFingerprint], feature: &FeatureId) -> Result<BlockStats> {
    let values: Vec<f64> = samples
        .iter()
        .map(|s| s.fingerprint.get(feature).unwrap_or(MISSING_DBM))
        .collect();
    robust_stats(&values)
}

fn status_str(status: ChangeStatus) -> &'static str {
    match status {
        ChangeStatus::Stable => "stable",
        ChangeStatus::Changed => "changed",
    }
}
