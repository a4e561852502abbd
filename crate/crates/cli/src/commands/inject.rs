//! `inject` — corrupt a query dataset with simulated feature changes.
//!
//! A single change specification writes `injected/queries.csv` plus the
//! per-feature ground truth `injected/labels.csv`; `--full-grid` writes one
//! subdirectory per specification of the evaluation grid (every
//! missing/shift combination with a total ratio of at most 50%) plus a
//! `specs.csv` index.

use std::path::Path;

use rfm_core::simulate::{ChangeKind, FeatureLabel};
use rfm_core::{
    change_grid, inject_changes, read_fingerprints, write_wide_csv, ChangeSpec, ChangeStatus,
    DatasetFormat, GlobalFeatureRegistry, LabeledFingerprint, Result, MISSING_DBM,
};

use crate::config::RunConfig;
use crate::report::{csv_writer, finish_csv, fmt_f64, write_record};

/// What to inject: one specification or the whole evaluation grid.
pub enum Mode {
    Single {
        missing_ratio: f64,
        shift_ratio: f64,
        shift_dbm: f64,
    },
    FullGrid,
}

pub fn run(
    cfg: &RunConfig,
    out_dir: &Path,
    dataset: &Path,
    format: DatasetFormat,
    mode: Mode,
) -> Result<()> {
    let ingest = read_fingerprints(dataset, format)?;
    let points = ingest.points;
    let registry = ingest.registry;
    match mode {
        Mode::Single {
            missing_ratio,
            shift_ratio,
            shift_dbm,
        } => {
            let spec = ChangeSpec {
                missing_ratio,
                shift_ratio,
                shift_dbm,
                seed: cfg.seed,
            };
            spec.validate()?;
            write_injected(&out_dir.join("injected"), &points, &registry, &spec)?;
            println!("inject: 1 spec x {} queries", points.len());
        }
        Mode::FullGrid => {
            let specs = change_grid(cfg.seed);
            let index_path = out_dir.join("specs.csv");
            let mut index = csv_writer(&index_path)?;
            write_record(
                &mut index,
                &index_path,
                ["name", "missing_ratio", "shift_ratio", "shift_dbm"],
            )?;
            for spec in &specs {
                let name = spec_name(spec);
                write_record(
                    &mut index,
                    &index_path,
                    [
                        name.clone(),
                        fmt_f64(spec.missing_ratio),
                        fmt_f64(spec.shift_ratio),
                        fmt_f64(spec.shift_dbm),
                    ],
                )?;
                write_injected(&out_dir.join("injected").join(&name), &points, &registry, spec)?;
            }
            finish_csv(index)?;
            println!("inject: {} specs x {} queries", specs.len(), points.len());
        }
    }
    Ok(())
}

/// Directory-safe specification name, e.g. `m30-s20-d-15`.
fn spec_name(spec: &ChangeSpec) -> String {
    format!(
        "m{:02}-s{:02}-d{}",
        (spec.missing_ratio * 100.0).round() as i64,
        (spec.shift_ratio * 100.0).round() as i64,
        spec.shift_dbm.round() as i64,
    )
}

/// Injects every query with `spec` and writes the pair of output files.
fn write_injected(
    dir: &Path,
    points: &[LabeledFingerprint],
    registry: &GlobalFeatureRegistry,
    spec: &ChangeSpec,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut injected_points = Vec::with_capacity(points.len());
    let labels_path = dir.join("labels.csv");
    let mut labels = csv_writer(&labels_path)?;
    write_record(
        &mut labels,
        &labels_path,
        ["sample_id", "feature", "status", "kind"],
    )?;
    for (sample_id, point) in points.iter().enumerate() {
        let injected = inject_changes(&point.fingerprint, spec, sample_id as u64)?;
        for (feature, label) in injected.labels.iter() {
            write_record(
                &mut labels,
                &labels_path,
                [
                    sample_id.to_string(),
                    feature.to_string(),
                    status_str(label).to_string(),
                    kind_str(label).to_string(),
                ],
            )?;
        }
        injected_points.push(LabeledFingerprint {
            location: point.location,
            fingerprint: injected.fingerprint,
            block: point.block,
            timestamp: point.timestamp,
        });
    }
    finish_csv(labels)?;
    // Keep the original column order so every spec shares one schema.
    write_wide_csv(&dir.join("queries.csv"), &injected_points, registry, MISSING_DBM)
}

fn status_str(label: &FeatureLabel) -> &'static str {
    match label.status {
        ChangeStatus::Stable => "stable",
        ChangeStatus::Changed => "changed",
    }
}

fn kind_str(label: &FeatureLabel) -> &'static str {
    match label.kind {
        None => "",
        Some(ChangeKind::Missing) => "missing",
        Some(ChangeKind::Shifted) => "shifted",
    }
}
