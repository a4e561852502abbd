//! `evaluate` — quality metrics of the full pipeline on a query set.
//!
//! Three positioning variants are scored against the queries' surveyed
//! locations: the kNN baseline, the resampling-consensus estimate, and the
//! consensus estimate after dropping features whose change belief reaches
//! the drop threshold. With `--labels` (the ground truth emitted by
//! `inject`), detection quality is scored as well: beliefs are joined to
//! labels per query and feature, yielding an ROC curve, its AUC, and a
//! confusion matrix at the report threshold.
//!
//! Emits `metrics.json`, one ECDF file per variant, and `roc.csv` when
//! detection was scored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rfm_core::{
    confusion_from_scores, detect_changes, drop_changed_and_relocate, expected_fingerprint_grid,
    knn_locate, robust_locate, roc_auc, ConfusionMatrix, DatasetFormat, Error, FeatureId, Result,
};
use serde::Serialize;

use crate::commands::load_match_inputs;
use crate::config::RunConfig;
use crate::report::{
    csv_error, csv_writer, distance_m, finish_csv, fmt_f64, write_ecdf_csv, write_record,
    PositioningSummary,
};

#[derive(Serialize)]
struct MetricsReport {
    queries: usize,
    baseline: PositioningSummary,
    robust: PositioningSummary,
    dropout: PositioningSummary,
    detection: Option<DetectionReport>,
}

#[derive(Serialize)]
struct DetectionReport {
    /// Area under the ROC curve; absent when the labels hold one class.
    auc: Option<f64>,
    scored_features: usize,
    /// Labeled features the detector produced no belief for.
    skipped_features: usize,
    threshold: f64,
    confusion: ConfusionMatrix,
}

pub fn run(
    cfg: &RunConfig,
    out_dir: &Path,
    rfm_dir: &Path,
    queries: &Path,
    format: DatasetFormat,
    labels_path: Option<&Path>,
) -> Result<()> {
    let inputs = load_match_inputs(rfm_dir, queries, format)?;
    let grid = inputs.grid()?;
    let robust_cfg = cfg.robust_config();
    let labels = labels_path.map(load_labels).transpose()?;

    let n = inputs.queries.len();
    let mut baseline_errors = Vec::with_capacity(n);
    let mut robust_errors = Vec::with_capacity(n);
    let mut dropout_errors = Vec::with_capacity(n);
    let mut scores: Vec<(f64, bool)> = Vec::new();
    let mut skipped_features = 0usize;

    for (sample_id, query) in inputs.queries.iter().enumerate() {
        let baseline = knn_locate(&query.fingerprint, grid, &cfg.positioning)?;
        let robust = robust_locate(&query.fingerprint, grid, &robust_cfg)?;
        let expected = expected_fingerprint_grid(robust.location, grid);
        let beliefs = detect_changes(&query.fingerprint, &expected, &cfg.variability);
        let relocation = drop_changed_and_relocate(
            &query.fingerprint,
            &beliefs,
            cfg.detection.drop_threshold,
            grid,
            &cfg.positioning,
        )?;
        // When dropping leaves nothing to relocate with, the consensus
        // estimate stands.
        let dropout_location = relocation.estimate.map_or(robust.location, |e| e.location);

        baseline_errors.push(distance_m(baseline.location, query.location));
        robust_errors.push(distance_m(robust.location, query.location));
        dropout_errors.push(distance_m(dropout_location, query.location));

        if let Some(labels) = &labels {
            for (feature, &changed) in labels.get(&sample_id).into_iter().flatten() {
                match beliefs.get(feature) {
                    Some(belief) => scores.push((belief.belief, changed)),
                    None => skipped_features += 1,
                }
            }
        }
    }

    let detection = if labels.is_some() {
        // A single-class label set leaves the AUC undefined; the confusion
        // matrix at the report threshold is still meaningful.
        let curve = match roc_auc(&scores) {
            Ok(curve) => Some(curve),
            Err(Error::InvalidInput(_)) => None,
            Err(e) => return Err(e),
        };
        if let Some(curve) = &curve {
            let roc_path = out_dir.join("roc.csv");
            let mut writer = csv_writer(&roc_path)?;
            write_record(
                &mut writer,
                &roc_path,
                ["threshold", "false_positive_rate", "true_positive_rate"],
            )?;
            for point in &curve.points {
                write_record(
                    &mut writer,
                    &roc_path,
                    [
                        fmt_f64(point.threshold),
                        fmt_f64(point.false_positive_rate),
                        fmt_f64(point.true_positive_rate),
                    ],
                )?;
            }
            finish_csv(writer)?;
        }
        Some(DetectionReport {
            auc: curve.map(|c| c.auc),
            scored_features: scores.len(),
            skipped_features,
            threshold: cfg.detection.threshold,
            confusion: confusion_from_scores(&scores, cfg.detection.threshold),
        })
    } else {
        None
    };

    write_ecdf_csv(&out_dir.join("ecdf-baseline.csv"), &baseline_errors)?;
    write_ecdf_csv(&out_dir.join("ecdf-robust.csv"), &robust_errors)?;
    write_ecdf_csv(&out_dir.join("ecdf-dropout.csv"), &dropout_errors)?;

    let report = MetricsReport {
        queries: n,
        baseline: PositioningSummary::from_errors(&baseline_errors)?,
        robust: PositioningSummary::from_errors(&robust_errors)?,
        dropout: PositioningSummary::from_errors(&dropout_errors)?,
        detection,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize metrics: {e}")))?;
    fs::write(out_dir.join("metrics.json"), json + "\n")?;

    println!(
        "evaluate: {} queries; mean error baseline {} m, robust {} m, dropout {} m",
        n,
        fmt_f64(report.baseline.mean_error_m),
        fmt_f64(report.robust.mean_error_m),
        fmt_f64(report.dropout.mean_error_m)
    );
    Ok(())
}

/// Loads `inject`-style change labels keyed by sample and feature.
fn load_labels(path: &Path) -> Result<BTreeMap<usize, BTreeMap<FeatureId, bool>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: 1,
                message: format!("labels file lacks the {name:?} column"),
            })
    };
    let sample_col = find("sample_id")?;
    let feature_col = find("feature")?;
    let status_col = find("status")?;

    let mut labels: BTreeMap<usize, BTreeMap<FeatureId, bool>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, csv::Position::line);
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let sample_id: usize = record
            .get(sample_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad sample_id: {e}")))?;
        let feature = FeatureId::new(record.get(feature_col).unwrap_or(""))
            .map_err(|e| parse_err(e.to_string()))?;
        let changed = match record.get(status_col).unwrap_or("").trim() {
            "changed" => true,
            "stable" => false,
            other => return Err(parse_err(format!("unknown status {other:?}"))),
        };
        if labels
            .entry(sample_id)
            .or_default()
            .insert(feature, changed)
            .is_some()
        {
            return Err(parse_err("duplicate (sample, feature) label".into()));
        }
    }
    Ok(labels)
}
