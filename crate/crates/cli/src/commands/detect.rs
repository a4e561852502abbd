//! `detect` — per-feature change beliefs for every query.
//!
//! Each query is first located robustly; the map's expected fingerprint at
//! that estimate is then compared feature-by-feature against the
//! measurement. Emits `beliefs.csv` (one row per query and feature) and
//! `estimates.csv` (the robust location estimates used).

use std::path::Path;

use rfm_core::{detect_changes, expected_fingerprint_grid, robust_locate, DatasetFormat, Result};

use crate::commands::load_match_inputs;
use crate::config::RunConfig;
use crate::report::{csv_writer, distance_m, finish_csv, fmt_f64, fmt_opt_f64, write_record};

pub fn run(
    cfg: &RunConfig,
    out_dir: &Path,
    rfm_dir: &Path,
    queries: &Path,
    format: DatasetFormat,
) -> Result<()> {
    let inputs = load_match_inputs(rfm_dir, queries, format)?;
    let grid = inputs.grid()?;
    let robust_cfg = cfg.robust_config();

    let beliefs_path = out_dir.join("beliefs.csv");
    let mut beliefs = csv_writer(&beliefs_path)?;
    write_record(
        &mut beliefs,
        &beliefs_path,
        [
            "sample_id",
            "feature",
            "measured_dbm",
            "expected_dbm",
            "belief",
            "changed",
        ],
    )?;

    let estimates_path = out_dir.join("estimates.csv");
    let mut estimates = csv_writer(&estimates_path)?;
    write_record(
        &mut estimates,
        &estimates_path,
        ["sample_id", "x", "y", "error_m"],
    )?;

    let mut flagged = 0usize;
    for (sample_id, query) in inputs.queries.iter().enumerate() {
        let estimate = robust_locate(&query.fingerprint, grid, &robust_cfg)?;
        write_record(
            &mut estimates,
            &estimates_path,
            [
                sample_id.to_string(),
                fmt_f64(estimate.location[0]),
                fmt_f64(estimate.location[1]),
                fmt_f64(distance_m(estimate.location, query.location)),
            ],
        )?;
        let expected = expected_fingerprint_grid(estimate.location, grid);
        let set = detect_changes(&query.fingerprint, &expected, &cfg.variability);
        for (feature, belief) in set.iter() {
            let changed = belief.belief >= cfg.detection.threshold;
            flagged += usize::from(changed);
            write_record(
                &mut beliefs,
                &beliefs_path,
                [
                    sample_id.to_string(),
                    feature.to_string(),
                    fmt_opt_f64(belief.measured_dbm),
                    fmt_opt_f64(belief.expected_dbm),
                    fmt_f64(belief.belief),
                    changed.to_string(),
                ],
            )?;
        }
    }
    finish_csv(beliefs)?;
    finish_csv(estimates)?;
    println!(
        "detect: {} queries, {} features flagged at threshold {}",
        inputs.queries.len(),
        flagged,
        fmt_f64(cfg.detection.threshold)
    );
    Ok(())
}
