//! `robust-localize` — full resampling-consensus localization.
//!
//! Emits `estimates.csv` (final blended estimate per query) and
//! `candidates.csv` (every intermediate location with its overlap score,
//! selection flag, and blend weight) so the consensus stage can be audited.

use std::path::Path;

use rfm_core::{robust_locate, DatasetFormat, Result};

use crate::commands::load_match_inputs;
use crate::config::RunConfig;
use crate::report::{csv_writer, distance_m, finish_csv, fmt_f64, write_record};

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

    let estimates_path = out_dir.join("estimates.csv");
    let mut estimates = csv_writer(&estimates_path)?;
    write_record(
        &mut estimates,
        &estimates_path,
        ["sample_id", "x", "y", "error_m"],
    )?;

    let candidates_path = out_dir.join("candidates.csv");
    let mut candidates = csv_writer(&candidates_path)?;
    write_record(
        &mut candidates,
        &candidates_path,
        ["sample_id", "draw", "x", "y", "mji", "selected", "weight"],
    )?;

    let mut total_error = 0.0;
    for (sample_id, query) in inputs.queries.iter().enumerate() {
        let estimate = robust_locate(&query.fingerprint, grid, &robust_cfg)?;
        let error = distance_m(estimate.location, query.location);
        total_error += error;
        write_record(
            &mut estimates,
            &estimates_path,
            [
                sample_id.to_string(),
                fmt_f64(estimate.location[0]),
                fmt_f64(estimate.location[1]),
                fmt_f64(error),
            ],
        )?;

        let set = &estimate.candidates;
        let mut weight_of = vec![None; set.locations.len()];
        for (rank, &index) in set.selected.iter().enumerate() {
            weight_of[index] = Some(set.weights[rank]);
        }
        for (draw, location) in set.locations.iter().enumerate() {
            write_record(
                &mut candidates,
                &candidates_path,
                [
                    sample_id.to_string(),
                    draw.to_string(),
                    fmt_f64(location[0]),
                    fmt_f64(location[1]),
                    fmt_f64(set.mji_scores[draw]),
                    weight_of[draw].is_some().to_string(),
                    fmt_f64(weight_of[draw].unwrap_or(0.0)),
                ],
            )?;
        }
    }
    finish_csv(estimates)?;
    finish_csv(candidates)?;
    println!(
        "robust-localize: {} queries, mean error {} m",
        inputs.queries.len(),
        fmt_f64(total_error / inputs.queries.len() as f64)
    );
    Ok(())
}
