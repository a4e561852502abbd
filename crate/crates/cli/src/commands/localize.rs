//! `localize` — baseline kNN matching of every query against the map grid.
//!
//! Emits `estimates.csv` with one row per query: the estimated coordinates
//! and the error distance against the query's surveyed location.

use std::path::Path;

use rfm_core::{knn_locate, DatasetFormat, Result};

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

    let path = out_dir.join("estimates.csv");
    let mut writer = csv_writer(&path)?;
    write_record(&mut writer, &path, ["sample_id", "x", "y", "error_m"])?;
    let mut total_error = 0.0;
    for (sample_id, query) in inputs.queries.iter().enumerate() {
        let estimate = knn_locate(&query.fingerprint, grid, &cfg.positioning)?;
        let error = distance_m(estimate.location, query.location);
        total_error += error;
        write_record(
            &mut writer,
            &path,
            [
                sample_id.to_string(),
                fmt_f64(estimate.location[0]),
                fmt_f64(estimate.location[1]),
                fmt_f64(error),
            ],
        )?;
    }
    finish_csv(writer)?;
    println!(
        "localize: {} queries, mean error {} m",
        inputs.queries.len(),
        fmt_f64(total_error / inputs.queries.len() as f64)
    );
    Ok(())
}
