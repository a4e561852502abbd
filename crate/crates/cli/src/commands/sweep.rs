//! `sweep` — sampling-ratio sweep of the resampling stage.
//!
//! For every ratio of the configured range and every query, the
//! intermediate locations of the resampling stage are reduced to their
//! dispersiveness (ellipse area) and bias (minimum distance to the truth).
//! Per query, both metrics are also normalized by their maximum over the
//! sweep before averaging, so differently-scaled queries contribute
//! comparably. Emits `sweep.csv` (one row per ratio) and `bandwidth.json`
//! (the 3 dB band of the mean bias curve).

use std::fs;
use std::path::Path;

use rfm_core::{
    bandwidth_3db, bias, dispersiveness, intermediate_locations, DatasetFormat, Error, Result,
    SweepPoint,
};

use crate::commands::load_match_inputs;
use crate::config::RunConfig;
use crate::report::{csv_writer, finish_csv, fmt_f64, write_record};

pub fn run(
    cfg: &RunConfig,
    out_dir: &Path,
    rfm_dir: &Path,
    queries: &Path,
    format: DatasetFormat,
) -> Result<()> {
    let inputs = load_match_inputs(rfm_dir, queries, format)?;
    let grid = inputs.grid()?;
    let ratios = cfg.sweep.ratios();
    let n_queries = inputs.queries.len();

    // metric[query][ratio]
    let mut disp = vec![vec![0.0f64; ratios.len()]; n_queries];
    let mut bias_ = vec![vec![0.0f64; ratios.len()]; n_queries];
    let mut robust_cfg = cfg.robust_config();
    for (r, &ratio) in ratios.iter().enumerate() {
        robust_cfg.resample.alpha = ratio;
        for (q, query) in inputs.queries.iter().enumerate() {
            let locations = intermediate_locations(&query.fingerprint, grid, &robust_cfg)?;
            disp[q][r] = dispersiveness(&locations, cfg.sweep.ellipse_scale)?;
            bias_[q][r] = bias(&locations, query.location)?;
        }
    }

    let mean_over_queries = |metric: &[Vec<f64>], r: usize, normalized: bool| -> f64 {
        let sum: f64 = (0..n_queries)
            .map(|q| {
                if normalized {
                    let max = metric[q].iter().cloned().fold(0.0f64, f64::max);
                    if max > 0.0 {
                        metric[q][r] / max
                    } else {
                        0.0
                    }
                } else {
                    metric[q][r]
                }
            })
            .sum();
        sum / n_queries as f64
    };

    let path = out_dir.join("sweep.csv");
    let mut writer = csv_writer(&path)?;
    write_record(
        &mut writer,
        &path,
        [
            "ratio",
            "mean_dispersiveness",
            "mean_normalized_dispersiveness",
            "mean_bias",
            "mean_normalized_bias",
        ],
    )?;
    let mut bias_curve = Vec::with_capacity(ratios.len());
    for (r, &ratio) in ratios.iter().enumerate() {
        let mean_bias = mean_over_queries(&bias_, r, false);
        bias_curve.push(SweepPoint {
            parameter: ratio,
            value: mean_bias,
        });
        write_record(
            &mut writer,
            &path,
            [
                fmt_f64(ratio),
                fmt_f64(mean_over_queries(&disp, r, false)),
                fmt_f64(mean_over_queries(&disp, r, true)),
                fmt_f64(mean_bias),
                fmt_f64(mean_over_queries(&bias_, r, true)),
            ],
        )?;
    }
    finish_csv(writer)?;

    let band = bandwidth_3db(&bias_curve)?;
    let json = serde_json::to_string_pretty(&band)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize bandwidth: {e}")))?;
    fs::write(out_dir.join("bandwidth.json"), json + "\n")?;

    println!(
        "sweep: {} ratios x {} queries; 3 dB band [{}, {}] around {}",
        ratios.len(),
        n_queries,
        fmt_f64(band.lower),
        fmt_f64(band.upper),
        fmt_f64(band.best)
    );
    Ok(())
}
