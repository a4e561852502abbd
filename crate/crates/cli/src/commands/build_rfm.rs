//! `build-rfm` — turn a survey dataset into a queryable reference map.
//!
//! Pipeline: ingest → denoise every survey fingerprint with the kernel
//! smoother → interpolate the grid over the survey bounding box → persist
//! the container under `<out-dir>/rfm/`.

use std::path::Path;

use rfm_core::{
    interpolate_grid, read_fingerprints, save_rfm, smooth_dataset, DatasetFormat, Error, Result,
    RfmContainer, RfmTrainingSet,
};

use crate::config::RunConfig;

pub fn run(cfg: &RunConfig, out_dir: &Path, dataset: &Path, format: DatasetFormat) -> Result<()> {
    let ingest = read_fingerprints(dataset, format)?;
    if ingest.clamped_values > 0 {
        eprintln!(
            "note: {} values clamped into the valid RSS range",
            ingest.clamped_values
        );
    }
    let raw = RfmTrainingSet::with_registry(ingest.points, ingest.registry)?;
    let smoothed = smooth_dataset(&raw, &cfg.ks)?;
    let roi = smoothed
        .bounding_box()
        .ok_or_else(|| Error::InvalidInput("the survey dataset holds no points".into()))?;
    let grid = interpolate_grid(&smoothed, &roi, cfg.grid.spacing_m, &cfg.ks)?;
    println!(
        "build-rfm: {} survey points, {} features, {}x{} grid cells",
        smoothed.len(),
        smoothed.registry().len(),
        grid.nx(),
        grid.ny()
    );
    let container = RfmContainer {
        training: smoothed,
        grid: Some(grid),
        ks: cfg.ks,
    };
    save_rfm(&out_dir.join("rfm"), &container)
}
