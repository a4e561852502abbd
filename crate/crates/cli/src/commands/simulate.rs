//! `simulate` — generate a synthetic survey scenario.
//!
//! Emits `training.csv` and `validation.csv` (wide shape, one column per
//! transmitter) plus `ap-positions.csv` with the ground-truth transmitter
//! layout.

use std::path::Path;

use rfm_core::{generate_scenario, write_wide_csv, Result, MISSING_DBM};

use crate::config::RunConfig;
use crate::report::{csv_writer, finish_csv, fmt_f64, write_record};

pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let dataset = generate_scenario(&cfg.scenario)?;
    let registry = dataset.feature_registry();
    write_wide_csv(
        &out_dir.join("training.csv"),
        &dataset.training,
        &registry,
        MISSING_DBM,
    )?;
    write_wide_csv(
        &out_dir.join("validation.csv"),
        &dataset.validation,
        &registry,
        MISSING_DBM,
    )?;

    let layout_path = out_dir.join("ap-positions.csv");
    let mut writer = csv_writer(&layout_path)?;
    write_record(&mut writer, &layout_path, ["feature", "x", "y"])?;
    for (idx, pos) in dataset.ap_positions.iter().enumerate() {
        write_record(
            &mut writer,
            &layout_path,
            [
                registry.id(idx).to_string(),
                fmt_f64(pos[0]),
                fmt_f64(pos[1]),
            ],
        )?;
    }
    finish_csv(writer)?;

    println!(
        "simulate: {} training points, {} validation points, {} transmitters",
        dataset.training.len(),
        dataset.validation.len(),
        dataset.ap_positions.len()
    );
    Ok(())
}
