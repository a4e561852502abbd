//! On-disk persistence of a built map.
//!
//! A map is stored as a directory so each part stays individually
//! inspectable:
//!
//! * `container.json` — format marker, version, and sanity counts,
//! * `params.toml` — the smoother configuration the map was built with,
//! * `registry.txt` — feature ids, one per line, in registry order,
//! * `training.csv` — the (smoothed) training set in long form,
//! * `grid.json` + `grid.f32` — grid geometry and cell values (optional).
//!
//! Cell values are little-endian `f32` (the grid quantizes to `f32` when
//! interpolating), with the missing indicator standing for absent features,
//! so a save/load cycle reproduces the grid bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{read_fingerprints, write_long_csv, DatasetFormat};
use crate::error::{Error, Result};
use crate::fingerprint::{FeatureId, Fingerprint, GlobalFeatureRegistry, MISSING_DBM};
use crate::rfm::{KsConfig, RfmGrid, RfmTrainingSet, RoiBounds};

/// Format marker stored in `container.json`.
pub const CONTAINER_FORMAT: &str = "rfm-container";

/// Current container version.
pub const CONTAINER_VERSION: u32 = 1;

/// A map ready to save, or freshly loaded.
#[derive(Debug)]
pub struct RfmContainer {
    /// The (typically smoothed) training set.
    pub training: RfmTrainingSet,
    /// The interpolated grid, when one was built.
    pub grid: Option<RfmGrid>,
    /// Smoother configuration the map was built with.
    pub ks: KsConfig,
}

#[derive(Serialize, Deserialize)]
struct ContainerMeta {
    format: String,
    version: u32,
    has_grid: bool,
    point_count: usize,
    feature_count: usize,
}

#[derive(Serialize, Deserialize)]
struct GridMeta {
    bounds: RoiBounds,
    spacing_m: f64,
    nx: usize,
    ny: usize,
}

fn json_error(path: &Path, err: &serde_json::Error) -> Error {
    Error::parse(path.display().to_string(), err.line() as u64, err.to_string())
}

/// Saves a map into `dir`, creating it if needed.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when the grid registry does not match the
/// training registry, and [`Error::Io`] on write failures.
pub fn save_rfm(dir: &Path, container: &RfmContainer) -> Result<()> {
    if let Some(grid) = &container.grid {
        if grid.registry() != container.training.registry() {
            return Err(Error::invalid(
                "grid and training set must share one feature registry",
            ));
        }
    }
    fs::create_dir_all(dir)?;
    let meta = ContainerMeta {
        format: CONTAINER_FORMAT.to_owned(),
        version: CONTAINER_VERSION,
        has_grid: container.grid.is_some(),
        point_count: container.training.len(),
        feature_count: container.training.registry().len(),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(dir.join("container.json"), meta_json)?;
    let params = toml::to_string_pretty(&container.ks)
        .map_err(|e| Error::invalid(format!("unserializable smoother config: {e}")))?;
    fs::write(dir.join("params.toml"), params)?;
    let registry_lines: Vec<&str> = container
        .training
        .registry()
        .iter()
        .map(FeatureId::as_str)
        .collect();
    fs::write(dir.join("registry.txt"), registry_lines.join("\n") + "\n")?;
    write_long_csv(&dir.join("training.csv"), container.training.points())?;
    if let Some(grid) = &container.grid {
        let grid_meta = GridMeta {
            bounds: grid.bounds(),
            spacing_m: grid.spacing_m(),
            nx: grid.nx(),
            ny: grid.ny(),
        };
        let grid_json = serde_json::to_string_pretty(&grid_meta).expect("metadata serializes");
        fs::write(dir.join("grid.json"), grid_json)?;
        let registry = grid.registry();
        let mut buffer = Vec::with_capacity(grid.len() * registry.len() * 4);
        for cell in grid.cells() {
            for feature in registry.iter() {
                let value = cell.get(feature).unwrap_or(MISSING_DBM) as f32;
                buffer.extend_from_slice(&value.to_le_bytes());
            }
        }
        fs::write(dir.join("grid.f32"), buffer)?;
    }
    Ok(())
}

/// Loads a map saved by [`save_rfm`].
///
/// # Errors
/// Returns [`Error::Io`] for missing files, [`Error::Parse`] for corrupt
/// content, and [`Error::InvalidInput`] for unsupported versions or
/// inconsistent parts.
pub fn load_rfm(dir: &Path) -> Result<RfmContainer> {
    let meta_path = dir.join("container.json");
    let meta: ContainerMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)
        .map_err(|e| json_error(&meta_path, &e))?;
    if meta.format != CONTAINER_FORMAT {
        return Err(Error::invalid(format!(
            "not a map container (format {:?})",
            meta.format
        )));
    }
    if meta.version != CONTAINER_VERSION {
        return Err(Error::invalid(format!(
            "unsupported container version {} (this build reads {})",
            meta.version, CONTAINER_VERSION
        )));
    }
    let params_path = dir.join("params.toml");
    let ks: KsConfig = toml::from_str(&fs::read_to_string(&params_path)?)
        .map_err(|e| Error::parse(params_path.display().to_string(), 0, e.to_string()))?;
    let registry_path = dir.join("registry.txt");
    let mut registry = GlobalFeatureRegistry::new();
    for line in fs::read_to_string(&registry_path)?.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let feature = FeatureId::new(line).map_err(|e| {
            Error::parse(registry_path.display().to_string(), 0, e.to_string())
        })?;
        registry.insert(feature);
    }
    if registry.len() != meta.feature_count {
        return Err(Error::invalid(format!(
            "registry lists {} features but the container declares {}",
            registry.len(),
            meta.feature_count
        )));
    }
    let ingest = read_fingerprints(&dir.join("training.csv"), DatasetFormat::Long)?;
    if ingest.points.len() != meta.point_count {
        return Err(Error::invalid(format!(
            "training set has {} points but the container declares {}",
            ingest.points.len(),
            meta.point_count
        )));
    }
    let training = RfmTrainingSet::with_registry(ingest.points, registry.clone())?;
    let grid = if meta.has_grid {
        let grid_meta_path = dir.join("grid.json");
        let grid_meta: GridMeta = serde_json::from_str(&fs::read_to_string(&grid_meta_path)?)
            .map_err(|e| json_error(&grid_meta_path, &e))?;
        let values_path = dir.join("grid.f32");
        let bytes = fs::read(&values_path)?;
        let expected_len = grid_meta.nx * grid_meta.ny * registry.len() * 4;
        if bytes.len() != expected_len {
            return Err(Error::parse(
                values_path.display().to_string(),
                0,
                format!("expected {expected_len} bytes of cell values, found {}", bytes.len()),
            ));
        }
        let mut cells = Vec::with_capacity(grid_meta.nx * grid_meta.ny);
        let stride = registry.len();
        for cell_index in 0..grid_meta.nx * grid_meta.ny {
            let mut cell = Fingerprint::new();
            for feature_index in 0..stride {
                let offset = (cell_index * stride + feature_index) * 4;
                let raw: [u8; 4] = bytes[offset..offset + 4].try_into().expect("length checked");
                let value = f32::from_le_bytes(raw);
                if !value.is_finite() {
                    return Err(Error::parse(
                        values_path.display().to_string(),
                        0,
                        format!("non-finite cell value at cell {cell_index}"),
                    ));
                }
                if value != MISSING_DBM as f32 {
                    cell.insert(registry.id(feature_index).clone(), f64::from(value));
                }
            }
            cells.push(cell);
        }
        Some(RfmGrid::from_parts(
            grid_meta.bounds,
            grid_meta.spacing_m,
            grid_meta.nx,
            grid_meta.ny,
            registry,
            cells,
        )?)
    } else {
        None
    };
    Ok(RfmContainer {
        training,
        grid,
        ks,
    })
}
