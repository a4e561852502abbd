//! One module per subcommand, plus shared input loading.

pub mod build_rfm;
pub mod detect;
pub mod evaluate;
pub mod inject;
pub mod label;
pub mod localize;
pub mod robust_localize;
pub mod simulate;
pub mod sweep;

use std::path::Path;

use rfm_core::{
    load_rfm, read_fingerprints, DatasetFormat, Error, LabeledFingerprint, Result, RfmContainer,
    RfmGrid,
};

/// A built map together with the query set to run against it.
pub struct MatchInputs {
    pub container: RfmContainer,
    pub queries: Vec<LabeledFingerprint>,
}

impl MatchInputs {
    /// The materialized grid of the map.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when the container was built without
    /// one.
    pub fn grid(&self) -> Result<&RfmGrid> {
        self.container.grid.as_ref().ok_or_else(|| {
            Error::InvalidInput("the map has no interpolated grid; rebuild it with build-rfm".into())
        })
    }
}

/// Loads a built map and a query dataset.
///
/// # Errors
/// Propagates container and dataset loading failures; an empty query set is
/// rejected as invalid input.
pub fn load_match_inputs(
    rfm_dir: &Path,
    queries_path: &Path,
    format: DatasetFormat,
) -> Result<MatchInputs> {
    let container = load_rfm(rfm_dir)?;
    let ingest = read_fingerprints(queries_path, format)?;
    if ingest.points.is_empty() {
        return Err(Error::InvalidInput(format!(
            "query dataset {} holds no samples",
            queries_path.display()
        )));
    }
    Ok(MatchInputs {
        container,
        queries: ingest.points,
    })
}
