//! Fingerprint positioning: k-nearest-neighbor matching against grid cells.
//!
//! A measured fingerprint is compared to every cell fingerprint of an
//! [`RfmGrid`](crate::rfm::RfmGrid) under a configurable dissimilarity — the
//! coverage-aware [`cdm`](crate::fingerprint::cdm) by default, or plain
//! Euclidean distance over registry-aligned vectors — and the estimate is the
//! (optionally inverse-distance-weighted) mean of the k best cell centers.
//!
//! The dropout variant excludes a set of features from *both* the query and
//! the cells before matching, which is how suspected-change features are
//! removed from the decision without biasing either side of the comparison.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{Fingerprint, FeatureId, GlobalFeatureRegistry, DEFAULT_KEY_GAP_DBM, MISSING_DBM};
use crate::rfm::RfmGrid;

/// How a query fingerprint is compared against a cell fingerprint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dissimilarity {
    /// Coverage-aware dissimilarity over raw feature sets; robust to
    /// missing features. The default.
    #[default]
    Cdm,
    /// Euclidean distance over registry-aligned vectors with missing entries
    /// filled by `missing_dbm`; features outside the registry are dropped.
    EuclideanVector,
}

/// Positioning configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PositioningConfig {
    /// Number of nearest cells averaged into the estimate.
    pub k: usize,
    /// Query/cell comparison function.
    pub dissimilarity: Dissimilarity,
    /// Symmetric-difference penalty weight used by the coverage-aware mode.
    pub lambda_cdm: f64,
    /// Fill value for absent features in the Euclidean mode (dBm).
    pub missing_dbm: f64,
    /// Weight neighbors by inverse dissimilarity instead of uniformly.
    pub inverse_distance_weighting: bool,
}

impl Default for PositioningConfig {
    fn default() -> Self {
        PositioningConfig {
            k: 3,
            dissimilarity: Dissimilarity::Cdm,
            lambda_cdm: 3.0,
            missing_dbm: MISSING_DBM,
            inverse_distance_weighting: false,
        }
    }
}

impl PositioningConfig {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("positioning requires k >= 1"));
        }
        if !(self.lambda_cdm.is_finite() && self.lambda_cdm >= 0.0) {
            return Err(Error::invalid("lambda_cdm must be finite and >= 0"));
        }
        if !self.missing_dbm.is_finite() {
            return Err(Error::invalid("missing_dbm must be finite"));
        }
        Ok(())
    }
}

/// One matched grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    /// Row-major cell index in the grid.
    pub cell_index: usize,
    /// Cell center in meters.
    pub location: [f64; 2],
    /// Dissimilarity between the query and the cell fingerprint.
    pub dissimilarity: f64,
}

/// A position estimate with the neighbors that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    /// Estimated location in meters.
    pub location: [f64; 2],
    /// The k best cells, ascending by dissimilarity.
    pub neighbors: Vec<Neighbor>,
}

/// Grid cells densified over registry indices for fast repeated matching.
///
/// Each cell is a sparse `(registry index, value)` list in ascending index
/// order, so dissimilarities reduce to sorted merge walks without feature-id
/// string comparisons.
#[derive(Debug)]
pub(crate) struct IndexedCells {
    cells: Vec<Vec<(usize, f64)>>,
}

impl IndexedCells {
    pub(crate) fn build(cells: &[Fingerprint], registry: &GlobalFeatureRegistry) -> Self {
        let indexed = cells
            .iter()
            .map(|cell| {
                let mut entries: Vec<(usize, f64)> = cell
                    .iter()
                    .map(|(feature, value)| {
                        let idx = registry
                            .index_of(feature)
                            .expect("grid cells only carry registered features");
                        (idx, value)
                    })
                    .collect();
                entries.sort_unstable_by_key(|&(idx, _)| idx);
                entries
            })
            .collect();
        IndexedCells { cells: indexed }
    }
}

/// Query fingerprint in indexed form; features missing from the registry are
/// retained only as a count (they can never match a cell feature).
struct IndexedQuery {
    entries: Vec<(usize, f64)>,
    unregistered: usize,
}

impl IndexedQuery {
    fn build(
        query: &Fingerprint,
        registry: &GlobalFeatureRegistry,
        excluded: Option<&BTreeSet<FeatureId>>,
    ) -> Self {
        let mut entries = Vec::with_capacity(query.len());
        let mut unregistered = 0;
        for (feature, value) in query.iter() {
            if excluded.is_some_and(|e| e.contains(feature)) {
                continue;
            }
            match registry.index_of(feature) {
                Some(idx) => entries.push((idx, value)),
                None => unregistered += 1,
            }
        }
        entries.sort_unstable_by_key(|&(idx, _)| idx);
        IndexedQuery {
            entries,
            unregistered,
        }
    }
}

/// Sorted-merge dissimilarity between an indexed query and an indexed cell.
/// `excluded_mask`, when present, removes cell features by registry index
/// (the query side is filtered at construction).
fn dissim_indexed(
    query: &IndexedQuery,
    cell: &[(usize, f64)],
    excluded_mask: Option<&[bool]>,
    cfg: &PositioningConfig,
) -> f64 {
    let mut shared = 0usize;
    let mut shared_abs_gap = 0.0;
    let mut shared_sq_gap = 0.0;
    let mut query_only = query.unregistered;
    let mut query_only_sq = 0.0;
    let mut cell_only = 0usize;
    let mut cell_only_sq = 0.0;
    let mut qi = 0;
    let mut ci = 0;
    let cell_included = |idx: usize| excluded_mask.is_none_or(|mask| !mask[idx]);
    while qi < query.entries.len() && ci < cell.len() {
        let (q_idx, q_val) = query.entries[qi];
        let (c_idx, c_val) = cell[ci];
        if !cell_included(c_idx) {
            ci += 1;
            continue;
        }
        match q_idx.cmp(&c_idx) {
            std::cmp::Ordering::Equal => {
                shared += 1;
                let gap = q_val - c_val;
                shared_abs_gap += gap.abs();
                shared_sq_gap += gap * gap;
                qi += 1;
                ci += 1;
            }
            std::cmp::Ordering::Less => {
                query_only += 1;
                let gap = q_val - cfg.missing_dbm;
                query_only_sq += gap * gap;
                qi += 1;
            }
            std::cmp::Ordering::Greater => {
                cell_only += 1;
                let gap = c_val - cfg.missing_dbm;
                cell_only_sq += gap * gap;
                ci += 1;
            }
        }
    }
    while qi < query.entries.len() {
        let (_, q_val) = query.entries[qi];
        query_only += 1;
        let gap = q_val - cfg.missing_dbm;
        query_only_sq += gap * gap;
        qi += 1;
    }
    while ci < cell.len() {
        let (c_idx, c_val) = cell[ci];
        if cell_included(c_idx) {
            cell_only += 1;
            let gap = c_val - cfg.missing_dbm;
            cell_only_sq += gap * gap;
        }
        ci += 1;
    }
    match cfg.dissimilarity {
        Dissimilarity::Cdm => {
            let sym_diff = query_only + cell_only;
            let union = shared + sym_diff;
            debug_assert!(union > 0, "matching requires a non-empty query");
            let typical_gap = if shared > 0 && shared_abs_gap > 0.0 {
                shared_abs_gap / shared as f64
            } else {
                DEFAULT_KEY_GAP_DBM
            };
            (shared_abs_gap + cfg.lambda_cdm * typical_gap * sym_diff as f64) / union as f64
        }
        Dissimilarity::EuclideanVector => {
            // Unregistered query features carry no vector dimension, so only
            // the squared gaps gathered from registry-aligned entries count.
            (shared_sq_gap + query_only_sq + cell_only_sq).sqrt()
        }
    }
}

fn locate_inner(
    query: &Fingerprint,
    grid: &RfmGrid,
    cfg: &PositioningConfig,
    excluded: Option<&BTreeSet<FeatureId>>,
) -> Result<PositionEstimate> {
    cfg.validate()?;
    let indexed_query = IndexedQuery::build(query, grid.registry(), excluded);
    let effective_len = indexed_query.entries.len()
        + match cfg.dissimilarity {
            Dissimilarity::Cdm => indexed_query.unregistered,
            Dissimilarity::EuclideanVector => 0,
        };
    if effective_len == 0 {
        return Err(Error::invalid(
            "query fingerprint has no usable features after exclusions",
        ));
    }
    let excluded_mask = excluded.map(|set| {
        let mut mask = vec![false; grid.registry().len()];
        for feature in set {
            if let Some(idx) = grid.registry().index_of(feature) {
                mask[idx] = true;
            }
        }
        mask
    });
    let indexed_cells = grid.indexed_cells();
    let mut scored: Vec<(f64, usize)> = indexed_cells
        .cells
        .iter()
        .enumerate()
        .map(|(idx, cell)| {
            (
                dissim_indexed(&indexed_query, cell, excluded_mask.as_deref(), cfg),
                idx,
            )
        })
        .collect();
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(cfg.k);
    let neighbors: Vec<Neighbor> = scored
        .iter()
        .map(|&(dissimilarity, cell_index)| Neighbor {
            cell_index,
            location: grid.cell_center(cell_index),
            dissimilarity,
        })
        .collect();
    let location = if cfg.inverse_distance_weighting {
        let weights: Vec<f64> = neighbors
            .iter()
            .map(|n| 1.0 / n.dissimilarity.max(1e-9))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut x = 0.0;
        let mut y = 0.0;
        for (neighbor, weight) in neighbors.iter().zip(&weights) {
            x += weight * neighbor.location[0];
            y += weight * neighbor.location[1];
        }
        [x / total, y / total]
    } else {
        let n = neighbors.len() as f64;
        [
            neighbors.iter().map(|nb| nb.location[0]).sum::<f64>() / n,
            neighbors.iter().map(|nb| nb.location[1]).sum::<f64>() / n,
        ]
    };
    Ok(PositionEstimate {
        location,
        neighbors,
    })
}

/// Estimates the query's position as the weighted mean of the k most similar
/// grid cells.
///
/// # Errors
/// Returns [`Error::InvalidInput`] for an empty query or invalid
/// configuration.
pub fn knn_locate(
    query: &Fingerprint,
    grid: &RfmGrid,
    cfg: &PositioningConfig,
) -> Result<PositionEstimate> {
    locate_inner(query, grid, cfg, None)
}

/// Like [`knn_locate`] but with `excluded` features removed from both the
/// query and every cell before matching.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when the exclusions leave the query with
/// no usable features.
pub fn knn_locate_dropout(
    query: &Fingerprint,
    grid: &RfmGrid,
    cfg: &PositioningConfig,
    excluded: &BTreeSet<FeatureId>,
) -> Result<PositionEstimate> {
    locate_inner(query, grid, cfg, Some(excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::cdm;
    use crate::rfm::RoiBounds;
    use approx::assert_relative_eq;

    fn fid(raw: &str) -> FeatureId {
        FeatureId::new(raw).unwrap()
    }

    fn fp(entries: &[(&str, f64)]) -> Fingerprint {
        entries.iter().map(|&(id, v)| (fid(id), v)).collect()
    }

    /// A 3x1 grid with per-cell fingerprints given in row-major order.
    fn line_grid(cells: Vec<Fingerprint>) -> RfmGrid {
        let n = cells.len();
        let registry = GlobalFeatureRegistry::from_fingerprints(cells.iter());
        let bounds = RoiBounds::new([0.0, 0.0], [n as f64, 1.0]).unwrap();
        RfmGrid::from_parts(bounds, 1.0, n, 1, registry, cells).unwrap()
    }

    #[test]
    fn single_neighbor_snaps_to_the_best_cell_center() {
        let grid = line_grid(vec![
            fp(&[("f1", -40.0)]),
            fp(&[("f1", -60.0)]),
            fp(&[("f1", -80.0)]),
        ]);
        let cfg = PositioningConfig {
            k: 1,
            ..PositioningConfig::default()
        };
        let estimate = knn_locate(&fp(&[("f1", -41.0)]), &grid, &cfg).unwrap();
        assert_eq!(estimate.neighbors[0].cell_index, 0);
        assert_eq!(estimate.location, [0.5, 0.5]);
    }

    #[test]
    fn unweighted_estimate_is_the_mean_of_neighbor_centers() {
        let grid = line_grid(vec![
            fp(&[("f1", -40.0)]),
            fp(&[("f1", -60.0)]),
            fp(&[("f1", -80.0)]),
        ]);
        let estimate = knn_locate(&fp(&[("f1", -41.0)]), &grid, &PositioningConfig::default()).unwrap();
        // k = 3 uses every cell; the mean of the centers is the grid middle.
        assert_relative_eq!(estimate.location[0], 1.5);
        assert_relative_eq!(estimate.location[1], 0.5);
        assert_eq!(estimate.neighbors.len(), 3);
        assert!(estimate.neighbors.windows(2).all(|w| w[0].dissimilarity <= w[1].dissimilarity));
    }

    #[test]
    fn inverse_distance_weighting_favors_exact_matches() {
        let grid = line_grid(vec![
            fp(&[("f1", -40.0)]),
            fp(&[("f1", -60.0)]),
            fp(&[("f1", -80.0)]),
        ]);
        let cfg = PositioningConfig {
            inverse_distance_weighting: true,
            ..PositioningConfig::default()
        };
        let estimate = knn_locate(&fp(&[("f1", -60.0)]), &grid, &cfg).unwrap();
        // The middle cell matches exactly; its enormous weight dominates.
        assert_relative_eq!(estimate.location[0], 1.5, epsilon = 1e-6);
    }

    #[test]
    fn coverage_aware_mode_matches_the_standalone_function() {
        let grid = line_grid(vec![
            fp(&[("f1", -40.0), ("f2", -55.0)]),
            fp(&[("f2", -60.0), ("f3", -70.0)]),
            fp(&[("f3", -75.0)]),
        ]);
        let query = fp(&[("f1", -45.0), ("f3", -72.0)]);
        let cfg = PositioningConfig {
            k: 3,
            ..PositioningConfig::default()
        };
        let estimate = knn_locate(&query, &grid, &cfg).unwrap();
        for neighbor in &estimate.neighbors {
            let direct = cdm(&query, grid.cell_fingerprint(neighbor.cell_index), cfg.lambda_cdm).unwrap();
            assert_relative_eq!(neighbor.dissimilarity, direct, epsilon = 1e-9);
        }
    }

    #[test]
    fn euclidean_mode_matches_a_hand_computed_distance() {
        let grid = line_grid(vec![fp(&[("f1", -40.0), ("f2", -55.0)]), fp(&[("f2", -60.0)])]);
        let query = fp(&[("f1", -50.0)]);
        let cfg = PositioningConfig {
            k: 1,
            dissimilarity: Dissimilarity::EuclideanVector,
            ..PositioningConfig::default()
        };
        let estimate = knn_locate(&query, &grid, &cfg).unwrap();
        // Cell 0: gaps are (-50 - -40) on f1 and (-110 - -55) on f2.
        let expected0 = (10.0f64.powi(2) + 55.0f64.powi(2)).sqrt();
        // Cell 1: f1 only in the query, f2 only in the cell.
        let expected1 = (60.0f64.powi(2) + 50.0f64.powi(2)).sqrt();
        assert!(expected0 < expected1);
        assert_eq!(estimate.neighbors[0].cell_index, 0);
        assert_relative_eq!(estimate.neighbors[0].dissimilarity, expected0, epsilon = 1e-12);
    }

    #[test]
    fn unregistered_query_features_penalize_coverage_but_not_euclidean() {
        let grid = line_grid(vec![fp(&[("f1", -40.0)])]);
        let query = fp(&[("f1", -40.0), ("zz", -50.0)]);
        let coverage = knn_locate(&query, &grid, &PositioningConfig { k: 1, ..PositioningConfig::default() })
            .unwrap();
        // Shared gap is zero, so the typical gap falls back to the default:
        // (0 + 3 * 10 * 1) / 2.
        assert_relative_eq!(coverage.neighbors[0].dissimilarity, 15.0, epsilon = 1e-12);
        let euclid = knn_locate(
            &query,
            &grid,
            &PositioningConfig {
                k: 1,
                dissimilarity: Dissimilarity::EuclideanVector,
                ..PositioningConfig::default()
            },
        )
        .unwrap();
        assert_relative_eq!(euclid.neighbors[0].dissimilarity, 0.0);
    }

    #[test]
    fn ties_resolve_toward_the_lower_cell_index() {
        let grid = line_grid(vec![fp(&[("f1", -60.0)]), fp(&[("f1", -60.0)])]);
        let cfg = PositioningConfig {
            k: 1,
            ..PositioningConfig::default()
        };
        let estimate = knn_locate(&fp(&[("f1", -60.0)]), &grid, &cfg).unwrap();
        assert_eq!(estimate.neighbors[0].cell_index, 0);
    }

    #[test]
    fn dropout_removes_the_feature_from_both_sides() {
        // The query's f1 reading is corrupted relative to cell 0; with f1
        // excluded the match must recover cell 0 on the strength of f2.
        let grid = line_grid(vec![
            fp(&[("f1", -40.0), ("f2", -60.0)]),
            fp(&[("f1", -80.0), ("f2", -61.0)]),
        ]);
        let query = fp(&[("f1", -80.0), ("f2", -60.0)]);
        let cfg = PositioningConfig {
            k: 1,
            ..PositioningConfig::default()
        };
        let plain = knn_locate(&query, &grid, &cfg).unwrap();
        assert_eq!(plain.neighbors[0].cell_index, 1);
        let excluded: BTreeSet<FeatureId> = [fid("f1")].into_iter().collect();
        let dropped = knn_locate_dropout(&query, &grid, &cfg, &excluded).unwrap();
        assert_eq!(dropped.neighbors[0].cell_index, 0);
        assert_relative_eq!(dropped.neighbors[0].dissimilarity, 0.0);
    }

    #[test]
    fn empty_queries_and_total_exclusions_are_rejected() {
        let grid = line_grid(vec![fp(&[("f1", -60.0)])]);
        let cfg = PositioningConfig::default();
        assert!(knn_locate(&Fingerprint::new(), &grid, &cfg).is_err());
        let excluded: BTreeSet<FeatureId> = [fid("f1")].into_iter().collect();
        let err = knn_locate_dropout(&fp(&[("f1", -60.0)]), &grid, &cfg, &excluded).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn k_larger_than_the_grid_uses_every_cell() {
        let grid = line_grid(vec![fp(&[("f1", -40.0)]), fp(&[("f1", -60.0)])]);
        let cfg = PositioningConfig {
            k: 10,
            ..PositioningConfig::default()
        };
        let estimate = knn_locate(&fp(&[("f1", -50.0)]), &grid, &cfg).unwrap();
        assert_eq!(estimate.neighbors.len(), 2);
    }

    #[test]
    fn zero_k_is_rejected() {
        let grid = line_grid(vec![fp(&[("f1", -40.0)])]);
        let cfg = PositioningConfig {
            k: 0,
            ..PositioningConfig::default()
        };
        assert!(knn_locate(&fp(&[("f1", -50.0)]), &grid, &cfg).is_err());
    }
}
