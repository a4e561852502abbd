//! Reference fingerprint map (RFM): the positioning world model.
//!
//! The map is built from a training set of labeled fingerprints. Signal
//! strength per feature is modeled as a smooth field and predicted anywhere in
//! the region of interest by kernel smoothing (kernel ridge regression with
//! the Matérn-3/2 kernel). Predictions drive three consumers:
//!
//! * denoising the training data itself ([`smooth_dataset`]),
//! * interpolating a regular grid of cell fingerprints ([`interpolate_grid`]),
//! * computing the expected fingerprint at an arbitrary location
//!   ([`expected_fingerprint_ks`], or the O(1) [`expected_fingerprint_grid`]).
//!
//! Query-time smoothing is local: only reference points within the query
//! radius participate, which bounds solve cost and makes uncovered regions
//! fall back to the missing indicator. Reference points that did not measure
//! a feature participate as *indicator points* carrying [`MISSING_DBM`], but
//! only where they sit within the query radius of the feature's actual
//! coverage — this shapes predictions smoothly down to the missing indicator at
//! coverage boundaries instead of letting the regression decay toward 0 dBm.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{
    FeatureId, Fingerprint, GlobalFeatureRegistry, LabeledFingerprint, MISSING_DBM, RSS_MAX_DBM,
    RSS_MIN_DBM,
};
use crate::kernel::{matern32, KernelParams, QueryConfig};
use crate::positioning::IndexedCells;

/// Margin above the missing indicator below which a predicted feature is
/// treated as not measurable and excluded from fingerprints (dBm).
pub const MEASURABLE_MARGIN_DBM: f64 = 1.0;

/// Axis-aligned region of interest in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiBounds {
    /// Lower-left corner `[x, y]`.
    pub min: [f64; 2],
    /// Upper-right corner `[x, y]`.
    pub max: [f64; 2],
}

impl RoiBounds {
    /// Builds validated bounds.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] for non-finite corners or when `max`
    /// lies below `min` on either axis.
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        let bounds = RoiBounds { min, max };
        bounds.validate()?;
        Ok(bounds)
    }

    /// Checks corner ordering and finiteness.
    pub fn validate(&self) -> Result<()> {
        if !(self.min.iter().chain(self.max.iter()).all(|v| v.is_finite())) {
            return Err(Error::invalid("ROI bounds must be finite"));
        }
        if self.max[0] < self.min[0] || self.max[1] < self.min[1] {
            return Err(Error::invalid("ROI max corner must not lie below min corner"));
        }
        Ok(())
    }

    /// Extent along x in meters.
    #[must_use]
    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    /// Extent along y in meters.
    #[must_use]
    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    /// Smallest bounds containing every location, when there is at least one.
    #[must_use]
    pub fn from_locations<'a>(locations: impl IntoIterator<Item = &'a [f64; 2]>) -> Option<Self> {
        let mut iter = locations.into_iter();
        let first = iter.next()?;
        let mut bounds = RoiBounds {
            min: *first,
            max: *first,
        };
        for loc in iter {
            bounds.min[0] = bounds.min[0].min(loc[0]);
            bounds.min[1] = bounds.min[1].min(loc[1]);
            bounds.max[0] = bounds.max[0].max(loc[0]);
            bounds.max[1] = bounds.max[1].max(loc[1]);
        }
        Some(bounds)
    }
}

/// Which linear system the smoother solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveForm {
    /// Kernel ridge regression: `z' (G + reg I)^-1 o`. The default; performs
    /// exact interpolation at zero regularization.
    #[default]
    Standard,
    /// Normal-equations variant `z' (G'G + reg I)^-1 o`; kept selectable for
    /// comparison, it shrinks differently and does not interpolate exactly.
    NormalEquations,
}

/// Full configuration of the kernel smoother.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KsConfig {
    /// Kernel shape and regularization.
    pub kernel: KernelParams,
    /// Query-time locality.
    pub query: QueryConfig,
    /// Linear-system form.
    pub solve_form: SolveForm,
}

impl KsConfig {
    /// Validates kernel and query parameters together.
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.query.validate()
    }
}

/// Training set of the map: labeled fingerprints plus the feature registry and
/// a per-feature index of which points measured each feature.
#[derive(Debug, Clone, PartialEq)]
pub struct RfmTrainingSet {
    points: Vec<LabeledFingerprint>,
    registry: GlobalFeatureRegistry,
    /// Per registry feature: indices of points that measured it.
    feature_members: Vec<Vec<usize>>,
}

impl RfmTrainingSet {
    /// Builds a training set, deriving the registry from the points in
    /// first-seen order.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when a location is non-finite.
    pub fn from_points(points: Vec<LabeledFingerprint>) -> Result<Self> {
        let registry =
            GlobalFeatureRegistry::from_fingerprints(points.iter().map(|p| &p.fingerprint));
        Self::with_registry(points, registry)
    }

    /// Builds a training set against an externally fixed registry (e.g. the
    /// column order of an ingested file).
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when a location is non-finite or a
    /// point carries a feature the registry does not know.
    pub fn with_registry(
        points: Vec<LabeledFingerprint>,
        registry: GlobalFeatureRegistry,
    ) -> Result<Self> {
        let mut feature_members = vec![Vec::new(); registry.len()];
        for (idx, point) in points.iter().enumerate() {
            if !(point.location[0].is_finite() && point.location[1].is_finite()) {
                return Err(Error::invalid(format!(
                    "training point {idx} has a non-finite location"
                )));
            }
            for (feature, _) in point.fingerprint.iter() {
                let feature_idx = registry.index_of(feature).ok_or_else(|| {
                    Error::invalid(format!("feature {feature} is not in the registry"))
                })?;
                feature_members[feature_idx].push(idx);
            }
        }
        Ok(RfmTrainingSet {
            points,
            registry,
            feature_members,
        })
    }

    /// The labeled fingerprints, in dataset order.
    #[must_use]
    pub fn points(&self) -> &[LabeledFingerprint] {
        &self.points
    }

    /// The feature registry in dataset order.
    #[must_use]
    pub fn registry(&self) -> &GlobalFeatureRegistry {
        &self.registry
    }

    /// Number of reference points.
    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the set has no points.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of points that measured the feature, when it is registered.
    #[must_use]
    pub fn measuring_points(&self, feature: &FeatureId) -> Option<&[usize]> {
        self.registry
            .index_of(feature)
            .map(|idx| self.feature_members[idx].as_slice())
    }

    /// Bounding box of the reference locations, when non-empty.
    #[must_use]
    pub fn bounding_box(&self) -> Option<RoiBounds> {
        RoiBounds::from_locations(self.points.iter().map(|p| &p.location))
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Solves the regularized kernel system over the given reference points and
/// evaluates the prediction at `query`. The result is clamped into the valid
/// RSS range.
fn solve_at(
    query: [f64; 2],
    locations: &[[f64; 2]],
    values: &[f64],
    kernel: &KernelParams,
    form: SolveForm,
) -> Result<f64> {
    let n = locations.len();
    debug_assert!(n > 0 && values.len() == n);
    let gram = DMatrix::from_fn(n, n, |i, j| {
        matern32(distance(locations[i], locations[j]), kernel)
    });
    let mut system = match form {
        SolveForm::Standard => gram.clone(),
        SolveForm::NormalEquations => &gram * &gram,
    };
    for i in 0..n {
        system[(i, i)] += kernel.regularization;
    }
    let weights = Cholesky::new(system)
        .ok_or_else(|| {
            Error::numerical(
                "kernel system is not positive definite; duplicate reference locations \
                 require regularization > 0",
            )
        })?
        .solve(&DVector::from_column_slice(values));
    let cross = DVector::from_fn(n, |i, _| matern32(distance(query, locations[i]), kernel));
    let prediction = cross.dot(&weights);
    if !prediction.is_finite() {
        return Err(Error::numerical("kernel prediction is not finite"));
    }
    Ok(prediction.clamp(RSS_MIN_DBM, RSS_MAX_DBM))
}

/// Batched query-variant predictor with cached indicator-point eligibility.
///
/// For a feature, points that measured it contribute their values; points
/// that did not contribute the missing indicator, but only when they lie
/// within the query radius of at least one measuring point of that feature.
pub(crate) struct FeaturePredictor<'a> {
    training: &'a RfmTrainingSet,
    cfg: &'a KsConfig,
    radius_m: f64,
    indicator_ok: Vec<OnceLock<Vec<bool>>>,
}

impl<'a> FeaturePredictor<'a> {
    pub(crate) fn new(training: &'a RfmTrainingSet, cfg: &'a KsConfig) -> Result<Self> {
        cfg.validate()?;
        let mut indicator_ok = Vec::new();
        indicator_ok.resize_with(training.registry.len(), OnceLock::new);
        Ok(FeaturePredictor {
            training,
            cfg,
            radius_m: cfg.query.radius_m(&cfg.kernel),
            indicator_ok,
        })
    }

    /// Whether each training point may serve as an indicator for the feature.
    fn indicator_mask(&self, feature_idx: usize) -> &[bool] {
        self.indicator_ok[feature_idx].get_or_init(|| {
            let members = &self.training.feature_members[feature_idx];
            let points = &self.training.points;
            let mut mask = vec![false; points.len()];
            for (idx, point) in points.iter().enumerate() {
                if members.binary_search(&idx).is_ok() {
                    continue; // measured the feature; contributes its value
                }
                mask[idx] = members
                    .iter()
                    .any(|&m| distance(point.location, points[m].location) <= self.radius_m);
            }
            mask
        })
    }

    /// Query-variant prediction for a registry feature index.
    pub(crate) fn predict(&self, loc: [f64; 2], feature_idx: usize) -> Result<f64> {
        let points = &self.training.points;
        let members = &self.training.feature_members[feature_idx];
        let mask = self.indicator_mask(feature_idx);
        let mut locations = Vec::new();
        let mut values = Vec::new();
        let mut has_member = false;
        for (idx, point) in points.iter().enumerate() {
            if distance(point.location, loc) > self.radius_m {
                continue;
            }
            if members.binary_search(&idx).is_ok() {
                let feature = self.training.registry.id(feature_idx);
                locations.push(point.location);
                values.push(point.fingerprint.get(feature).expect("member measures feature"));
                has_member = true;
            } else if mask[idx] {
                locations.push(point.location);
                values.push(MISSING_DBM);
            }
        }
        // Without a measuring point in range there is no evidence the
        // feature is audible here. Solving an indicator-only system would
        // let the zero-mean prior pull the prediction far above the
        // missing level (`-110 * w` with a small weight sum), fabricating
        // coverage outside the feature's actual footprint.
        if !has_member {
            return Ok(MISSING_DBM);
        }
        solve_at(loc, &locations, &values, &self.cfg.kernel, self.cfg.solve_form)
    }
}

/// Kernel-smoothed prediction of one feature at a location, using the entire
/// training set: measuring points contribute their values, all other points
/// contribute the missing indicator.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when no training point measured the
/// feature, and [`Error::Numerical`] when the system cannot be factorized
/// (duplicate locations at zero regularization).
pub fn ks_predict(
    loc: [f64; 2],
    feature: &FeatureId,
    training: &RfmTrainingSet,
    cfg: &KsConfig,
) -> Result<f64> {
    cfg.kernel.validate()?;
    let members = training
        .measuring_points(feature)
        .filter(|m| !m.is_empty())
        .ok_or_else(|| Error::invalid(format!("no training point measured feature {feature}")))?;
    let mut locations = Vec::with_capacity(training.len());
    let mut values = Vec::with_capacity(training.len());
    for (idx, point) in training.points.iter().enumerate() {
        locations.push(point.location);
        values.push(if members.binary_search(&idx).is_ok() {
            point.fingerprint.get(feature).expect("member measures feature")
        } else {
            MISSING_DBM
        });
    }
    solve_at(loc, &locations, &values, &cfg.kernel, cfg.solve_form)
}

/// Query-variant prediction: like [`ks_predict`] but restricted to reference
/// points within the query radius of `loc` (with indicator points further
/// required to lie within the radius of the feature's coverage). An empty
/// subset — including a feature the registry does not know — yields the
/// missing indicator.
pub fn ks_predict_query(
    loc: [f64; 2],
    feature: &FeatureId,
    training: &RfmTrainingSet,
    cfg: &KsConfig,
) -> Result<f64> {
    let predictor = FeaturePredictor::new(training, cfg)?;
    match training.registry.index_of(feature) {
        Some(feature_idx) => predictor.predict(loc, feature_idx),
        None => Ok(MISSING_DBM),
    }
}

/// Smooths a set of labeled points against a training set: every measured
/// value is replaced by the query-variant prediction at the point's own
/// location. Features whose prediction falls to the missing indicator (within
/// [`MEASURABLE_MARGIN_DBM`]) are dropped, as are features the training
/// registry does not know.
///
/// # Errors
/// Returns [`Error::InvalidInput`] for invalid configuration and
/// [`Error::Numerical`] when a local system cannot be factorized.
pub fn smooth_points(
    points: &[LabeledFingerprint],
    training: &RfmTrainingSet,
    cfg: &KsConfig,
) -> Result<Vec<LabeledFingerprint>> {
    let predictor = FeaturePredictor::new(training, cfg)?;
    points
        .par_iter()
        .map(|point| {
            let mut smoothed = Fingerprint::new();
            for (feature, _) in point.fingerprint.iter() {
                let Some(feature_idx) = training.registry.index_of(feature) else {
                    continue;
                };
                let prediction = predictor.predict(point.location, feature_idx)?;
                if prediction > MISSING_DBM + MEASURABLE_MARGIN_DBM {
                    smoothed.insert(feature.clone(), prediction);
                }
            }
            Ok(LabeledFingerprint {
                location: point.location,
                fingerprint: smoothed,
                block: point.block,
                timestamp: point.timestamp,
            })
        })
        .collect()
}

/// Denoises a training set in place of its raw measurements; the registry is
/// preserved. See [`smooth_points`] for the per-feature rule.
pub fn smooth_dataset(training: &RfmTrainingSet, cfg: &KsConfig) -> Result<RfmTrainingSet> {
    let smoothed = smooth_points(training.points(), training, cfg)?;
    RfmTrainingSet::with_registry(smoothed, training.registry.clone())
}

/// Regular grid of interpolated cell fingerprints over a region of interest.
///
/// Cells are row-major (x fastest); each cell fingerprint holds the features
/// predicted measurable at the cell center, with values quantized to f32
/// precision so that serialization round-trips bit-exactly.
#[derive(Debug)]
pub struct RfmGrid {
    bounds: RoiBounds,
    spacing_m: f64,
    nx: usize,
    ny: usize,
    registry: GlobalFeatureRegistry,
    cells: Vec<Fingerprint>,
    matcher: OnceLock<IndexedCells>,
}

impl PartialEq for RfmGrid {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds
            && self.spacing_m == other.spacing_m
            && self.nx == other.nx
            && self.ny == other.ny
            && self.registry == other.registry
            && self.cells == other.cells
    }
}

impl RfmGrid {
    /// Assembles a grid from already-interpolated cells (deserialization path).
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when the cell count does not match the
    /// grid shape or a cell carries an unregistered feature.
    pub fn from_parts(
        bounds: RoiBounds,
        spacing_m: f64,
        nx: usize,
        ny: usize,
        registry: GlobalFeatureRegistry,
        cells: Vec<Fingerprint>,
    ) -> Result<Self> {
        bounds.validate()?;
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::invalid("grid spacing must be finite and > 0"));
        }
        if nx == 0 || ny == 0 || cells.len() != nx * ny {
            return Err(Error::invalid(format!(
                "grid shape {nx}x{ny} does not match {} cells",
                cells.len()
            )));
        }
        for cell in &cells {
            for (feature, _) in cell.iter() {
                if !registry.contains(feature) {
                    return Err(Error::invalid(format!(
                        "grid cell carries unregistered feature {feature}"
                    )));
                }
            }
        }
        Ok(RfmGrid {
            bounds,
            spacing_m,
            nx,
            ny,
            registry,
            cells,
            matcher: OnceLock::new(),
        })
    }

    /// Region the grid covers.
    #[must_use]
    pub fn bounds(&self) -> RoiBounds {
        self.bounds
    }

    /// Cell spacing in meters.
    #[must_use]
    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    /// Number of columns.
    #[must_use]
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of rows.
    #[must_use]
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of cells.
    #[must_use]
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Whether the grid has no cells (never true for a constructed grid).
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Feature registry the cells are defined against.
    #[must_use]
    pub fn registry(&self) -> &GlobalFeatureRegistry {
        &self.registry
    }

    /// All cell fingerprints, row-major.
    #[must_use]
    pub fn cells(&self) -> &[Fingerprint] {
        &self.cells
    }

    /// Center of a cell in meters.
    #[must_use]
    pub fn cell_center(&self, index: usize) -> [f64; 2] {
        let xi = index % self.nx;
        let yi = index / self.nx;
        [
            self.bounds.min[0] + (xi as f64 + 0.5) * self.spacing_m,
            self.bounds.min[1] + (yi as f64 + 0.5) * self.spacing_m,
        ]
    }

    /// Fingerprint of a cell.
    #[must_use]
    pub fn cell_fingerprint(&self, index: usize) -> &Fingerprint {
        &self.cells[index]
    }

    /// Index of the cell whose center is nearest to the location.
    #[must_use]
    pub fn nearest_cell(&self, loc: [f64; 2]) -> usize {
        let xi = ((loc[0] - self.bounds.min[0]) / self.spacing_m).floor();
        let yi = ((loc[1] - self.bounds.min[1]) / self.spacing_m).floor();
        let xi = (xi.max(0.0) as usize).min(self.nx - 1);
        let yi = (yi.max(0.0) as usize).min(self.ny - 1);
        yi * self.nx + xi
    }

    /// Positioning cache: cells densified over registry indices.
    pub(crate) fn indexed_cells(&self) -> &IndexedCells {
        self.matcher
            .get_or_init(|| IndexedCells::build(&self.cells, &self.registry))
    }
}

/// Interpolates the full grid of cell fingerprints: for every cell center and
/// registry feature, the query-variant prediction is kept when it exceeds the
/// missing indicator by [`MEASURABLE_MARGIN_DBM`]. Cell values are quantized
/// to f32 precision.
pub fn interpolate_grid(
    training: &RfmTrainingSet,
    roi: &RoiBounds,
    spacing_m: f64,
    cfg: &KsConfig,
) -> Result<RfmGrid> {
    roi.validate()?;
    if !(spacing_m.is_finite() && spacing_m > 0.0) {
        return Err(Error::invalid("grid spacing must be finite and > 0"));
    }
    if training.is_empty() {
        return Err(Error::invalid("grid interpolation requires a non-empty training set"));
    }
    let cells_along = |extent: f64| ((extent / spacing_m - 1e-9).ceil().max(0.0) as usize).max(1);
    let nx = cells_along(roi.width());
    let ny = cells_along(roi.height());
    let predictor = FeaturePredictor::new(training, cfg)?;
    let registry = training.registry().clone();
    let centers: Vec<[f64; 2]> = (0..nx * ny)
        .map(|i| {
            let xi = i % nx;
            let yi = i / nx;
            [
                roi.min[0] + (xi as f64 + 0.5) * spacing_m,
                roi.min[1] + (yi as f64 + 0.5) * spacing_m,
            ]
        })
        .collect();
    let cells: Vec<Fingerprint> = centers
        .par_iter()
        .map(|&center| {
            let mut cell = Fingerprint::new();
            for feature_idx in 0..registry.len() {
                let prediction = predictor.predict(center, feature_idx)?;
                if prediction > MISSING_DBM + MEASURABLE_MARGIN_DBM {
                    // f32 quantization keeps the serialized grid bit-exact.
                    cell.insert(registry.id(feature_idx).clone(), f64::from(prediction as f32));
                }
            }
            Ok(cell)
        })
        .collect::<Result<_>>()?;
    RfmGrid::from_parts(*roi, spacing_m, nx, ny, registry, cells)
}

/// Expected fingerprint at a location from a materialized grid: the nearest
/// cell's fingerprint.
#[must_use]
pub fn expected_fingerprint_grid(loc: [f64; 2], grid: &RfmGrid) -> Fingerprint {
    grid.cell_fingerprint(grid.nearest_cell(loc)).clone()
}

/// Expected fingerprint at a location predicted directly from the training
/// set (continuous mode): every registry feature whose query-variant
/// prediction is measurable.
pub fn expected_fingerprint_ks(
    loc: [f64; 2],
    training: &RfmTrainingSet,
    cfg: &KsConfig,
) -> Result<Fingerprint> {
    let predictor = FeaturePredictor::new(training, cfg)?;
    let mut expected = Fingerprint::new();
    for feature_idx in 0..training.registry().len() {
        let prediction = predictor.predict(loc, feature_idx)?;
        if prediction > MISSING_DBM + MEASURABLE_MARGIN_DBM {
            expected.insert(training.registry().id(feature_idx).clone(), prediction);
        }
    }
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fid(raw: &str) -> FeatureId {
        FeatureId::new(raw).unwrap()
    }

    fn point(x: f64, y: f64, entries: &[(&str, f64)]) -> LabeledFingerprint {
        let fp: Fingerprint = entries.iter().map(|&(id, v)| (fid(id), v)).collect();
        LabeledFingerprint::new([x, y], fp)
    }

    fn exact_cfg() -> KsConfig {
        KsConfig {
            kernel: KernelParams {
                regularization: 0.0,
                ..KernelParams::default()
            },
            ..KsConfig::default()
        }
    }

    #[test]
    fn zero_regularization_interpolates_through_a_single_point() {
        let training = RfmTrainingSet::from_points(vec![point(2.0, 3.0, &[("f1", -57.0)])]).unwrap();
        let cfg = exact_cfg();
        let predicted = ks_predict([2.0, 3.0], &fid("f1"), &training, &cfg).unwrap();
        assert_relative_eq!(predicted, -57.0, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_points_interpolate_at_nodes_and_shrink_between_them() {
        let training = RfmTrainingSet::from_points(vec![
            point(-1.0, 0.0, &[("f1", -60.0)]),
            point(1.0, 0.0, &[("f1", -60.0)]),
        ])
        .unwrap();
        let cfg = exact_cfg();
        // With zero regularization the smoother passes through each node.
        for x in [-1.0, 1.0] {
            let at_node = ks_predict([x, 0.0], &fid("f1"), &training, &cfg).unwrap();
            assert_relative_eq!(at_node, -60.0, epsilon = 1e-9);
        }
        // Between the nodes the zero-mean ridge pulls the prediction toward
        // zero. For the symmetric two-point system the solve has the closed
        // form 2 K(1) v / (K(0) + K(2)).
        let predicted = ks_predict([0.0, 0.0], &fid("f1"), &training, &cfg).unwrap();
        let k = &cfg.kernel;
        let expected = 2.0 * matern32(1.0, k) * -60.0 / (matern32(0.0, k) + matern32(2.0, k));
        assert_relative_eq!(predicted, expected, epsilon = 1e-9);
        assert!(predicted > -60.0, "shrinkage must move toward zero");
    }

    #[test]
    fn heavy_regularization_shrinks_predictions_toward_zero() {
        let training = RfmTrainingSet::from_points(vec![point(0.0, 0.0, &[("f1", -60.0)])]).unwrap();
        let cfg = KsConfig {
            kernel: KernelParams {
                regularization: 1e9,
                ..KernelParams::default()
            },
            ..KsConfig::default()
        };
        let predicted = ks_predict([0.0, 0.0], &fid("f1"), &training, &cfg).unwrap();
        assert!(predicted.abs() < 0.01, "got {predicted}");
    }

    #[test]
    fn duplicate_locations_without_regularization_fail_numerically() {
        let training = RfmTrainingSet::from_points(vec![
            point(0.0, 0.0, &[("f1", -60.0)]),
            point(0.0, 0.0, &[("f1", -50.0)]),
        ])
        .unwrap();
        let cfg = exact_cfg();
        let err = ks_predict([0.0, 0.0], &fid("f1"), &training, &cfg).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn unknown_feature_is_invalid_for_the_full_variant() {
        let training = RfmTrainingSet::from_points(vec![point(0.0, 0.0, &[("f1", -60.0)])]).unwrap();
        let err = ks_predict([0.0, 0.0], &fid("nope"), &training, &exact_cfg()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn query_variant_matches_full_solve_on_the_radius_subset() {
        // Points at x = 0, 1, 10; a radius of 2 m around the query at the
        // origin selects exactly the first two.
        let training = RfmTrainingSet::from_points(vec![
            point(0.0, 0.0, &[("f1", -50.0)]),
            point(1.0, 0.0, &[("f1", -55.0)]),
            point(10.0, 0.0, &[("f1", -80.0)]),
        ])
        .unwrap();
        let cfg = KsConfig {
            kernel: KernelParams {
                regularization: 0.5,
                ..KernelParams::default()
            },
            query: QueryConfig { scale: 2.0 },
            ..KsConfig::default()
        };
        let by_query = ks_predict_query([0.0, 0.0], &fid("f1"), &training, &cfg).unwrap();
        let subset = RfmTrainingSet::from_points(vec![
            point(0.0, 0.0, &[("f1", -50.0)]),
            point(1.0, 0.0, &[("f1", -55.0)]),
        ])
        .unwrap();
        let by_subset = ks_predict([0.0, 0.0], &fid("f1"), &subset, &cfg).unwrap();
        assert_relative_eq!(by_query, by_subset, epsilon = 1e-12);
    }

    #[test]
    fn query_variant_far_from_coverage_returns_missing() {
        let training = RfmTrainingSet::from_points(vec![point(0.0, 0.0, &[("f1", -50.0)])]).unwrap();
        let cfg = KsConfig::default(); // radius 5 m
        let predicted = ks_predict_query([100.0, 100.0], &fid("f1"), &training, &cfg).unwrap();
        assert_relative_eq!(predicted, MISSING_DBM);
        // Unknown features behave like empty subsets in the query variant.
        let predicted = ks_predict_query([0.0, 0.0], &fid("nope"), &training, &cfg).unwrap();
        assert_relative_eq!(predicted, MISSING_DBM);
    }

    #[test]
    fn indicator_points_pull_predictions_down_at_coverage_edges() {
        // f1 is covered on the left half only; the right half measures other
        // features. Near the boundary the prediction must decay toward the
        // missing indicator rather than toward 0 dBm.
        let mut points = Vec::new();
        for x in 0..=10 {
            let x = f64::from(x);
            if x <= 5.0 {
                points.push(point(x, 0.0, &[("f1", -60.0), ("f2", -70.0)]));
            } else {
                points.push(point(x, 0.0, &[("f2", -70.0)]));
            }
        }
        let training = RfmTrainingSet::from_points(points).unwrap();
        let cfg = KsConfig {
            kernel: KernelParams {
                regularization: 0.01,
                ..KernelParams::default()
            },
            query: QueryConfig { scale: 3.0 },
            ..KsConfig::default()
        };
        let inside = ks_predict_query([3.0, 0.0], &fid("f1"), &training, &cfg).unwrap();
        let outside = ks_predict_query([8.0, 0.0], &fid("f1"), &training, &cfg).unwrap();
        assert!(inside > -70.0, "covered side stays near measured level, got {inside}");
        assert!(outside < -90.0, "uncovered side decays to the indicator, got {outside}");
    }

    #[test]
    fn prediction_is_invariant_to_training_point_order() {
        let mut points = vec![
            point(0.0, 0.0, &[("f1", -50.0)]),
            point(1.0, 0.5, &[("f1", -55.0)]),
            point(2.0, 1.0, &[("f1", -60.0)]),
            point(0.5, 1.5, &[("f1", -52.0)]),
        ];
        let cfg = KsConfig::default();
        let forward =
            ks_predict([1.0, 1.0], &fid("f1"), &RfmTrainingSet::from_points(points.clone()).unwrap(), &cfg)
                .unwrap();
        points.reverse();
        let reversed =
            ks_predict([1.0, 1.0], &fid("f1"), &RfmTrainingSet::from_points(points).unwrap(), &cfg)
                .unwrap();
        assert_relative_eq!(forward, reversed, epsilon = 1e-9);
    }

    #[test]
    fn smoothing_a_single_point_preserves_its_values_exactly() {
        let training = RfmTrainingSet::from_points(vec![point(1.0, 1.0, &[("f1", -47.5)])]).unwrap();
        let smoothed = smooth_dataset(&training, &exact_cfg()).unwrap();
        let value = smoothed.points()[0].fingerprint.get(&fid("f1")).unwrap();
        assert_relative_eq!(value, -47.5, epsilon = 1e-9);
    }

    #[test]
    fn smoothing_drops_features_without_training_support() {
        let training = RfmTrainingSet::from_points(vec![point(0.0, 0.0, &[("f1", -60.0)])]).unwrap();
        let far_sample = vec![point(100.0, 100.0, &[("f1", -55.0)])];
        let smoothed = smooth_points(&far_sample, &training, &KsConfig::default()).unwrap();
        assert!(smoothed[0].fingerprint.is_empty());
    }

    #[test]
    fn smoothing_noiseless_smooth_data_is_nearly_lossless() {
        // A gently sloping field sampled on a 6x6 grid; smoothing with small
        // regularization must reproduce the values closely.
        let mut points = Vec::new();
        for yi in 0..6 {
            for xi in 0..6 {
                let (x, y) = (f64::from(xi), f64::from(yi));
                let value = -50.0 - 0.8 * x - 0.5 * y;
                points.push(point(x, y, &[("f1", value)]));
            }
        }
        let training = RfmTrainingSet::from_points(points).unwrap();
        let cfg = KsConfig {
            kernel: KernelParams {
                length_scale_m: 2.0,
                regularization: 1e-6,
                ..KernelParams::default()
            },
            query: QueryConfig { scale: 4.0 },
            ..KsConfig::default()
        };
        let smoothed = smooth_dataset(&training, &cfg).unwrap();
        let mae: f64 = training
            .points()
            .iter()
            .zip(smoothed.points())
            .map(|(a, b)| {
                (a.fingerprint.get(&fid("f1")).unwrap() - b.fingerprint.get(&fid("f1")).unwrap())
                    .abs()
            })
            .sum::<f64>()
            / training.len() as f64;
        assert!(mae < 1.0, "MAE {mae} dBm");
    }

    #[test]
    fn grid_cell_containing_a_training_point_reproduces_it() {
        let roi = RoiBounds::new([0.0, 0.0], [0.5, 0.5]).unwrap();
        let training =
            RfmTrainingSet::from_points(vec![point(0.25, 0.25, &[("f1", -50.0)])]).unwrap();
        let grid = interpolate_grid(&training, &roi, 0.5, &exact_cfg()).unwrap();
        assert_eq!(grid.len(), 1);
        let value = grid.cell_fingerprint(0).get(&fid("f1")).unwrap();
        assert!((value - -50.0).abs() < 0.5, "got {value}");
    }

    #[test]
    fn spacing_larger_than_the_roi_yields_a_single_cell() {
        let roi = RoiBounds::new([0.0, 0.0], [2.0, 1.0]).unwrap();
        let training = RfmTrainingSet::from_points(vec![point(1.0, 0.5, &[("f1", -50.0)])]).unwrap();
        let grid = interpolate_grid(&training, &roi, 5.0, &KsConfig::default()).unwrap();
        assert_eq!((grid.nx(), grid.ny()), (1, 1));
    }

    #[test]
    fn uncovered_cells_have_empty_fingerprints() {
        let roi = RoiBounds::new([0.0, 0.0], [20.0, 1.0]).unwrap();
        let training = RfmTrainingSet::from_points(vec![point(0.5, 0.5, &[("f1", -50.0)])]).unwrap();
        let cfg = KsConfig {
            query: QueryConfig { scale: 2.0 },
            ..KsConfig::default()
        };
        let grid = interpolate_grid(&training, &roi, 1.0, &cfg).unwrap();
        let last = grid.cell_fingerprint(grid.len() - 1);
        assert!(last.is_empty());
        assert!(!grid.cell_fingerprint(0).is_empty());
    }

    #[test]
    fn grid_lookup_returns_the_nearest_cell_fingerprint() {
        let roi = RoiBounds::new([0.0, 0.0], [2.0, 2.0]).unwrap();
        let training = RfmTrainingSet::from_points(vec![
            point(0.5, 0.5, &[("f1", -45.0)]),
            point(1.5, 1.5, &[("f1", -75.0)]),
        ])
        .unwrap();
        let grid = interpolate_grid(&training, &roi, 1.0, &KsConfig::default()).unwrap();
        let near_origin = expected_fingerprint_grid([0.1, 0.2], &grid);
        assert_eq!(&near_origin, grid.cell_fingerprint(0));
        assert_eq!(grid.nearest_cell([1.9, 1.9]), grid.len() - 1);
        // Out-of-bounds locations clamp to the border cells.
        assert_eq!(grid.nearest_cell([-5.0, -5.0]), 0);
        assert_eq!(grid.nearest_cell([99.0, 99.0]), grid.len() - 1);
    }

    #[test]
    fn continuous_expected_fingerprint_drops_unsupported_features() {
        let training = RfmTrainingSet::from_points(vec![
            point(0.0, 0.0, &[("f1", -50.0)]),
            point(30.0, 0.0, &[("f2", -60.0)]),
        ])
        .unwrap();
        let expected = expected_fingerprint_ks([0.0, 0.0], &training, &KsConfig::default()).unwrap();
        assert!(expected.contains(&fid("f1")));
        assert!(!expected.contains(&fid("f2")));
    }

    #[test]
    fn roi_bounds_validate_and_measure() {
        assert!(RoiBounds::new([0.0, 0.0], [-1.0, 1.0]).is_err());
        let roi = RoiBounds::new([1.0, 2.0], [4.0, 6.0]).unwrap();
        assert_relative_eq!(roi.width(), 3.0);
        assert_relative_eq!(roi.height(), 4.0);
        let bbox = RoiBounds::from_locations([&[0.0, 1.0], &[2.0, -1.0]]).unwrap();
        assert_eq!(bbox.min, [0.0, -1.0]);
        assert_eq!(bbox.max, [2.0, 1.0]);
    }
}
