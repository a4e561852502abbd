//! Feature-wise change detection.
//!
//! Once a position estimate exists, the measured fingerprint can be compared
//! against the map's expected fingerprint there. Each feature's measured and
//! expected values are modeled as Gaussians whose spread comes from a fitted
//! signal-variability model ([`VariabilityModel`]); the belief that the
//! feature changed is one minus the expected-value density at the point where
//! the two Gaussians are equally likely — near zero when the values are in
//! agreement, and approaching one as they separate. Missing features take the
//! missing-indicator value, so appearance and disappearance both register as
//! changes.
//!
//! [`drop_changed_and_relocate`] closes the loop: features whose belief
//! crosses a threshold are excluded from both the query and the map, and the
//! position is re-estimated on the surviving features.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{FeatureId, Fingerprint, MISSING_DBM};
use crate::positioning::{knn_locate_dropout, PositionEstimate, PositioningConfig};
use crate::rfm::RfmGrid;
use crate::stats::{median, sample_std};

/// Linear model of signal variability: the standard deviation expected for a
/// reading at a given level, floored to stay strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariabilityModel {
    /// Slope of the std-vs-level line (1/dBm · dBm = dimensionless).
    pub slope: f64,
    /// Intercept of the line (dBm).
    pub intercept_dbm: f64,
    /// Lower bound on the modeled standard deviation (dBm).
    pub sigma_floor_dbm: f64,
}

impl Default for VariabilityModel {
    fn default() -> Self {
        VariabilityModel {
            slope: 0.0,
            intercept_dbm: 2.0,
            sigma_floor_dbm: 0.5,
        }
    }
}

impl VariabilityModel {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.slope.is_finite() && self.intercept_dbm.is_finite()) {
            return Err(Error::invalid("variability model coefficients must be finite"));
        }
        if !(self.sigma_floor_dbm.is_finite() && self.sigma_floor_dbm > 0.0) {
            return Err(Error::invalid("sigma_floor_dbm must be finite and > 0"));
        }
        Ok(())
    }

    /// Modeled standard deviation at a signal level (dBm).
    #[must_use]
    pub fn sigma(&self, level_dbm: f64) -> f64 {
        (self.slope * level_dbm + self.intercept_dbm).max(self.sigma_floor_dbm)
    }
}

/// Fits the variability line by least squares over repeated-observation
/// groups: each group with at least two values contributes one point
/// (median level, sample standard deviation). A degenerate spread of medians
/// yields a flat line at the mean deviation.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when no group has two or more values or
/// the floor is not positive.
pub fn fit_variability(groups: &[Vec<f64>], sigma_floor_dbm: f64) -> Result<VariabilityModel> {
    if !(sigma_floor_dbm.is_finite() && sigma_floor_dbm > 0.0) {
        return Err(Error::invalid("sigma_floor_dbm must be finite and > 0"));
    }
    let points: Vec<(f64, f64)> = groups
        .iter()
        .filter(|group| group.len() >= 2)
        .map(|group| (median(group), sample_std(group)))
        .collect();
    if points.is_empty() {
        return Err(Error::invalid(
            "variability fitting requires at least one group with two or more values",
        ));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|&(x, _)| (x - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|&(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let (slope, intercept_dbm) = if sxx.abs() < 1e-12 {
        (0.0, mean_y)
    } else {
        let slope = sxy / sxx;
        (slope, mean_y - slope * mean_x)
    };
    let model = VariabilityModel {
        slope,
        intercept_dbm,
        sigma_floor_dbm,
    };
    model.validate()?;
    Ok(model)
}

/// Points where the densities of `N(mu1, sigma1)` and `N(mu2, sigma2)` are
/// equal. Equal spreads meet exactly once (at the midpoint); distinct spreads
/// meet twice.
#[must_use]
pub fn gaussian_intersections(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Vec<f64> {
    debug_assert!(sigma1 > 0.0 && sigma2 > 0.0);
    if sigma1 == sigma2 {
        return vec![0.5 * (mu1 + mu2)];
    }
    let (s1, s2) = (sigma1 * sigma1, sigma2 * sigma2);
    let a = s1 - s2;
    if a == 0.0 {
        // Distinct sigmas whose squares round to the same float: fall back
        // to the equal-spread midpoint instead of dividing by zero.
        return vec![0.5 * (mu1 + mu2)];
    }
    let b = 2.0 * (s2 * mu1 - s1 * mu2);
    let c = s1 * mu2 * mu2 - s2 * mu1 * mu1 - 2.0 * s1 * s2 * (sigma1 / sigma2).ln();
    // Distinct spreads always intersect twice; clamp tiny negative
    // discriminants from cancellation.
    let discriminant = (b * b - 4.0 * a * c).max(0.0);
    let root = discriminant.sqrt();
    let x1 = (-b - root) / (2.0 * a);
    let x2 = (-b + root) / (2.0 * a);
    if x1 <= x2 {
        vec![x1, x2]
    } else {
        vec![x2, x1]
    }
}

fn normal_density(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Belief in `[0, 1]` that a feature changed, from its measured and expected
/// values. Absent values take the missing indicator, so a feature seen on
/// only one side still scores. Identical values yield zero belief; the belief
/// grows toward one as the values separate relative to the modeled spread.
#[must_use]
pub fn change_belief(
    measured_dbm: Option<f64>,
    expected_dbm: Option<f64>,
    model: &VariabilityModel,
) -> f64 {
    let measured = measured_dbm.unwrap_or(MISSING_DBM);
    let expected = expected_dbm.unwrap_or(MISSING_DBM);
    if measured == expected {
        return 0.0;
    }
    let sigma_measured = model.sigma(measured);
    let sigma_expected = model.sigma(expected);
    let max_density = gaussian_intersections(expected, sigma_expected, measured, sigma_measured)
        .into_iter()
        .map(|x| normal_density(x, expected, sigma_expected))
        .fold(0.0, f64::max);
    (1.0 - max_density).clamp(0.0, 1.0)
}

/// Belief and the values behind it, for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBelief {
    /// Measured value, when the query carried the feature (dBm).
    pub measured_dbm: Option<f64>,
    /// Expected value, when the map carried the feature (dBm).
    pub expected_dbm: Option<f64>,
    /// Change belief in `[0, 1]`.
    pub belief: f64,
}

/// Per-feature change beliefs over the union of measured and expected keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeBeliefSet {
    beliefs: BTreeMap<FeatureId, FeatureBelief>,
}

impl ChangeBeliefSet {
    /// Belief entry for a feature, when it appeared on either side.
    #[must_use]
    pub fn get(&self, feature: &FeatureId) -> Option<&FeatureBelief> {
        self.beliefs.get(feature)
    }

    /// Iterates features and beliefs in feature order.
    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &FeatureBelief)> {
        self.beliefs.iter()
    }

    /// Number of scored features.
    #[must_use]
    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    /// Whether no feature was scored.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// Features whose belief reaches the threshold.
    #[must_use]
    pub fn changed_features(&self, threshold: f64) -> BTreeSet<FeatureId> {
        self.beliefs
            .iter()
            .filter(|(_, entry)| entry.belief >= threshold)
            .map(|(feature, _)| feature.clone())
            .collect()
    }
}

/// Scores every feature in the union of the measured and expected
/// fingerprints.
#[must_use]
pub fn detect_changes(
    measured: &Fingerprint,
    expected: &Fingerprint,
    model: &VariabilityModel,
) -> ChangeBeliefSet {
    let mut features: BTreeSet<&FeatureId> = measured.features().collect();
    features.extend(expected.features());
    let beliefs = features
        .into_iter()
        .map(|feature| {
            let measured_dbm = measured.get(feature);
            let expected_dbm = expected.get(feature);
            let entry = FeatureBelief {
                measured_dbm,
                expected_dbm,
                belief: change_belief(measured_dbm, expected_dbm, model),
            };
            (feature.clone(), entry)
        })
        .collect();
    ChangeBeliefSet { beliefs }
}

/// Result of excluding suspected-change features and re-estimating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relocation {
    /// Features excluded from the re-estimate.
    pub dropped: BTreeSet<FeatureId>,
    /// The re-estimate, or `None` when the exclusions left no usable
    /// features (callers should keep their prior estimate).
    pub estimate: Option<PositionEstimate>,
}

/// Excludes every feature whose belief reaches `threshold` from both the
/// query and the map, and re-runs kNN positioning on the rest.
///
/// # Errors
/// Propagates configuration errors; an over-aggressive exclusion that leaves
/// nothing usable yields `estimate: None` rather than an error.
pub fn drop_changed_and_relocate(
    measured: &Fingerprint,
    beliefs: &ChangeBeliefSet,
    threshold: f64,
    grid: &RfmGrid,
    cfg: &PositioningConfig,
) -> Result<Relocation> {
    cfg.validate()?;
    let dropped = beliefs.changed_features(threshold);
    let remaining = measured.iter().filter(|(feature, _)| !dropped.contains(feature)).count();
    if remaining == 0 {
        return Ok(Relocation {
            dropped,
            estimate: None,
        });
    }
    match knn_locate_dropout(measured, grid, cfg, &dropped) {
        Ok(estimate) => Ok(Relocation {
            dropped,
            estimate: Some(estimate),
        }),
        // The Euclidean mode can still run out of usable features when the
        // survivors are all outside the registry.
        Err(Error::InvalidInput(_)) => Ok(Relocation {
            dropped,
            estimate: None,
        }),
        Err(other) => Err(other),
    }
}
