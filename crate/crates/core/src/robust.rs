//! Robust localization by feature resampling.
//!
//! A measured fingerprint may carry corrupted features (transmitters moved,
//! removed, or re-powered since the map was built). Instead of trusting one
//! kNN match on the full fingerprint, the robust pipeline draws many random
//! feature subsets, positions each subset independently, and then identifies
//! which of the resulting intermediate locations are consistent with the
//! measurement:
//!
//! 1. [`resample`] draws a feature subset per draw index (deterministic in
//!    the seed),
//! 2. [`intermediate_locations`] maps every subset to a kNN estimate,
//! 3. [`identify_candidates_mji`] scores each location by the key-set overlap
//!    between the measurement and the map's expected fingerprint there, keeps
//!    the near-maximal ones, and blends them into the final estimate;
//!    [`identify_candidate_threshold`] is the count-based alternative that
//!    picks the single location with the most in-tolerance residuals.
//!
//! Subsets that happen to avoid corrupted features position correctly, and
//! corrupt-feature subsets scatter; the consistency scores concentrate the
//! estimate on the correct cluster.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::{indicating_value, mji, residual_vector, Fingerprint};
use crate::positioning::{knn_locate, PositioningConfig};
use crate::rfm::{expected_fingerprint_grid, RfmGrid};
use crate::rng::{domain, substream};

/// Configuration of the feature-subset draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResampleConfig {
    /// Number of subset draws.
    pub n_resamples: usize,
    /// Fraction of the measured features per subset (rounded up).
    pub alpha: f64,
    /// Lower bound on the subset size (before capping at the fingerprint
    /// size).
    pub min_features: usize,
    /// Seed of the deterministic draw stream.
    pub seed: u64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            n_resamples: 200,
            alpha: 0.55,
            min_features: 3,
            seed: 0,
        }
    }
}

impl ResampleConfig {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if self.n_resamples == 0 {
            return Err(Error::invalid("resampling requires n_resamples >= 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("resampling alpha must lie in (0, 1]"));
        }
        if self.min_features == 0 {
            return Err(Error::invalid("resampling requires min_features >= 1"));
        }
        Ok(())
    }

    /// Subset size for a fingerprint with `feature_count` features:
    /// `max(min_features, ceil(alpha * count))`, capped at the count.
    #[must_use]
    pub fn subset_size(&self, feature_count: usize) -> usize {
        // The epsilon guards against alpha * count landing a hair above an
        // integer (e.g. 0.55 * 20 = 11.000000000000002).
        let scaled = (self.alpha * feature_count as f64 - 1e-9).ceil().max(0.0) as usize;
        scaled.max(self.min_features).min(feature_count)
    }
}

/// Full configuration of the robust pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    /// Subset draw parameters.
    pub resample: ResampleConfig,
    /// kNN parameters used for every intermediate estimate.
    pub positioning: PositioningConfig,
    /// Candidates must score at least this fraction of the best overlap
    /// score to be blended into the final estimate.
    pub mji_ratio: f64,
    /// Residual magnitude (dBm) still counted as agreeing, for the
    /// count-based candidate strategy.
    pub residual_tolerance_dbm: f64,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            resample: ResampleConfig::default(),
            positioning: PositioningConfig::default(),
            mji_ratio: 0.97,
            residual_tolerance_dbm: 10.0,
        }
    }
}

impl RobustConfig {
    /// Checks parameter ranges across all nested configurations.
    pub fn validate(&self) -> Result<()> {
        self.resample.validate()?;
        self.positioning.validate()?;
        if !(self.mji_ratio.is_finite() && (0.0..=1.0).contains(&self.mji_ratio)) {
            return Err(Error::invalid("mji_ratio must lie in [0, 1]"));
        }
        if !(self.residual_tolerance_dbm.is_finite() && self.residual_tolerance_dbm >= 0.0) {
            return Err(Error::invalid("residual_tolerance_dbm must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Draws the feature subset for one draw index. Deterministic: the same
/// `(fingerprint, config, draw_index)` always yields the same subset. An
/// empty fingerprint yields an empty subset.
#[must_use]
pub fn resample(fingerprint: &Fingerprint, cfg: &ResampleConfig, draw_index: u64) -> Fingerprint {
    let features: Vec<_> = fingerprint.iter().collect();
    if features.is_empty() {
        return Fingerprint::new();
    }
    let amount = cfg.subset_size(features.len());
    let mut rng = substream(cfg.seed, domain::RESAMPLE, draw_index);
    rand::seq::index::sample(&mut rng, features.len(), amount)
        .iter()
        .map(|idx| {
            let (feature, value) = features[idx];
            (feature.clone(), value)
        })
        .collect()
}

/// Positions every resampled subset with plain kNN and returns the estimated
/// locations, in draw order.
///
/// # Errors
/// Returns [`Error::InvalidInput`] for an empty fingerprint or invalid
/// configuration, and propagates estimation failures (e.g. a subset with no
/// usable features under the Euclidean mode).
pub fn intermediate_locations(
    fingerprint: &Fingerprint,
    grid: &RfmGrid,
    cfg: &RobustConfig,
) -> Result<Vec<[f64; 2]>> {
    cfg.validate()?;
    if fingerprint.is_empty() {
        return Err(Error::invalid("robust localization requires a non-empty fingerprint"));
    }
    (0..cfg.resample.n_resamples)
        .into_par_iter()
        .map(|draw| {
            let subset = resample(fingerprint, &cfg.resample, draw as u64);
            knn_locate(&subset, grid, &cfg.positioning).map(|estimate| estimate.location)
        })
        .collect()
}

/// The single most consistent intermediate location by residual counting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCandidate {
    /// Draw index of the winning location.
    pub index: usize,
    /// The winning location in meters.
    pub location: [f64; 2],
    /// Number of measured features whose residual against the expected
    /// fingerprint stayed within tolerance.
    pub indicating_value: usize,
}

/// Scores every intermediate location by how many measured features agree
/// (within `tolerance_dbm`) with the map's expected fingerprint there, and
/// returns the location with the highest count (first wins ties).
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `locations` is empty.
pub fn identify_candidate_threshold(
    measured: &Fingerprint,
    locations: &[[f64; 2]],
    grid: &RfmGrid,
    tolerance_dbm: f64,
) -> Result<ThresholdCandidate> {
    if locations.is_empty() {
        return Err(Error::invalid("candidate identification requires at least one location"));
    }
    let mut best = ThresholdCandidate {
        index: 0,
        location: locations[0],
        indicating_value: 0,
    };
    for (index, &location) in locations.iter().enumerate() {
        let expected = expected_fingerprint_grid(location, grid);
        let residuals = residual_vector(measured, &expected);
        let indicating = indicating_value(&residuals, tolerance_dbm);
        if index == 0 || indicating > best.indicating_value {
            best = ThresholdCandidate {
                index,
                location,
                indicating_value: indicating,
            };
        }
    }
    Ok(best)
}

/// Intermediate locations scored and blended by key-set overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// All intermediate locations, in draw order.
    pub locations: Vec<[f64; 2]>,
    /// Overlap score of each location (parallel to `locations`).
    pub mji_scores: Vec<f64>,
    /// Draw indices whose score reached the near-maximal band, ascending.
    pub selected: Vec<usize>,
    /// Normalized blend weights (parallel to `selected`).
    pub weights: Vec<f64>,
    /// Final blended location in meters.
    pub location: [f64; 2],
}

/// Scores every intermediate location by the key-set overlap between the
/// measurement and the expected fingerprint there, keeps the locations whose
/// score reaches `mji_ratio` of the maximum, and blends them with weights
/// proportional to their scores. When every score is zero, the selected
/// locations are blended uniformly.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `locations` or `measured` is empty.
pub fn identify_candidates_mji(
    measured: &Fingerprint,
    locations: &[[f64; 2]],
    grid: &RfmGrid,
    mji_ratio: f64,
) -> Result<CandidateSet> {
    if locations.is_empty() {
        return Err(Error::invalid("candidate identification requires at least one location"));
    }
    let mji_scores: Vec<f64> = locations
        .iter()
        .map(|&location| {
            let expected = expected_fingerprint_grid(location, grid);
            mji(measured, &expected)
        })
        .collect::<Result<_>>()?;
    let max_score = mji_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = mji_ratio * max_score;
    let selected: Vec<usize> = mji_scores
        .iter()
        .enumerate()
        .filter(|&(_, &score)| score >= cutoff)
        .map(|(idx, _)| idx)
        .collect();
    debug_assert!(!selected.is_empty(), "the maximum always reaches the cutoff");
    let selected_total: f64 = selected.iter().map(|&idx| mji_scores[idx]).sum();
    let weights: Vec<f64> = if selected_total > 0.0 {
        selected.iter().map(|&idx| mji_scores[idx] / selected_total).collect()
    } else {
        vec![1.0 / selected.len() as f64; selected.len()]
    };
    let mut location = [0.0, 0.0];
    for (&idx, &weight) in selected.iter().zip(&weights) {
        location[0] += weight * locations[idx][0];
        location[1] += weight * locations[idx][1];
    }
    Ok(CandidateSet {
        locations: locations.to_vec(),
        mji_scores,
        selected,
        weights,
        location,
    })
}

/// A robust position estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustEstimate {
    /// Final location in meters (the candidate blend).
    pub location: [f64; 2],
    /// The scored intermediate locations behind the estimate.
    pub candidates: CandidateSet,
}

/// Full robust localization: resample, position every subset, and blend the
/// overlap-consistent candidate locations.
///
/// # Errors
/// Returns [`Error::InvalidInput`] for an empty fingerprint or invalid
/// configuration.
pub fn robust_locate(
    fingerprint: &Fingerprint,
    grid: &RfmGrid,
    cfg: &RobustConfig,
) -> Result<RobustEstimate> {
    let locations = intermediate_locations(fingerprint, grid, cfg)?;
    let candidates = identify_candidates_mji(fingerprint, &locations, grid, cfg.mji_ratio)?;
    Ok(RobustEstimate {
        location: candidates.location,
        candidates,
    })
}
