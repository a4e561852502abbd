//! Ground-truth change labeling from repeated observations.
//!
//! When a feature is observed many times at the same place — within one
//! survey block or across two blocks separated in time — robust statistics
//! decide whether it actually changed. Centers come from the median and
//! spreads from the scaled median absolute deviation, so a handful of
//! outliers cannot masquerade as a change.
//!
//! Two rules cover the two comparison shapes:
//! * [`label_within_block`]: is a single observation an outlier against its
//!   own block?
//! * [`label_inter_block`]: did the feature's level move between two blocks?

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::median;

/// Scale factor turning the median absolute deviation into a consistent
/// estimate of the standard deviation under normality.
pub const MAD_TO_SIGMA: f64 = 1.4826;

/// Number of spreads an observation (or a center gap) must exceed to count
/// as changed.
pub const SPREAD_MULTIPLIER: f64 = 3.0;

/// Whether a feature is considered unchanged or changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeStatus {
    /// The observations are consistent with the reference level.
    Stable,
    /// The observations contradict the reference level.
    Changed,
}

impl ChangeStatus {
    /// True for [`ChangeStatus::Changed`].
    #[must_use]
    pub fn is_changed(self) -> bool {
        matches!(self, ChangeStatus::Changed)
    }
}

/// Robust location and scale of one block of observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    /// Median of the observations (dBm).
    pub center_dbm: f64,
    /// Scaled median absolute deviation (dBm); zero when at least half the
    /// observations sit exactly at the center.
    pub spread_dbm: f64,
    /// Number of observations behind the estimate.
    pub count: usize,
}

/// Median and scaled-MAD statistics of a block of observations.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `values` is empty or contains a
/// non-finite value.
pub fn robust_stats(values: &[f64]) -> Result<BlockStats> {
    if values.is_empty() {
        return Err(Error::invalid("robust statistics require at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("robust statistics require finite values"));
    }
    let center_dbm = median(values);
    let deviations: Vec<f64> = values.iter().map(|v| (v - center_dbm).abs()).collect();
    let spread_dbm = MAD_TO_SIGMA * median(&deviations);
    Ok(BlockStats {
        center_dbm,
        spread_dbm,
        count: values.len(),
    })
}

/// Labels a single observation against its block: changed when it deviates
/// from the center by more than [`SPREAD_MULTIPLIER`] spreads. A degenerate
/// spread of zero flags any deviation at all.
#[must_use]
pub fn label_within_block(value_dbm: f64, stats: &BlockStats) -> ChangeStatus {
    let deviation = (value_dbm - stats.center_dbm).abs();
    let changed = if stats.spread_dbm == 0.0 {
        deviation != 0.0
    } else {
        deviation > SPREAD_MULTIPLIER * stats.spread_dbm
    };
    if changed {
        ChangeStatus::Changed
    } else {
        ChangeStatus::Stable
    }
}

/// Labels a feature across two blocks: changed when the center gap exceeds
/// [`SPREAD_MULTIPLIER`] combined spreads. Two blocks with zero spread are
/// changed exactly when their centers differ.
#[must_use]
pub fn label_inter_block(a: &BlockStats, b: &BlockStats) -> ChangeStatus {
    let gap = (a.center_dbm - b.center_dbm).abs();
    let combined = (a.spread_dbm * a.spread_dbm + b.spread_dbm * b.spread_dbm).sqrt();
    let changed = if combined == 0.0 {
        gap != 0.0
    } else {
        gap / (SPREAD_MULTIPLIER * combined) >= 1.0
    };
    if changed {
        ChangeStatus::Changed
    } else {
        ChangeStatus::Stable
    }
}
