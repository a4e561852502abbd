//! Fingerprint primitives: feature identifiers, RSS fingerprints, the global
//! feature registry, and the dissimilarity measures used by the positioning
//! and change-detection pipelines.
//!
//! A *fingerprint* is a sparse map from WiFi feature identifiers (typically
//! lower-cased AP MAC addresses) to received signal strength in dBm. Features
//! that were not observed are simply absent; when a dense representation is
//! required, absent features are filled with [`MISSING_DBM`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indicator value substituted for features that were not measured (dBm).
pub const MISSING_DBM: f64 = -110.0;

/// Lower bound of the valid RSS range (dBm). Equal to the missing indicator,
/// so a measured value can never sit below it.
pub const RSS_MIN_DBM: f64 = -110.0;

/// Upper bound of the valid RSS range (dBm).
pub const RSS_MAX_DBM: f64 = 0.0;

/// Fallback per-feature gap (dBm) used by [`cdm`] when the two fingerprints
/// share no features, or when the shared features agree exactly; it prices a
/// measurability mismatch like a typical value gap so that the measure stays
/// strictly positive whenever the fingerprints differ.
pub const DEFAULT_KEY_GAP_DBM: f64 = 10.0;

/// Identifier of a WiFi feature (one AP as seen by the scanner).
///
/// Construction canonicalizes the raw string: surrounding whitespace is
/// trimmed and ASCII letters are lower-cased, so `"AA:BB"` and `"aa:bb "`
/// compare equal. Identifiers are never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureId(String);

impl FeatureId {
    /// Builds a canonical feature identifier.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] when the trimmed identifier is empty.
    pub fn new(raw: &str) -> Result<Self> {
        let canonical = raw.trim().to_ascii_lowercase();
        if canonical.is_empty() {
            return Err(Error::invalid("feature identifier must not be empty"));
        }
        Ok(FeatureId(canonical))
    }

    /// The canonical identifier text.
    #[must_use]
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Sparse RSS fingerprint: feature identifier -> signal strength in dBm.
///
/// Entries iterate in the identifier's canonical (sorted) order, which keeps
/// every derived quantity deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fingerprint {
    entries: BTreeMap<FeatureId, f64>,
}

impl Fingerprint {
    /// Creates an empty fingerprint.
    #[must_use]
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts (or replaces) the value of a feature. Values must be finite;
    /// ingestion and simulation clamp them into `[RSS_MIN_DBM, RSS_MAX_DBM]`
    /// before they reach any fingerprint.
    pub fn insert(&mut self, feature: FeatureId, value_dbm: f64) {
        debug_assert!(value_dbm.is_finite(), "RSS values must be finite");
        self.entries.insert(feature, value_dbm);
    }

    /// Removes a feature, returning its value when present.
    pub fn remove(&mut self, feature: &FeatureId) -> Option<f64> {
        self.entries.remove(feature)
    }

    /// Value of a feature, when measured.
    #[must_use]
    pub fn get(&self, feature: &FeatureId) -> Option<f64> {
        self.entries.get(feature).copied()
    }

    /// Whether the feature was measured.
    #[must_use]
    pub fn contains(&self, feature: &FeatureId) -> bool {
        self.entries.contains_key(feature)
    }

    /// Number of measured features.
    #[must_use]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether no feature was measured.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Iterates `(feature, value)` pairs in canonical feature order.
    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    /// Iterates the measured feature identifiers in canonical order.
    pub fn features(&self) -> impl Iterator<Item = &FeatureId> {
        self.entries.keys()
    }

    /// Returns a copy with the given features removed.
    #[must_use]
    pub fn without<'a>(&self, excluded: impl IntoIterator<Item = &'a FeatureId>) -> Self {
        let mut out = self.clone();
        for feature in excluded {
            out.entries.remove(feature);
        }
        out
    }
}

impl FromIterator<(FeatureId, f64)> for Fingerprint {
    fn from_iter<T: IntoIterator<Item = (FeatureId, f64)>>(iter: T) -> Self {
        let mut fp = Fingerprint::new();
        for (feature, value) in iter {
            fp.insert(feature, value);
        }
        fp
    }
}

/// A fingerprint annotated with where (and optionally when) it was collected.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFingerprint {
    /// Collection location in meters, `[x, y]`.
    pub location: [f64; 2],
    /// The measured fingerprint.
    pub fingerprint: Fingerprint,
    /// 1-based collection block (survey campaign / month), when known.
    pub block: Option<u32>,
    /// Collection timestamp as epoch seconds, when known.
    pub timestamp: Option<i64>,
}

impl LabeledFingerprint {
    /// Labels a fingerprint with its collection location only.
    #[must_use]
    pub fn new(location: [f64; 2], fingerprint: Fingerprint) -> Self {
        LabeledFingerprint {
            location,
            fingerprint,
            block: None,
            timestamp: None,
        }
    }
}

/// Ordered set of every feature known to a dataset.
///
/// The registry fixes the dimension order of dense fingerprint vectors; it
/// preserves insertion order, so datasets reproduce the order in which their
/// features were first declared.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalFeatureRegistry {
    ids: Vec<FeatureId>,
    index: BTreeMap<FeatureId, usize>,
}

impl GlobalFeatureRegistry {
    /// Creates an empty registry.
    #[must_use]
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a registry from fingerprints, registering features in first-seen
    /// order (fingerprints iterate their features in canonical order).
    pub fn from_fingerprints<'a>(fingerprints: impl IntoIterator<Item = &'a Fingerprint>) -> Self {
        let mut registry = GlobalFeatureRegistry::new();
        for fp in fingerprints {
            for feature in fp.features() {
                registry.insert(feature.clone());
            }
        }
        registry
    }

    /// Registers a feature and returns its index; re-inserting an existing
    /// feature returns the original index.
    pub fn insert(&mut self, feature: FeatureId) -> usize {
        if let Some(&idx) = self.index.get(&feature) {
            return idx;
        }
        let idx = self.ids.len();
        self.ids.push(feature.clone());
        self.index.insert(feature, idx);
        idx
    }

    /// Index of a feature, when registered.
    #[must_use]
    pub fn index_of(&self, feature: &FeatureId) -> Option<usize> {
        self.index.get(feature).copied()
    }

    /// Identifier at a registry index.
    #[must_use]
    pub fn id(&self, index: usize) -> &FeatureId {
        &self.ids[index]
    }

    /// Number of registered features.
    #[must_use]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// Whether the registry is empty.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Whether the feature is registered.
    #[must_use]
    pub fn contains(&self, feature: &FeatureId) -> bool {
        self.index.contains_key(feature)
    }

    /// Iterates identifiers in registry (insertion) order.
    pub fn iter(&self) -> impl Iterator<Item = &FeatureId> {
        self.ids.iter()
    }
}

/// Key-set overlap statistics between two fingerprints.
struct KeyOverlap {
    shared: usize,
    sym_diff: usize,
    shared_abs_gap: f64,
}

fn key_overlap(a: &Fingerprint, b: &Fingerprint) -> KeyOverlap {
    let mut shared = 0usize;
    let mut shared_abs_gap = 0.0f64;
    for (feature, value) in a.iter() {
        if let Some(other) = b.get(feature) {
            shared += 1;
            shared_abs_gap += (value - other).abs();
        }
    }
    let sym_diff = a.len() + b.len() - 2 * shared;
    KeyOverlap {
        shared,
        sym_diff,
        shared_abs_gap,
    }
}

/// Modified Jaccard index between a measured fingerprint and an expected one.
///
/// Averages the plain Jaccard index of the two key sets with the fraction of
/// *measured* features that are also expected, so the score is asymmetric: it
/// forgives expected-but-unmeasured features more than measured-but-unexpected
/// ones. The result lies in `[0, 1]`, reaching 1 exactly when the key sets
/// coincide.
///
/// # Errors
/// Returns [`Error::InvalidInput`] when `measured` is empty.
pub fn mji(measured: &Fingerprint, expected: &Fingerprint) -> Result<f64> {
    if measured.is_empty() {
        return Err(Error::invalid("mji requires a non-empty measured fingerprint"));
    }
    let overlap = key_overlap(measured, expected);
    let union = overlap.shared + overlap.sym_diff;
    let shared = overlap.shared as f64;
    Ok(0.5 * (shared / union as f64 + shared / measured.len() as f64))
}

/// Collected-divergence measure: a dissimilarity between two fingerprints that
/// accounts for both value gaps on shared features and key-set asymmetry.
///
/// Shared features contribute their absolute value gaps; every feature seen by
/// only one side contributes `lambda * p`, where `p` is the mean shared gap
/// (or [`DEFAULT_KEY_GAP_DBM`] when there is no shared evidence, i.e. the
/// intersection is empty or agrees exactly). The total is normalized by the
/// size of the key-set union, so the measure is symmetric, non-negative, and
/// zero exactly when key sets and shared values are identical (for
/// `lambda > 0`).
///
/// # Errors
/// Returns [`Error::InvalidInput`] when both fingerprints are empty.
pub fn cdm(a: &Fingerprint, b: &Fingerprint, lambda: f64) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::invalid("cdm requires at least one non-empty fingerprint"));
    }
    debug_assert!(lambda.is_finite() && lambda >= 0.0, "lambda must be finite and >= 0");
    let overlap = key_overlap(a, b);
    let union = overlap.shared + overlap.sym_diff;
    let typical_gap = if overlap.shared == 0 || overlap.shared_abs_gap == 0.0 {
        DEFAULT_KEY_GAP_DBM
    } else {
        overlap.shared_abs_gap / overlap.shared as f64
    };
    let penalty = lambda * typical_gap * overlap.sym_diff as f64;
    Ok((overlap.shared_abs_gap + penalty) / union as f64)
}

/// Per-feature absolute residuals between a measured fingerprint and an
/// expected one, iterated over the measured features in canonical order.
/// Expected features that are absent contribute the missing indicator.
#[must_use]
pub fn residual_vector(measured: &Fingerprint, expected: &Fingerprint) -> Vec<f64> {
    measured
        .iter()
        .map(|(feature, value)| (value - expected.get(feature).unwrap_or(MISSING_DBM)).abs())
        .collect()
}

/// Number of residuals within the agreement threshold (inclusive); this is the
/// scalar used to rank resampled location guesses by how well the map explains
/// the measurement.
#[must_use]
pub fn indicating_value(residuals: &[f64], lambda_res_dbm: f64) -> usize {
    residuals.iter().filter(|&&r| r <= lambda_res_dbm).count()
}

/// Densifies a fingerprint over the registry's dimension order, filling
/// unmeasured features with `missing_dbm`. Returns the vector and the number
/// of measured features that were dropped because the registry does not know
/// them.
#[must_use]
pub fn vectorize(
    fp: &Fingerprint,
    registry: &GlobalFeatureRegistry,
    missing_dbm: f64,
) -> (Vec<f64>, usize) {
    let mut values = vec![missing_dbm; registry.len()];
    let mut dropped = 0usize;
    for (feature, value) in fp.iter() {
        match registry.index_of(feature) {
            Some(idx) => values[idx] = value,
            None => dropped += 1,
        }
    }
    (values, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fid(raw: &str) -> FeatureId {
        FeatureId::new(raw).unwrap()
    }

    fn fp(entries: &[(&str, f64)]) -> Fingerprint {
        entries.iter().map(|&(id, v)| (fid(id), v)).collect()
    }

    #[test]
    fn feature_id_canonicalizes() {
        assert_eq!(fid(" AA:BB:01 ").as_str(), "aa:bb:01");
        assert_eq!(fid("ap7"), fid("AP7"));
        assert!(FeatureId::new("  ").is_err());
    }

    #[test]
    fn mji_identical_key_sets_is_one() {
        let a = fp(&[("f1", -50.0), ("f2", -60.0)]);
        let b = fp(&[("f1", -70.0), ("f2", -40.0)]); // values do not matter
        assert_relative_eq!(mji(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn mji_half_covered_expected_set() {
        // Measured has 2 features, expected has those plus 2 more:
        // 0.5 * (2/4 + 2/2) = 0.75; and swapping the roles gives
        // 0.5 * (2/4 + 2/4) = 0.5.
        let measured = fp(&[("f1", -50.0), ("f2", -60.0)]);
        let expected = fp(&[
            ("f1", -50.0),
            ("f2", -60.0),
            ("f3", -70.0),
            ("f4", -80.0),
        ]);
        assert_relative_eq!(mji(&measured, &expected).unwrap(), 0.75);
        assert_relative_eq!(mji(&expected, &measured).unwrap(), 0.5);
    }

    #[test]
    fn mji_disjoint_key_sets_is_zero() {
        let a = fp(&[("f1", -50.0)]);
        let b = fp(&[("f2", -50.0)]);
        assert_relative_eq!(mji(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn mji_rejects_empty_measured() {
        let b = fp(&[("f1", -50.0)]);
        assert!(mji(&Fingerprint::new(), &b).is_err());
    }

    #[test]
    fn cdm_identity_is_zero() {
        let a = fp(&[("f1", -50.0), ("f2", -61.5)]);
        assert_relative_eq!(cdm(&a, &a, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn cdm_single_shared_feature_gap() {
        let a = fp(&[("f1", -50.0)]);
        let b = fp(&[("f1", -54.0)]);
        assert_relative_eq!(cdm(&a, &b, 3.0).unwrap(), 4.0);
    }

    #[test]
    fn cdm_disjoint_sets_use_default_gap() {
        // No shared features: penalty = lambda * 10 dBm per asymmetric key,
        // normalized by the union -> (3 * 10 * 2) / 2 = 30.
        let a = fp(&[("f1", -50.0)]);
        let b = fp(&[("f2", -50.0)]);
        assert_relative_eq!(cdm(&a, &b, 3.0).unwrap(), 30.0);
    }

    #[test]
    fn cdm_equal_shared_values_still_price_asymmetry() {
        // The shared feature agrees exactly, so the mean gap degenerates to 0;
        // the default gap keeps the asymmetric key strictly positive.
        let a = fp(&[("f1", -50.0), ("f2", -60.0)]);
        let b = fp(&[("f1", -50.0)]);
        let d = cdm(&a, &b, 3.0).unwrap();
        assert_relative_eq!(d, 3.0 * DEFAULT_KEY_GAP_DBM / 2.0);
        assert!(d > 0.0);
    }

    #[test]
    fn cdm_rejects_two_empty_fingerprints() {
        assert!(cdm(&Fingerprint::new(), &Fingerprint::new(), 3.0).is_err());
    }

    #[test]
    fn residuals_follow_measured_key_order() {
        let measured = fp(&[("f1", -50.0), ("f2", -60.0)]);
        let expected = fp(&[("f1", -55.0), ("f2", -58.0)]);
        assert_eq!(residual_vector(&measured, &expected), vec![5.0, 2.0]);
    }

    #[test]
    fn residuals_substitute_missing_indicator() {
        let measured = fp(&[("f1", -50.0)]);
        assert_eq!(residual_vector(&measured, &Fingerprint::new()), vec![60.0]);
    }

    #[test]
    fn residuals_of_equal_fingerprints_are_zero() {
        let a = fp(&[("f1", -50.0), ("f2", -60.0)]);
        assert_eq!(residual_vector(&a, &a), vec![0.0, 0.0]);
    }

    #[test]
    fn indicating_value_counts_inclusively() {
        assert_eq!(indicating_value(&[5.0, 2.0], 5.0), 2);
        assert_eq!(indicating_value(&[5.1, 7.0], 5.0), 0);
        assert_eq!(indicating_value(&[], 5.0), 0);
    }

    #[test]
    fn vectorize_fills_and_counts_drops() {
        let mut registry = GlobalFeatureRegistry::new();
        registry.insert(fid("f1"));
        registry.insert(fid("f2"));
        let sample = fp(&[("f2", -60.0), ("zz", -30.0)]);
        let (values, dropped) = vectorize(&sample, &registry, MISSING_DBM);
        assert_eq!(values, vec![MISSING_DBM, -60.0]);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn registry_preserves_insertion_order() {
        let mut registry = GlobalFeatureRegistry::new();
        assert_eq!(registry.insert(fid("b")), 0);
        assert_eq!(registry.insert(fid("a")), 1);
        assert_eq!(registry.insert(fid("b")), 0);
        let order: Vec<_> = registry.iter().map(FeatureId::as_str).collect();
        assert_eq!(order, vec!["b", "a"]);
    }

    /// Strategy: fingerprints over a small shared feature pool with valid RSS.
    fn fingerprint_strategy(max_features: usize) -> impl Strategy<Value = Fingerprint> {
        prop::collection::btree_map(0usize..12, RSS_MIN_DBM..=RSS_MAX_DBM, 0..=max_features)
            .prop_map(|m| {
                m.into_iter()
                    .map(|(i, v)| (FeatureId::new(&format!("f{i}")).unwrap(), v))
                    .collect()
            })
    }

    proptest! {
        #[test]
        fn prop_mji_lies_in_unit_interval(
            a in fingerprint_strategy(8),
            b in fingerprint_strategy(8),
        ) {
            prop_assume!(!a.is_empty());
            let score = mji(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&score));
        }

        #[test]
        fn prop_mji_is_one_only_for_matching_key_sets(a in fingerprint_strategy(8)) {
            prop_assume!(!a.is_empty());
            prop_assert_eq!(mji(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn prop_cdm_symmetric_and_nonnegative(
            a in fingerprint_strategy(8),
            b in fingerprint_strategy(8),
            lambda in 0.0f64..10.0,
        ) {
            prop_assume!(!a.is_empty() || !b.is_empty());
            let ab = cdm(&a, &b, lambda).unwrap();
            let ba = cdm(&b, &a, lambda).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-12);
        }

        #[test]
        fn prop_cdm_zero_iff_identical(
            a in fingerprint_strategy(8),
            b in fingerprint_strategy(8),
        ) {
            prop_assume!(!a.is_empty() || !b.is_empty());
            let d = cdm(&a, &b, 3.0).unwrap();
            if a == b {
                prop_assert_eq!(d, 0.0);
            } else {
                // Differing values on a shared key, or any key-set asymmetry,
                // must be visible in the measure.
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn prop_residuals_match_measured_arity(
            a in fingerprint_strategy(8),
            b in fingerprint_strategy(8),
        ) {
            let residuals = residual_vector(&a, &b);
            prop_assert_eq!(residuals.len(), a.len());
            prop_assert!(residuals.iter().all(|r| *r >= 0.0));
        }

        #[test]
        fn prop_indicating_value_monotone_in_threshold(
            a in fingerprint_strategy(8),
            b in fingerprint_strategy(8),
            lo in 0.0f64..60.0,
            hi in 0.0f64..60.0,
        ) {
            let residuals = residual_vector(&a, &b);
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            prop_assert!(indicating_value(&residuals, lo) <= indicating_value(&residuals, hi));
            prop_assert!(indicating_value(&residuals, hi) <= residuals.len());
        }

        #[test]
        fn prop_vectorize_roundtrips_registered_features(a in fingerprint_strategy(8)) {
            let registry = GlobalFeatureRegistry::from_fingerprints([&a]);
            let (values, dropped) = vectorize(&a, &registry, MISSING_DBM);
            prop_assert_eq!(dropped, 0);
            for (feature, value) in a.iter() {
                let idx = registry.index_of(feature).unwrap();
                prop_assert_eq!(values[idx], value);
            }
        }
    }
}
