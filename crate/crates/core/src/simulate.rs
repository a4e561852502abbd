//! Synthetic data generation: propagation scenarios and injected changes.
//!
//! Scenarios place transmitters uniformly in a region, survey it on a regular
//! grid under a log-distance path-loss model with Gaussian shadowing, and
//! split the survey into training and validation sets. Everything is
//! deterministic in the scenario seed, so datasets regenerate bit-identically.
//!
//! Change injection corrupts a fingerprint according to a [`ChangeSpec`]:
//! a fraction of features disappears and another fraction is shifted by a
//! fixed offset. Every injection also returns per-feature ground-truth
//! labels, which is what the detection evaluation scores against.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fingerprint::{
    FeatureId, Fingerprint, GlobalFeatureRegistry, LabeledFingerprint, MISSING_DBM, RSS_MAX_DBM,
};
use crate::labeling::ChangeStatus;
use crate::rfm::{FeaturePredictor, KsConfig, RfmTrainingSet, RoiBounds, MEASURABLE_MARGIN_DBM};
use crate::rng::{domain, substream};

/// Receiver sensitivity: synthetic readings below this level are dropped
/// from the fingerprint (dBm).
pub const SENSITIVITY_CUTOFF_DBM: f64 = -100.0;

/// Fraction of survey points assigned to the training set.
pub const TRAIN_FRACTION: f64 = 0.75;

/// Path-loss distances are floored here to keep the model finite at the
/// transmitter (m).
pub const MIN_PROPAGATION_DISTANCE_M: f64 = 1.0;

/// Shift offsets exercised by the injection grid (dBm).
pub const SHIFT_VALUES_DBM: [f64; 6] = [-15.0, -10.0, -5.0, 5.0, 10.0, 15.0];

/// A synthetic indoor radio environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationScenario {
    /// Region of interest surveyed.
    pub roi: RoiBounds,
    /// Number of transmitters placed uniformly at random in the region.
    pub ap_count: usize,
    /// Log-distance path-loss exponent.
    pub path_loss_exponent: f64,
    /// Received power at the reference distance of one meter (dBm).
    pub reference_power_dbm: f64,
    /// Standard deviation of the Gaussian shadowing noise (dBm).
    pub shadowing_sigma_dbm: f64,
    /// Survey grid spacing (m).
    pub survey_spacing_m: f64,
    /// Seed of every random draw the scenario makes.
    pub seed: u64,
}

impl Default for PropagationScenario {
    fn default() -> Self {
        PropagationScenario {
            roi: RoiBounds {
                min: [0.0, 0.0],
                max: [30.0, 20.0],
            },
            ap_count: 12,
            path_loss_exponent: 3.0,
            reference_power_dbm: -40.0,
            shadowing_sigma_dbm: 2.0,
            survey_spacing_m: 1.0,
            seed: 0,
        }
    }
}

impl PropagationScenario {
    /// The default environment under a chosen seed.
    #[must_use]
    pub fn with_defaults(seed: u64) -> Self {
        PropagationScenario {
            seed,
            ..PropagationScenario::default()
        }
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        self.roi.validate()?;
        if self.ap_count == 0 {
            return Err(Error::invalid("scenarios require at least one transmitter"));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(Error::invalid("path_loss_exponent must be finite and > 0"));
        }
        if !(self.reference_power_dbm.is_finite() && self.reference_power_dbm <= RSS_MAX_DBM) {
            return Err(Error::invalid("reference_power_dbm must be finite and <= 0"));
        }
        if !(self.shadowing_sigma_dbm.is_finite() && self.shadowing_sigma_dbm >= 0.0) {
            return Err(Error::invalid("shadowing_sigma_dbm must be finite and >= 0"));
        }
        if !(self.survey_spacing_m.is_finite() && self.survey_spacing_m > 0.0) {
            return Err(Error::invalid("survey_spacing_m must be finite and > 0"));
        }
        Ok(())
    }
}

/// A generated survey: train/validation fingerprints plus the transmitter
/// layout that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Points assigned to map building.
    pub training: Vec<LabeledFingerprint>,
    /// Held-out points for querying.
    pub validation: Vec<LabeledFingerprint>,
    /// Transmitter positions, index-aligned with the feature ids.
    pub ap_positions: Vec<[f64; 2]>,
}

impl SyntheticDataset {
    /// Registry of the transmitter feature ids in transmitter order, whether
    /// or not every transmitter was actually received somewhere.
    #[must_use]
    pub fn feature_registry(&self) -> GlobalFeatureRegistry {
        let mut registry = GlobalFeatureRegistry::new();
        for index in 0..self.ap_positions.len() {
            registry.insert(ap_feature_id(index));
        }
        registry
    }
}

/// Feature id of a synthetic transmitter.
#[must_use]
pub fn ap_feature_id(index: usize) -> FeatureId {
    FeatureId::new(&format!("ap{index}")).expect("generated ids are non-empty")
}

fn survey_positions(roi: &RoiBounds, spacing_m: f64) -> Vec<[f64; 2]> {
    let cells_along = |extent: f64| ((extent / spacing_m - 1e-9).ceil().max(0.0) as usize).max(1);
    let nx = cells_along(roi.width());
    let ny = cells_along(roi.height());
    (0..nx * ny)
        .map(|i| {
            let xi = i % nx;
            let yi = i / nx;
            [
                roi.min[0] + (xi as f64 + 0.5) * spacing_m,
                roi.min[1] + (yi as f64 + 0.5) * spacing_m,
            ]
        })
        .collect()
}

/// Generates the survey for a scenario. Deterministic in the scenario seed:
/// transmitter placement, shadowing noise, and the train/validation split
/// each draw from their own seeded stream.
///
/// # Errors
/// Returns [`Error::InvalidInput`] for invalid scenario parameters.
pub fn generate_scenario(scenario: &PropagationScenario) -> Result<SyntheticDataset> {
    scenario.validate()?;
    let mut ap_rng = substream(scenario.seed, domain::SCENARIO_APS, 0);
    let ap_positions: Vec<[f64; 2]> = (0..scenario.ap_count)
        .map(|_| {
            let x = ap_rng.gen_range(scenario.roi.min[0]..=scenario.roi.max[0]);
            let y = ap_rng.gen_range(scenario.roi.min[1]..=scenario.roi.max[1]);
            [x, y]
        })
        .collect();
    let noise = Normal::new(0.0, scenario.shadowing_sigma_dbm)
        .map_err(|e| Error::invalid(format!("invalid shadowing noise: {e}")))?;
    let mut training = Vec::new();
    let mut validation = Vec::new();
    for (point_index, position) in survey_positions(&scenario.roi, scenario.survey_spacing_m)
        .into_iter()
        .enumerate()
    {
        let mut rss_rng = substream(scenario.seed, domain::SCENARIO_RSS, point_index as u64);
        let mut fingerprint = Fingerprint::new();
        for (ap_index, ap) in ap_positions.iter().enumerate() {
            let dx = position[0] - ap[0];
            let dy = position[1] - ap[1];
            let distance = (dx * dx + dy * dy).sqrt().max(MIN_PROPAGATION_DISTANCE_M);
            let level = scenario.reference_power_dbm
                - 10.0 * scenario.path_loss_exponent * distance.log10()
                + noise.sample(&mut rss_rng);
            if level >= SENSITIVITY_CUTOFF_DBM {
                fingerprint.insert(ap_feature_id(ap_index), level.min(RSS_MAX_DBM));
            }
        }
        let mut split_rng = substream(scenario.seed, domain::SCENARIO_SPLIT, point_index as u64);
        let labeled = LabeledFingerprint::new(position, fingerprint);
        if split_rng.gen_range(0.0..1.0) < TRAIN_FRACTION {
            training.push(labeled);
        } else {
            validation.push(labeled);
        }
    }
    Ok(SyntheticDataset {
        training,
        validation,
        ap_positions,
    })
}

/// Replaces every held-out fingerprint with the kernel-smoothed prediction at
/// its location, computed from the training set. The result is the no-change
/// baseline: each point carries exactly what the map expects there (every
/// registry feature predicted measurable), so any later disagreement is an
/// injected change rather than survey noise.
///
/// # Errors
/// Returns [`Error::InvalidInput`] for invalid smoothing configuration and
/// [`Error::Numerical`] when a local system cannot be factorized.
pub fn smooth_validation(
    validation: &[LabeledFingerprint],
    training: &RfmTrainingSet,
    cfg: &KsConfig,
) -> Result<Vec<LabeledFingerprint>> {
    let predictor = FeaturePredictor::new(training, cfg)?;
    validation
        .par_iter()
        .map(|point| {
            let mut smoothed = Fingerprint::new();
            for feature_idx in 0..training.registry().len() {
                let prediction = predictor.predict(point.location, feature_idx)?;
                if prediction > MISSING_DBM + MEASURABLE_MARGIN_DBM {
                    smoothed.insert(training.registry().id(feature_idx).clone(), prediction);
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

/// One corruption pattern: which fraction of features disappears and which
/// fraction shifts by a fixed offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChangeSpec {
    /// Fraction of features removed (rounded up).
    pub missing_ratio: f64,
    /// Fraction of features shifted (rounded up).
    pub shift_ratio: f64,
    /// Offset added to shifted features (dBm).
    pub shift_dbm: f64,
    /// Seed of the injection stream.
    pub seed: u64,
}

impl Default for ChangeSpec {
    fn default() -> Self {
        ChangeSpec {
            missing_ratio: 0.0,
            shift_ratio: 0.0,
            shift_dbm: 0.0,
            seed: 0,
        }
    }
}

impl ChangeSpec {
    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let ratio_ok = |r: f64| r.is_finite() && (0.0..=1.0).contains(&r);
        if !(ratio_ok(self.missing_ratio) && ratio_ok(self.shift_ratio)) {
            return Err(Error::invalid("change ratios must lie in [0, 1]"));
        }
        if self.missing_ratio + self.shift_ratio > 1.0 + 1e-9 {
            return Err(Error::invalid("missing and shift ratios must sum to at most 1"));
        }
        if !self.shift_dbm.is_finite() {
            return Err(Error::invalid("shift_dbm must be finite"));
        }
        Ok(())
    }
}

/// The standard injection sweep: missing and shift ratios from 0 % to 50 %
/// in 10 % steps (jointly at most 50 %), each nonzero shift ratio crossed
/// with every offset in [`SHIFT_VALUES_DBM`]. Zero-shift rows collapse to a
/// single spec since the offset is inert there.
#[must_use]
pub fn change_grid(seed: u64) -> Vec<ChangeSpec> {
    let mut specs = Vec::new();
    for missing_step in 0..=5u32 {
        let missing_ratio = f64::from(missing_step) / 10.0;
        specs.push(ChangeSpec {
            missing_ratio,
            shift_ratio: 0.0,
            shift_dbm: 0.0,
            seed,
        });
        for shift_step in 1..=5u32 {
            if missing_step + shift_step > 5 {
                break;
            }
            let shift_ratio = f64::from(shift_step) / 10.0;
            for shift_dbm in SHIFT_VALUES_DBM {
                specs.push(ChangeSpec {
                    missing_ratio,
                    shift_ratio,
                    shift_dbm,
                    seed,
                });
            }
        }
    }
    specs
}

/// How an injected feature was corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeKind {
    /// The feature was removed (or shifted below the measurable range).
    Missing,
    /// The feature's value moved but remained measurable.
    Shifted,
}

/// Ground-truth label of one pre-injection feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLabel {
    /// Whether the feature actually changed.
    pub status: ChangeStatus,
    /// The corruption applied, for changed features.
    pub kind: Option<ChangeKind>,
}

/// Ground-truth labels covering every pre-injection feature.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeLabels {
    labels: BTreeMap<FeatureId, FeatureLabel>,
}

impl ChangeLabels {
    /// Label of a feature, when it existed before injection.
    #[must_use]
    pub fn get(&self, feature: &FeatureId) -> Option<&FeatureLabel> {
        self.labels.get(feature)
    }

    /// Iterates labels in feature order.
    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &FeatureLabel)> {
        self.labels.iter()
    }

    /// Number of labeled features.
    #[must_use]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Whether no feature is labeled.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Features labeled as changed.
    #[must_use]
    pub fn changed_features(&self) -> impl Iterator<Item = &FeatureId> {
        self.labels
            .iter()
            .filter(|(_, label)| label.status.is_changed())
            .map(|(feature, _)| feature)
    }
}

/// A corrupted fingerprint with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectedFingerprint {
    /// The fingerprint after injection.
    pub fingerprint: Fingerprint,
    /// Per-feature ground truth over the pre-injection features.
    pub labels: ChangeLabels,
}

/// Applies a change spec to a fingerprint. Deterministic in
/// `(spec.seed, draw_index)`, so repeated queries under one spec each get an
/// independent but reproducible corruption.
///
/// Shifted values are clamped into the valid range; a shift landing at or
/// below the missing indicator removes the feature (labeled
/// [`ChangeKind::Missing`]), and a clamp that lands exactly on the original
/// value leaves the feature genuinely unchanged (labeled stable).
///
/// # Errors
/// Returns [`Error::InvalidInput`] for invalid spec parameters.
pub fn inject_changes(
    fingerprint: &Fingerprint,
    spec: &ChangeSpec,
    draw_index: u64,
) -> Result<InjectedFingerprint> {
    spec.validate()?;
    let features: Vec<(&FeatureId, f64)> = fingerprint.iter().collect();
    let total = features.len();
    // The epsilon guards against ratio * total landing a hair above an
    // integer (e.g. 0.2 * 10 = 2.0000000000000004).
    let count_for = |ratio: f64| (ratio * total as f64 - 1e-9).ceil().max(0.0) as usize;
    let missing_count = count_for(spec.missing_ratio).min(total);
    let shift_count = if spec.shift_dbm == 0.0 {
        0
    } else {
        count_for(spec.shift_ratio).min(total - missing_count)
    };
    let mut rng = substream(spec.seed, domain::INJECT, draw_index);
    let drawn = rand::seq::index::sample(&mut rng, total, missing_count + shift_count);
    let mut labels: BTreeMap<FeatureId, FeatureLabel> = features
        .iter()
        .map(|&(feature, _)| {
            (
                feature.clone(),
                FeatureLabel {
                    status: ChangeStatus::Stable,
                    kind: None,
                },
            )
        })
        .collect();
    let mut injected = fingerprint.clone();
    for (slot, feature_index) in drawn.iter().enumerate() {
        let (feature, value) = features[feature_index];
        let label = if slot < missing_count {
            injected.remove(feature);
            FeatureLabel {
                status: ChangeStatus::Changed,
                kind: Some(ChangeKind::Missing),
            }
        } else {
            let landed = (value + spec.shift_dbm).min(RSS_MAX_DBM);
            if landed <= MISSING_DBM {
                injected.remove(feature);
                FeatureLabel {
                    status: ChangeStatus::Changed,
                    kind: Some(ChangeKind::Missing),
                }
            } else if landed == value {
                FeatureLabel {
                    status: ChangeStatus::Stable,
                    kind: None,
                }
            } else {
                injected.insert(feature.clone(), landed);
                FeatureLabel {
                    status: ChangeStatus::Changed,
                    kind: Some(ChangeKind::Shifted),
                }
            }
        };
        labels.insert(feature.clone(), label);
    }
    Ok(InjectedFingerprint {
        fingerprint: injected,
        labels: ChangeLabels { labels },
    })
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
    fn scenarios_regenerate_identically_per_seed() {
        let scenario = PropagationScenario {
            roi: RoiBounds {
                min: [0.0, 0.0],
                max: [10.0, 8.0],
            },
            ap_count: 4,
            survey_spacing_m: 2.0,
            ..PropagationScenario::with_defaults(42)
        };
        let a = generate_scenario(&scenario).unwrap();
        let b = generate_scenario(&scenario).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&PropagationScenario {
            seed: 43,
            ..scenario
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_free_readings_follow_the_path_loss_law() {
        let scenario = PropagationScenario {
            roi: RoiBounds {
                min: [0.0, 0.0],
                max: [10.0, 8.0],
            },
            ap_count: 3,
            shadowing_sigma_dbm: 0.0,
            survey_spacing_m: 2.0,
            ..PropagationScenario::with_defaults(7)
        };
        let dataset = generate_scenario(&scenario).unwrap();
        let all_points = dataset.training.iter().chain(&dataset.validation);
        let mut checked = 0;
        for point in all_points {
            for (ap_index, ap) in dataset.ap_positions.iter().enumerate() {
                let dx = point.location[0] - ap[0];
                let dy = point.location[1] - ap[1];
                let distance = (dx * dx + dy * dy).sqrt().max(MIN_PROPAGATION_DISTANCE_M);
                let expected = (scenario.reference_power_dbm
                    - 10.0 * scenario.path_loss_exponent * distance.log10())
                .min(RSS_MAX_DBM);
                match point.fingerprint.get(&ap_feature_id(ap_index)) {
                    Some(value) => {
                        assert_relative_eq!(value, expected, epsilon = 1e-12);
                        checked += 1;
                    }
                    None => assert!(expected < SENSITIVITY_CUTOFF_DBM),
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn generated_values_stay_within_the_measurable_range() {
        let dataset = generate_scenario(&PropagationScenario::with_defaults(3)).unwrap();
        for point in dataset.training.iter().chain(&dataset.validation) {
            for (_, value) in point.fingerprint.iter() {
                assert!((SENSITIVITY_CUTOFF_DBM..=RSS_MAX_DBM).contains(&value));
            }
        }
    }

    #[test]
    fn the_split_respects_the_training_fraction() {
        let dataset = generate_scenario(&PropagationScenario::with_defaults(1)).unwrap();
        let total = dataset.training.len() + dataset.validation.len();
        assert_eq!(total, 600); // 30 x 20 at 1 m spacing
        let fraction = dataset.training.len() as f64 / total as f64;
        assert!((0.6..=0.9).contains(&fraction), "fraction {fraction}");
    }

    #[test]
    fn the_registry_lists_every_transmitter_in_order() {
        let dataset = generate_scenario(&PropagationScenario::with_defaults(5)).unwrap();
        let registry = dataset.feature_registry();
        assert_eq!(registry.len(), 12);
        assert_eq!(registry.index_of(&fid("ap0")), Some(0));
        assert_eq!(registry.index_of(&fid("ap11")), Some(11));
    }

    #[test]
    fn validation_smoothing_at_a_training_location_reproduces_it_exactly() {
        // With zero regularization the smoother interpolates, so a held-out
        // point sitting on a training point inherits its fingerprint.
        let training = RfmTrainingSet::from_points(vec![
            LabeledFingerprint::new([0.0, 0.0], fp(&[("a", -50.0), ("b", -70.0)])),
            LabeledFingerprint::new([4.0, 0.0], fp(&[("a", -60.0), ("b", -80.0)])),
            LabeledFingerprint::new([0.0, 4.0], fp(&[("a", -55.0), ("b", -75.0)])),
        ])
        .unwrap();
        let cfg = KsConfig {
            kernel: crate::kernel::KernelParams {
                length_scale_m: 2.0,
                amplitude: 100.0,
                regularization: 0.0,
            },
            ..KsConfig::default()
        };
        let held_out = vec![LabeledFingerprint::new([0.0, 0.0], Fingerprint::new())];
        let smoothed = smooth_validation(&held_out, &training, &cfg).unwrap();
        assert_eq!(smoothed.len(), 1);
        assert_relative_eq!(smoothed[0].fingerprint.get(&fid("a")).unwrap(), -50.0, epsilon = 1e-5);
        assert_relative_eq!(smoothed[0].fingerprint.get(&fid("b")).unwrap(), -70.0, epsilon = 1e-5);
    }

    #[test]
    fn validation_smoothing_is_nearly_idempotent() {
        // Re-smoothing already-smoothed points must be a fixed point: the
        // predictions depend only on the training set and the locations.
        let scenario = PropagationScenario {
            roi: RoiBounds {
                min: [0.0, 0.0],
                max: [10.0, 8.0],
            },
            ap_count: 6,
            shadowing_sigma_dbm: 1.0,
            ..PropagationScenario::with_defaults(17)
        };
        let dataset = generate_scenario(&scenario).unwrap();
        let training = RfmTrainingSet::with_registry(
            dataset.training.clone(),
            dataset.feature_registry(),
        )
        .unwrap();
        let cfg = KsConfig {
            kernel: crate::kernel::KernelParams {
                length_scale_m: 2.0,
                amplitude: 100.0,
                regularization: 1.0,
            },
            ..KsConfig::default()
        };
        let once = smooth_validation(&dataset.validation, &training, &cfg).unwrap();
        let twice = smooth_validation(&once, &training, &cfg).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert_eq!(a.fingerprint.len(), b.fingerprint.len());
            for (feature, value) in a.fingerprint.iter() {
                let again = b.fingerprint.get(feature).unwrap();
                assert!((value - again).abs() < 0.1, "{feature}: {value} vs {again}");
            }
        }
    }

    #[test]
    fn the_injection_grid_covers_the_expected_specs() {
        let specs = change_grid(9);
        assert_eq!(specs.len(), 96);
        assert!(specs.iter().all(|s| s.validate().is_ok()));
        assert!(specs
            .iter()
            .all(|s| s.missing_ratio + s.shift_ratio <= 0.5 + 1e-9));
        // The null spec is present exactly once.
        let nulls = specs
            .iter()
            .filter(|s| s.missing_ratio == 0.0 && s.shift_ratio == 0.0)
            .count();
        assert_eq!(nulls, 1);
        // No duplicates.
        let unique: std::collections::BTreeSet<String> =
            specs.iter().map(|s| format!("{s:?}")).collect();
        assert_eq!(unique.len(), specs.len());
    }

    fn ten_features() -> Fingerprint {
        (0..10)
            .map(|i| (fid(&format!("f{i}")), -40.0 - f64::from(i)))
            .collect()
    }

    #[test]
    fn injection_is_deterministic_and_counts_match_the_ratios() {
        let spec = ChangeSpec {
            missing_ratio: 0.2,
            shift_ratio: 0.2,
            shift_dbm: -10.0,
            seed: 11,
        };
        let original = ten_features();
        let a = inject_changes(&original, &spec, 0).unwrap();
        let b = inject_changes(&original, &spec, 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.len(), 10);
        let missing = a
            .labels
            .iter()
            .filter(|(_, l)| l.kind == Some(ChangeKind::Missing))
            .count();
        let shifted = a
            .labels
            .iter()
            .filter(|(_, l)| l.kind == Some(ChangeKind::Shifted))
            .count();
        assert_eq!(missing, 2);
        assert_eq!(shifted, 2);
        assert_eq!(a.fingerprint.len(), 8);
        // Shifted survivors moved by exactly the offset.
        for (feature, label) in a.labels.iter() {
            if label.kind == Some(ChangeKind::Shifted) {
                let before = original.get(feature).unwrap();
                let after = a.fingerprint.get(feature).unwrap();
                assert_relative_eq!(after - before, -10.0);
            }
        }
        let c = inject_changes(&original, &spec, 1).unwrap();
        assert_ne!(a, c, "draw indices decorrelate the corruptions");
    }

    #[test]
    fn ratio_rounding_never_overshoots() {
        // 0.2 * 10 must select exactly 2, not 3.
        let spec = ChangeSpec {
            missing_ratio: 0.2,
            ..ChangeSpec::default()
        };
        let injected = inject_changes(&ten_features(), &spec, 0).unwrap();
        assert_eq!(injected.fingerprint.len(), 8);
    }

    #[test]
    fn overlapping_ceilings_cap_at_the_feature_count() {
        let spec = ChangeSpec {
            missing_ratio: 0.5,
            shift_ratio: 0.5,
            shift_dbm: 5.0,
            seed: 2,
        };
        let three = fp(&[("f0", -40.0), ("f1", -50.0), ("f2", -60.0)]);
        let injected = inject_changes(&three, &spec, 0).unwrap();
        // ceil(1.5) = 2 missing; the shift count caps at the one feature left.
        let missing = injected
            .labels
            .iter()
            .filter(|(_, l)| l.kind == Some(ChangeKind::Missing))
            .count();
        let shifted = injected
            .labels
            .iter()
            .filter(|(_, l)| l.kind == Some(ChangeKind::Shifted))
            .count();
        assert_eq!(missing, 2);
        assert_eq!(shifted, 1);
    }

    #[test]
    fn shifts_below_the_indicator_become_missing() {
        let spec = ChangeSpec {
            shift_ratio: 1.0,
            shift_dbm: -15.0,
            ..ChangeSpec::default()
        };
        let low = fp(&[("f0", -100.0)]);
        let injected = inject_changes(&low, &spec, 0).unwrap();
        assert!(injected.fingerprint.is_empty());
        assert_eq!(
            injected.labels.get(&fid("f0")).unwrap().kind,
            Some(ChangeKind::Missing)
        );
    }

    #[test]
    fn shifts_clamped_back_to_the_original_value_stay_stable() {
        let spec = ChangeSpec {
            shift_ratio: 1.0,
            shift_dbm: 10.0,
            ..ChangeSpec::default()
        };
        let at_ceiling = fp(&[("f0", 0.0)]);
        let injected = inject_changes(&at_ceiling, &spec, 0).unwrap();
        assert_relative_eq!(injected.fingerprint.get(&fid("f0")).unwrap(), 0.0);
        let label = injected.labels.get(&fid("f0")).unwrap();
        assert_eq!(label.status, ChangeStatus::Stable);
        assert_eq!(label.kind, None);
    }

    #[test]
    fn the_null_spec_is_an_identity() {
        let original = ten_features();
        let injected = inject_changes(&original, &ChangeSpec::default(), 0).unwrap();
        assert_eq!(injected.fingerprint, original);
        assert!(injected.labels.iter().all(|(_, l)| l.status == ChangeStatus::Stable));
        assert_eq!(injected.labels.changed_features().count(), 0);
    }

    #[test]
    fn empty_fingerprints_inject_to_empty() {
        let spec = ChangeSpec {
            missing_ratio: 0.5,
            ..ChangeSpec::default()
        };
        let injected = inject_changes(&Fingerprint::new(), &spec, 0).unwrap();
        assert!(injected.fingerprint.is_empty());
        assert!(injected.labels.is_empty());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_ratio = ChangeSpec {
            missing_ratio: 1.5,
            ..ChangeSpec::default()
        };
        assert!(inject_changes(&ten_features(), &bad_ratio, 0).is_err());
        let bad_sum = ChangeSpec {
            missing_ratio: 0.7,
            shift_ratio: 0.7,
            shift_dbm: 5.0,
            seed: 0,
        };
        assert!(inject_changes(&ten_features(), &bad_sum, 0).is_err());
    }

    proptest! {
        #[test]
        fn injections_preserve_the_label_universe(
            feature_count in 1usize..15,
            missing_step in 0u32..=5,
            shift_step in 0u32..=5,
            shift_dbm in prop_oneof![Just(-10.0), Just(5.0), Just(15.0)],
            draw in 0u64..20,
        ) {
            prop_assume!(missing_step + shift_step <= 5);
            let original: Fingerprint = (0..feature_count)
                .map(|i| (fid(&format!("f{i}")), -40.0 - i as f64))
                .collect();
            let spec = ChangeSpec {
                missing_ratio: f64::from(missing_step) / 10.0,
                shift_ratio: f64::from(shift_step) / 10.0,
                shift_dbm,
                seed: 77,
            };
            let injected = inject_changes(&original, &spec, draw).unwrap();
            // Labels cover exactly the pre-injection features.
            prop_assert_eq!(injected.labels.len(), feature_count);
            for (feature, _) in original.iter() {
                prop_assert!(injected.labels.get(feature).is_some());
            }
            // The output keys are a subset of the input keys.
            for (feature, _) in injected.fingerprint.iter() {
                prop_assert!(original.get(feature).is_some());
            }
            // Stable features kept their exact value.
            for (feature, label) in injected.labels.iter() {
                if label.status == ChangeStatus::Stable {
                    prop_assert_eq!(
                        injected.fingerprint.get(feature),
                        original.get(feature)
                    );
                }
            }
        }
    }
}
