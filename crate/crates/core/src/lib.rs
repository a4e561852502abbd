//! Robust WiFi-fingerprint positioning with feature-wise change detection.
//!
//! The crate models an indoor space as a *reference fingerprint map* built
//! from surveyed signal-strength fingerprints, and answers two questions
//! about any new measurement:
//!
//! 1. **Where was it taken?** Kernel-smoothed per-feature signal fields are
//!    interpolated onto a grid ([`rfm`]); queries are matched by kNN under a
//!    coverage-aware dissimilarity ([`positioning`]); and a resampling
//!    pipeline keeps the estimate honest when parts of the fingerprint are
//!    corrupted ([`robust`]).
//! 2. **What changed in the environment?** Each feature's measured value is
//!    compared against the map's expectation under a fitted variability
//!    model, yielding per-feature change beliefs ([`change`]), which can be
//!    validated against robust-statistics ground truth ([`labeling`]).
//!
//! Supporting modules cover synthetic scenario generation and change
//! injection ([`simulate`]), evaluation metrics ([`metrics`]), CSV ingest and
//! export ([`dataset`]), and on-disk map persistence ([`container`]).
//!
//! Everything randomized is seeded and deterministic: generation, resampling,
//! and injection reproduce bit-identically for a given seed, regardless of
//! thread count.

/// Library version, exposed so downstream tools can stamp their outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod change;
pub mod container;
pub mod dataset;
pub mod error;
pub mod fingerprint;
pub mod kernel;
pub mod labeling;
pub mod metrics;
pub mod positioning;
pub mod rfm;
pub mod robust;
pub mod simulate;

mod rng;
mod stats;

pub use change::{
    change_belief, detect_changes, drop_changed_and_relocate, fit_variability, ChangeBeliefSet,
    FeatureBelief, Relocation, VariabilityModel,
};
pub use container::{load_rfm, save_rfm, RfmContainer};
pub use dataset::{read_fingerprints, write_long_csv, write_wide_csv, DatasetFormat, IngestResult};
pub use error::{Error, Result};
pub use fingerprint::{
    cdm, mji, Fingerprint, FeatureId, GlobalFeatureRegistry, LabeledFingerprint, MISSING_DBM,
};
pub use kernel::{matern32, KernelParams, QueryConfig};
pub use labeling::{label_inter_block, label_within_block, robust_stats, BlockStats, ChangeStatus};
pub use metrics::{
    bandwidth_3db, bias, confusion, confusion_from_scores, dispersiveness, ecdf_accuracy, roc_auc,
    Bandwidth3Db, ConfusionMatrix, EcdfCurve, RocCurve, RocPoint, SweepPoint,
};
pub use positioning::{
    knn_locate, knn_locate_dropout, Dissimilarity, PositionEstimate, PositioningConfig,
};
pub use rfm::{
    expected_fingerprint_grid, expected_fingerprint_ks, interpolate_grid, ks_predict,
    ks_predict_query, smooth_dataset, smooth_points, KsConfig, RfmGrid, RfmTrainingSet, RoiBounds,
};
pub use robust::{
    identify_candidate_threshold, identify_candidates_mji, intermediate_locations, resample,
    robust_locate, CandidateSet, ResampleConfig, RobustConfig, RobustEstimate,
};
pub use simulate::{
    change_grid, generate_scenario, inject_changes, smooth_validation, ChangeLabels, ChangeSpec,
    InjectedFingerprint, PropagationScenario, SyntheticDataset,
};
