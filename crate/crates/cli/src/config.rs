//! Layered run configuration.
//!
//! Every tunable of the pipeline lives in one [`RunConfig`] document so a
//! run is fully described by a single TOML file. Values are resolved in
//! four layers, each overriding the previous one:
//!
//! 1. built-in defaults,
//! 2. a TOML config file (`--config`, or the `RFM_CONFIG` env var),
//! 3. curated `RFM_*` environment variables,
//! 4. command-line flags.
//!
//! The one global `seed` drives every randomized step: after layering it is
//! copied into the scenario and resampling sections, so seeds embedded in a
//! config file are overridden by design (one seed to rule a run). The fully
//! resolved document is echoed next to every command's outputs as
//! `effective-config.toml` and hashed into the manifest.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use rfm_core::{
    Error, KsConfig, PositioningConfig, PropagationScenario, ResampleConfig, Result, RobustConfig,
    VariabilityModel,
};
use serde::{Deserialize, Serialize};

/// Grid materialization settings for `build-rfm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// Cell spacing of the interpolated map (meters).
    pub spacing_m: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { spacing_m: 0.5 }
    }
}

/// Consensus-stage settings of the robust pipeline (the resampling and
/// matching stages have their own sections).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustSettings {
    /// Candidates must reach this fraction of the best overlap score.
    pub mji_ratio: f64,
    /// Residual magnitude (dBm) still counted as agreeing by the
    /// count-based candidate strategy.
    pub residual_tolerance_dbm: f64,
}

impl Default for RobustSettings {
    fn default() -> Self {
        RobustSettings {
            mji_ratio: 0.97,
            residual_tolerance_dbm: 10.0,
        }
    }
}

/// Change-detection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSettings {
    /// Belief at or above which a feature is reported as changed.
    pub threshold: f64,
    /// Belief at or above which a feature is excluded before relocating.
    pub drop_threshold: f64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        DetectionSettings {
            threshold: 0.5,
            drop_threshold: 0.95,
        }
    }
}

/// Sampling-ratio sweep bounds (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// First sampling ratio.
    pub start: f64,
    /// Last sampling ratio.
    pub stop: f64,
    /// Ratio increment.
    pub step: f64,
    /// Ellipse scale of the dispersiveness metric (1 = 1-sigma ellipse).
    pub ellipse_scale: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            start: 0.05,
            stop: 0.95,
            step: 0.05,
            ellipse_scale: 1.0,
        }
    }
}

impl SweepSettings {
    /// The swept ratios, `start` to `stop` inclusive in `step` increments.
    #[must_use]
    pub fn ratios(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let ratio = self.step.mul_add(f64::from(i), self.start);
            if ratio > self.stop + 1e-9 {
                break;
            }
            out.push(ratio);
            i += 1;
        }
        out
    }
}

/// The complete, layered configuration of one command invocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every randomized step of the run.
    pub seed: u64,
    /// Grid materialization.
    pub grid: GridSettings,
    /// Kernel smoother (kernel, query radius, solve form).
    pub ks: KsConfig,
    /// Fingerprint matching, shared by the baseline and the robust pipeline.
    pub positioning: PositioningConfig,
    /// Feature resampling of the robust pipeline.
    pub resample: ResampleConfig,
    /// Consensus stage of the robust pipeline.
    pub robust: RobustSettings,
    /// Change-detection thresholds.
    pub detection: DetectionSettings,
    /// Signal variability model backing the change beliefs.
    pub variability: VariabilityModel,
    /// Synthetic scenario generation.
    pub scenario: PropagationScenario,
    /// Sampling-ratio sweep.
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            grid: GridSettings::default(),
            ks: KsConfig::default(),
            positioning: PositioningConfig::default(),
            resample: ResampleConfig::default(),
            robust: RobustSettings::default(),
            detection: DetectionSettings::default(),
            variability: VariabilityModel::default(),
            scenario: PropagationScenario::default(),
            sweep: SweepSettings::default(),
        }
    }
}

impl RunConfig {
    /// Resolves the effective configuration from all four layers.
    ///
    /// # Errors
    /// Returns [`Error::Io`] when the config file cannot be read,
    /// [`Error::Parse`] when the file or an `RFM_*` variable does not parse,
    /// and [`Error::InvalidInput`] when a resolved value is out of range.
    pub fn layered(config_flag: Option<&Path>, seed_flag: Option<u64>) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let path: Option<PathBuf> = config_flag
            .map(Path::to_path_buf)
            .or_else(|| env::var_os("RFM_CONFIG").map(PathBuf::from));
        if let Some(path) = path {
            let text = fs::read_to_string(&path)?;
            cfg = toml::from_str(&text)
                .map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    message: e.to_string(),
                })?;
        }
        cfg.apply_env()?;
        if let Some(seed) = seed_flag {
            cfg.seed = seed;
        }
        cfg.sync_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the curated `RFM_*` overrides (layer 3).
    fn apply_env(&mut self) -> Result<()> {
        if let Some(v) = env_parse::<u64>("RFM_SEED")? {
            self.seed = v;
        }
        if let Some(v) = env_parse::<f64>("RFM_GRID_SPACING_M")? {
            self.grid.spacing_m = v;
        }
        if let Some(v) = env_parse::<f64>("RFM_QUERY_SCALE")? {
            self.ks.query.scale = v;
        }
        if let Some(v) = env_parse::<usize>("RFM_K")? {
            self.positioning.k = v;
        }
        if let Some(v) = env_parse::<f64>("RFM_DETECT_THRESHOLD")? {
            self.detection.threshold = v;
        }
        Ok(())
    }

    /// Propagates the global seed into the seeded sections.
    fn sync_seeds(&mut self) {
        self.resample.seed = self.seed;
        self.scenario.seed = self.seed;
    }

    /// Validates every section against its documented ranges.
    ///
    /// # Errors
    /// Returns [`Error::InvalidInput`] naming the offending parameter.
    pub fn validate(&self) -> Result<()> {
        self.ks.validate()?;
        self.robust_config().validate()?;
        self.scenario.validate()?;
        if !(self.grid.spacing_m.is_finite() && self.grid.spacing_m > 0.0) {
            return Err(Error::InvalidInput(
                "grid.spacing_m must be finite and > 0".into(),
            ));
        }
        for (name, value) in [
            ("detection.threshold", self.detection.threshold),
            ("detection.drop_threshold", self.detection.drop_threshold),
        ] {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1]")));
            }
        }
        let sweep = &self.sweep;
        let bounds_ok = sweep.start.is_finite()
            && sweep.stop.is_finite()
            && sweep.step.is_finite()
            && sweep.start > 0.0
            && sweep.start <= sweep.stop
            && sweep.stop <= 1.0
            && sweep.step > 0.0;
        if !bounds_ok {
            return Err(Error::InvalidInput(
                "sweep bounds must satisfy 0 < start <= stop <= 1 with step > 0".into(),
            ));
        }
        if !(sweep.ellipse_scale.is_finite() && sweep.ellipse_scale > 0.0) {
            return Err(Error::InvalidInput(
                "sweep.ellipse_scale must be finite and > 0".into(),
            ));
        }
        Ok(())
    }

    /// Assembles the library-level robust pipeline configuration.
    #[must_use]
    pub fn robust_config(&self) -> RobustConfig {
        RobustConfig {
            resample: self.resample,
            positioning: self.positioning,
            mji_ratio: self.robust.mji_ratio,
            residual_tolerance_dbm: self.robust.residual_tolerance_dbm,
        }
    }
}

/// Parses an optional environment variable, treating failures as parse
/// errors attributed to a `<env:NAME>` pseudo-path.
fn env_parse<T: std::str::FromStr>(name: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match env::var(name) {
        Ok(raw) => raw
            .trim()
            .parse::<T>()
            .map(Some)
            .map_err(|e| Error::Parse {
                path: format!("<env:{name}>"),
                line: 0,
                message: format!("cannot parse {raw:?}: {e}"),
            }),
        Err(env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Parse {
            path: format!("<env:{name}>"),
            line: 0,
            message: e.to_string(),
        }),
    }
}
