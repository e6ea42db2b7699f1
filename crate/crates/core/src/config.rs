//! Run configuration shared by the library entry points and the CLI.
//! Every section has defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, TrainConfig};
use crate::dataset::SynthConfig;
use crate::dsp::{self, DspError, FirFilter};
use crate::features::FeatureOptions;
use crate::stats::SignificanceOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    pub taps: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            low_hz: dsp::DEFAULT_LOW_HZ,
            high_hz: dsp::DEFAULT_HIGH_HZ,
            taps: dsp::DEFAULT_TAPS,
        }
    }
}

impl FilterConfig {
    pub fn build(&self) -> Result<FirFilter, DspError> {
        dsp::design_bandpass(dsp::SAMPLE_RATE_HZ, self.low_hz, self.high_hz, self.taps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitUnit {
    /// All epochs of a trial share a fold.
    #[default]
    Trial,
    /// Epochs are assigned to folds independently.
    Epoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub split: SplitUnit,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 3,
            seed: 7,
            split: SplitUnit::Trial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingSource {
    /// Rank on a held-out part of each training fold.
    #[default]
    Holdout,
    /// Rank on training accuracy.
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub ranking_source: RankingSource,
    /// Share of each side's training units held out for ranking.
    pub calibration_fraction: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            ranking_source: RankingSource::Holdout,
            calibration_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub filter: FilterConfig,
    pub features: FeatureOptions,
    pub stats: SignificanceOptions,
    pub train: TrainConfig,
    pub cv: CvConfig,
    pub fusion: FusionConfig,
    pub classifiers: Vec<ClassifierKind>,
    pub synth: SynthConfig,
    pub io: IoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            filter: FilterConfig::default(),
            features: FeatureOptions::default(),
            stats: SignificanceOptions::default(),
            train: TrainConfig::default(),
            cv: CvConfig::default(),
            fusion: FusionConfig::default(),
            classifiers: ClassifierKind::ALL.to_vec(),
            synth: SynthConfig::default(),
            io: IoConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Parses a JSON config file of type `T`.
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_json(&text).map_err(|message| ConfigError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

/// Parses JSON text, naming the offending field path on error.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("field '{path}': {}", e.inner())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.cv.k, 3);
        assert_eq!(cfg.train.knn.k, 5);
        assert_eq!(cfg.filter.taps, 1691);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"filtr": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"svm": {"gamma": 1}}}"#).is_err());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"train": {"knn": {"k": 7}}, "features": {"scale": "db"}}"#).unwrap();
        assert_eq!(cfg.train.knn.k, 7);
        assert_eq!(cfg.train.svm.c, 1.0);
        assert_eq!(cfg.features.scale, crate::features::FeatureScale::Db);
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse_json::<RunConfig>(r#"{"synth": {"target_band": "gamma"}}"#).unwrap_err();
        assert!(err.contains("synth.target_band"), "{err}");
    }
}
