//! # motorclass
//!
//! Left-vs-right hand motor-attempt classification from 12-channel EEG
//! trials.
//!
//! ```text
//! Dataset (manifest + CSV, or synthetic)
//!   ├─ dsp::apply_filter       1-50 Hz windowed-sinc FIR, zero delay
//!   ├─ features::epoch_trial   8 × 1 s epochs per trial
//!   ├─ dsp::psd_epoch          2 × 256-point Hamming periodograms → 25 bins
//!   ├─ stats                   paired t per (channel, bin), right − left map
//!   ├─ classifiers             SVM, KNN, Naive Bayes, AdaBoost, LDA
//!   ├─ fusion                  top-3 rule ensemble
//!   └─ eval                    stratified 3-fold CV, mean ± std report
//! ```

pub mod band;
pub mod classifiers;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod stats;

pub use band::Band;
pub use classifiers::{ClassifierKind, TrainConfig, TrainedModel};
pub use config::RunConfig;
pub use dataset::{generate_synthetic, load_dataset, validate_trial, ChannelSet, Dataset, MotorLabel, SynthConfig, Trial};
pub use dsp::{design_bandpass, FirFilter, PsdVector};
pub use eval::{compute_metrics, make_folds, run_cv, ConfusionMatrix, EvalConfig, EvalReport, FoldPlan};
pub use features::{build_feature_matrix, FeatureMatrix, FeatureRow};
pub use fusion::{rank_models, rule_predict, RuleEnsemble};
pub use stats::{band_aggregate, paired_t, significance_map, t_pvalue, BandMap, SignificanceMap, TTestResult};
