//! Five binary classifiers behind one fit/predict contract.
//!
//! Every model maps the positive class (Right) to +1 and the negative class
//! to -1 internally. Trainers that iterate over rows first put them in a
//! canonical order, so fitted models do not depend on input row order.

mod boosting;
mod knn;
mod lda;
mod naive_bayes;
mod svm;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::MotorLabel;

pub use boosting::{train_adaboost, BoostingConfig, Stump, WeightedStump};
pub use knn::{train_knn, KnnConfig};
pub use lda::{train_lda, LdaConfig};
pub use naive_bayes::{train_naive_bayes, ClassDensity, NaiveBayesConfig};
pub use svm::{train_svm, SvmConfig};

/// Label treated as positive everywhere in the system.
pub const POSITIVE_CLASS: MotorLabel = MotorLabel::Right;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("class {label:?} has {got} rows, need at least {need}")]
    TooFewRows { label: MotorLabel, got: usize, need: usize },
    #[error("{rows} training rows but {labels} labels")]
    LabelCountMismatch { rows: usize, labels: usize },
    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { got: usize, expected: usize },
    #[error("non-finite training value")]
    NonFinite,
    #[error("invalid hyperparameter {name}: {message}")]
    InvalidConfig { name: &'static str, message: String },
    #[error("linear solve failed: covariance not positive definite after shrinkage")]
    SolverFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Svm,
    Knn,
    NaiveBayes,
    Boosting,
    Lda,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        ClassifierKind::Svm,
        ClassifierKind::Knn,
        ClassifierKind::NaiveBayes,
        ClassifierKind::Boosting,
        ClassifierKind::Lda,
    ];

    /// Tie-break rank when accuracies are equal (lower wins):
    /// SVM > LDA > Boosting > KNN > NaiveBayes.
    pub fn precedence(self) -> usize {
        match self {
            ClassifierKind::Svm => 0,
            ClassifierKind::Lda => 1,
            ClassifierKind::Boosting => 2,
            ClassifierKind::Knn => 3,
            ClassifierKind::NaiveBayes => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Knn => "knn",
            ClassifierKind::NaiveBayes => "naive_bayes",
            ClassifierKind::Boosting => "boosting",
            ClassifierKind::Lda => "lda",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::NaiveBayes => "Naive Bayes",
            ClassifierKind::Boosting => "Ensemble for Boosting",
            ClassifierKind::Lda => "Linear Discriminant Analysis",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "knn" => Ok(ClassifierKind::Knn),
            "nb" | "naive_bayes" | "naivebayes" => Ok(ClassifierKind::NaiveBayes),
            "boosting" | "adaboost" => Ok(ClassifierKind::Boosting),
            "lda" => Ok(ClassifierKind::Lda),
            other => Err(format!("unknown classifier '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub svm: SvmConfig,
    pub knn: KnnConfig,
    pub boosting: BoostingConfig,
    pub lda: LdaConfig,
    pub nb: NaiveBayesConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            svm: SvmConfig::default(),
            knn: KnnConfig::default(),
            boosting: BoostingConfig::default(),
            lda: LdaConfig::default(),
            nb: NaiveBayesConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |name: &'static str, message: &str| {
            Err(ClassifierError::InvalidConfig {
                name,
                message: message.to_string(),
            })
        };
        if !(self.svm.c > 0.0 && self.svm.c.is_finite()) {
            return bad("svm.c", "must be positive");
        }
        if self.svm.epochs == 0 {
            return bad("svm.epochs", "must be positive");
        }
        if self.knn.k == 0 || self.knn.k % 2 == 0 {
            return bad("knn.k", "must be odd and positive");
        }
        if self.boosting.rounds == 0 {
            return bad("boosting.rounds", "must be positive");
        }
        if !(self.lda.shrinkage > 0.0 && self.lda.shrinkage.is_finite()) {
            return bad("lda.shrinkage", "must be positive");
        }
        if !(self.nb.variance_floor_ratio > 0.0 && self.nb.variance_floor_ratio.is_finite()) {
            return bad("nb.variance_floor_ratio", "must be positive");
        }
        Ok(())
    }
}

/// Fitted parameters, tagged by classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Svm {
        weights: Vec<f64>,
        bias: f64,
    },
    Knn {
        k: usize,
        rows: Vec<Vec<f64>>,
        labels: Vec<MotorLabel>,
    },
    NaiveBayes {
        positive: ClassDensity,
        negative: ClassDensity,
    },
    Boosting {
        stumps: Vec<WeightedStump>,
    },
    Lda {
        weights: Vec<f64>,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub positive_class: MotorLabel,
    pub width: usize,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.params {
            ModelParams::Svm { .. } => ClassifierKind::Svm,
            ModelParams::Knn { .. } => ClassifierKind::Knn,
            ModelParams::NaiveBayes { .. } => ClassifierKind::NaiveBayes,
            ModelParams::Boosting { .. } => ClassifierKind::Boosting,
            ModelParams::Lda { .. } => ClassifierKind::Lda,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<MotorLabel, ClassifierError> {
        if row.len() != self.width {
            return Err(ClassifierError::WidthMismatch {
                got: row.len(),
                expected: self.width,
            });
        }
        let positive = match &self.params {
            ModelParams::Svm { weights, bias } => dot(weights, row) + bias >= 0.0,
            ModelParams::Knn { k, rows, labels } => knn::vote(*k, rows, labels, row, self.positive_class),
            ModelParams::NaiveBayes { positive, negative } => {
                positive.log_score(row) >= negative.log_score(row)
            }
            ModelParams::Boosting { stumps } => boosting::score(stumps, row) >= 0.0,
            ModelParams::Lda { weights, threshold } => dot(weights, row) >= *threshold,
        };
        Ok(if positive {
            self.positive_class
        } else {
            self.positive_class.other()
        })
    }

    pub fn predict_all<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<MotorLabel>, ClassifierError> {
        rows.iter().map(|r| self.predict(r.as_ref())).collect()
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy<R: AsRef<[f64]>>(&self, rows: &[R], labels: &[MotorLabel]) -> Result<f64, ClassifierError> {
        let preds = self.predict_all(rows)?;
        let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<TrainedModel> {
        serde_json::from_str(text)
    }
}

/// Trains the classifier of `kind` with its section of `cfg`.
pub fn train(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[MotorLabel],
    cfg: &TrainConfig,
) -> Result<TrainedModel, ClassifierError> {
    match kind {
        ClassifierKind::Svm => train_svm(x, y, &cfg.svm),
        ClassifierKind::Knn => train_knn(x, y, &cfg.knn),
        ClassifierKind::NaiveBayes => train_naive_bayes(x, y, &cfg.nb),
        ClassifierKind::Boosting => train_adaboost(x, y, &cfg.boosting),
        ClassifierKind::Lda => train_lda(x, y, &cfg.lda),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// +1 for the positive class, -1 otherwise.
pub(crate) fn sign_of(label: MotorLabel) -> f64 {
    if label == POSITIVE_CLASS {
        1.0
    } else {
        -1.0
    }
}

/// Shared input checks; returns the feature width.
pub(crate) fn check_training(
    x: &[Vec<f64>],
    y: &[MotorLabel],
    min_per_class: usize,
) -> Result<usize, ClassifierError> {
    if x.len() != y.len() {
        return Err(ClassifierError::LabelCountMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let width = x.first().map_or(0, Vec::len);
    for r in x {
        if r.len() != width {
            return Err(ClassifierError::WidthMismatch {
                got: r.len(),
                expected: width,
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite);
        }
    }
    let pos = y.iter().filter(|&&l| l == POSITIVE_CLASS).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(ClassifierError::SingleClass);
    }
    for (label, got) in [(POSITIVE_CLASS, pos), (POSITIVE_CLASS.other(), neg)] {
        if got < min_per_class {
            return Err(ClassifierError::TooFewRows {
                label,
                got,
                need: min_per_class,
            });
        }
    }
    Ok(width)
}

/// Row indices sorted lexicographically by feature values (total order),
/// with label as the final key.
pub(crate) fn canonical_order(x: &[Vec<f64>], y: &[MotorLabel]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(y[a].cmp(&y[b]))
    });
    idx
}
