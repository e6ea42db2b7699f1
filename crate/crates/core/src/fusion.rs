//! Rule-based fusion of the three most accurate classifiers.
//!
//! The output is Positive when the 1st-ranked model says Positive and at
//! least one of the 2nd and 3rd agrees; every other combination is Negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{ClassifierError, ClassifierKind, TrainedModel, POSITIVE_CLASS};
use crate::dataset::MotorLabel;

pub const ENSEMBLE_SIZE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("empty calibration set")]
    EmptyCalibration,
    #[error("rule fusion needs at least {ENSEMBLE_SIZE} models, got {0}")]
    TooFewModels(usize),
    #[error("calibration rows and labels differ in length ({0} vs {1})")]
    LabelCountMismatch(usize, usize),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Table rule: positive iff the first classifier says positive and at least
/// one of the other two agrees.
pub fn rule_decision(first: bool, second: bool, third: bool) -> bool {
    first && (second || third)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model: TrainedModel,
    pub calibration_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub kind: ClassifierKind,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEnsemble {
    /// 1st, 2nd, 3rd by calibration accuracy.
    pub ranked: Vec<RankedModel>,
    /// Every candidate's accuracy in ranked order, for reporting.
    pub ranking: Vec<RankingEntry>,
    pub positive_class: MotorLabel,
    pub tie_policy: Vec<ClassifierKind>,
}

/// Indices of `accuracies` sorted descending, equal accuracies resolved by
/// kind precedence (SVM > LDA > Boosting > KNN > NaiveBayes).
pub fn rank_order(entries: &[(ClassifierKind, f64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| {
        entries[b]
            .1
            .total_cmp(&entries[a].1)
            .then(entries[a].0.precedence().cmp(&entries[b].0.precedence()))
    });
    idx
}

fn tie_policy() -> Vec<ClassifierKind> {
    let mut kinds = ClassifierKind::ALL.to_vec();
    kinds.sort_by_key(|k| k.precedence());
    kinds
}

/// Builds the ensemble from models and accuracies measured elsewhere.
pub fn ensemble_from_accuracies(models: Vec<TrainedModel>, accuracies: &[f64]) -> Result<RuleEnsemble, FusionError> {
    if models.len() < ENSEMBLE_SIZE {
        return Err(FusionError::TooFewModels(models.len()));
    }
    let entries: Vec<(ClassifierKind, f64)> = models.iter().map(|m| m.kind()).zip(accuracies.iter().copied()).collect();
    let order = rank_order(&entries);
    let ranking = order
        .iter()
        .map(|&i| RankingEntry {
            kind: entries[i].0,
            accuracy: entries[i].1,
        })
        .collect();
    let mut slots: Vec<Option<TrainedModel>> = models.into_iter().map(Some).collect();
    let ranked = order[..ENSEMBLE_SIZE]
        .iter()
        .map(|&i| RankedModel {
            model: slots[i].take().expect("each model ranked once"),
            calibration_accuracy: entries[i].1,
        })
        .collect();
    Ok(RuleEnsemble {
        ranked,
        ranking,
        positive_class: POSITIVE_CLASS,
        tie_policy: tie_policy(),
    })
}

/// Ranks models by accuracy on the calibration rows and keeps the top three.
pub fn rank_models<R: AsRef<[f64]>>(
    models: Vec<TrainedModel>,
    calib_rows: &[R],
    calib_labels: &[MotorLabel],
) -> Result<RuleEnsemble, FusionError> {
    if calib_rows.is_empty() {
        return Err(FusionError::EmptyCalibration);
    }
    if calib_rows.len() != calib_labels.len() {
        return Err(FusionError::LabelCountMismatch(calib_rows.len(), calib_labels.len()));
    }
    let accuracies = models
        .iter()
        .map(|m| m.accuracy(calib_rows, calib_labels))
        .collect::<Result<Vec<_>, _>>()?;
    ensemble_from_accuracies(models, &accuracies)
}

impl RuleEnsemble {
    pub fn ranked_kinds(&self) -> Vec<ClassifierKind> {
        self.ranked.iter().map(|r| r.model.kind()).collect()
    }

    /// Applies the rule table to the three ranked models' predictions.
    pub fn predict(&self, row: &[f64]) -> Result<MotorLabel, ClassifierError> {
        let mut votes = [false; ENSEMBLE_SIZE];
        for (v, r) in votes.iter_mut().zip(&self.ranked) {
            *v = r.model.predict(row)? == self.positive_class;
        }
        Ok(if rule_decision(votes[0], votes[1], votes[2]) {
            self.positive_class
        } else {
            self.positive_class.other()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<RuleEnsemble> {
        serde_json::from_str(text)
    }
}

pub fn rule_predict(ensemble: &RuleEnsemble, row: &[f64]) -> Result<MotorLabel, ClassifierError> {
    ensemble.predict(row)
}
