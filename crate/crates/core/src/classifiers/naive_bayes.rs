use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_training, ClassifierError, ModelParams, TrainedModel, POSITIVE_CLASS};
use crate::dataset::MotorLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NaiveBayesConfig {
    /// Variance floor as a fraction of the mean per-feature variance.
    pub variance_floor_ratio: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        NaiveBayesConfig {
            variance_floor_ratio: 1e-9,
        }
    }
}

/// Absolute floor used when every feature is constant.
const MIN_VARIANCE: f64 = 1e-12;

/// Independent Gaussians for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDensity {
    pub label: MotorLabel,
    pub log_prior: f64,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl ClassDensity {
    pub fn log_score(&self, row: &[f64]) -> f64 {
        self.log_prior
            + row
                .iter()
                .zip(self.means.iter().zip(&self.variances))
                .map(|(x, (m, v))| -0.5 * (2.0 * PI * v).ln() - (x - m) * (x - m) / (2.0 * v))
                .sum::<f64>()
    }
}

fn moments(rows: &[&Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut means = vec![0.0; width];
    for r in rows {
        means.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; width];
    for r in rows {
        for ((s, v), m) in vars.iter_mut().zip(r.iter()).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    vars.iter_mut().for_each(|s| *s /= n);
    (means, vars)
}

pub fn train_naive_bayes(
    x: &[Vec<f64>],
    y: &[MotorLabel],
    cfg: &NaiveBayesConfig,
) -> Result<TrainedModel, ClassifierError> {
    let width = check_training(x, y, 2)?;
    let all: Vec<&Vec<f64>> = x.iter().collect();
    let (_, overall) = moments(&all, width);
    let mean_var = overall.iter().sum::<f64>() / width.max(1) as f64;
    let floor = (cfg.variance_floor_ratio * mean_var).max(MIN_VARIANCE);

    let density = |label: MotorLabel| {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, l)| **l == label).map(|(r, _)| r).collect();
        let (means, vars) = moments(&rows, width);
        ClassDensity {
            label,
            log_prior: (rows.len() as f64).ln() - (x.len() as f64).ln(),
            means,
            variances: vars.into_iter().map(|v| v.max(floor)).collect(),
        }
    };
    Ok(TrainedModel {
        positive_class: POSITIVE_CLASS,
        width,
        params: ModelParams::NaiveBayes {
            positive: density(POSITIVE_CLASS),
            negative: density(POSITIVE_CLASS.other()),
        },
    })
}
