//! Two-class Fisher LDA with trace-scaled ridge shrinkage of the pooled
//! covariance.

use serde::{Deserialize, Serialize};

use super::{check_training, dot, ClassifierError, ModelParams, TrainedModel, POSITIVE_CLASS};
use crate::dataset::MotorLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdaConfig {
    /// γ in S' = S + γ·(trace(S)/d)·I.
    pub shrinkage: f64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig { shrinkage: 1e-3 }
    }
}

/// Lower-triangular Cholesky factor of a symmetric matrix stored row-major.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solves L·Lᵀ·x = b.
fn cholesky_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * d + i];
    }
    x
}

fn class_stats(x: &[Vec<f64>], y: &[MotorLabel], label: MotorLabel, d: usize) -> (usize, Vec<f64>, Vec<f64>) {
    let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, l)| **l == label).map(|(r, _)| r).collect();
    let n = rows.len();
    let mut mean = vec![0.0; d];
    for r in &rows {
        mean.iter_mut().zip(r.iter()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut scatter = vec![0.0; d * d];
    let mut centered = vec![0.0; d];
    for r in &rows {
        for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(&mean)) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut scatter[i * d..(i + 1) * d];
            for (s, cj) in row.iter_mut().zip(&centered) {
                *s += ci * cj;
            }
        }
    }
    (n, mean, scatter)
}

pub fn train_lda(x: &[Vec<f64>], y: &[MotorLabel], cfg: &LdaConfig) -> Result<TrainedModel, ClassifierError> {
    let d = check_training(x, y, 2)?;
    let (n_pos, mu_pos, s_pos) = class_stats(x, y, POSITIVE_CLASS, d);
    let (n_neg, mu_neg, s_neg) = class_stats(x, y, POSITIVE_CLASS.other(), d);
    let dof = (n_pos + n_neg - 2) as f64;
    let mut cov: Vec<f64> = s_pos.iter().zip(&s_neg).map(|(a, b)| (a + b) / dof).collect();
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let ridge = cfg.shrinkage * trace / d as f64;
    for i in 0..d {
        cov[i * d + i] += ridge;
    }
    let l = cholesky(&cov, d).ok_or(ClassifierError::SolverFailure)?;
    let diff: Vec<f64> = mu_pos.iter().zip(&mu_neg).map(|(a, b)| a - b).collect();
    let weights = cholesky_solve(&l, d, &diff);
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(ClassifierError::SolverFailure);
    }
    let midpoint: Vec<f64> = mu_pos.iter().zip(&mu_neg).map(|(a, b)| 0.5 * (a + b)).collect();
    let log_prior_ratio = (n_pos as f64).ln() - (n_neg as f64).ln();
    let threshold = dot(&weights, &midpoint) - log_prior_ratio;
    Ok(TrainedModel {
        positive_class: POSITIVE_CLASS,
        width: d,
        params: ModelParams::Lda { weights, threshold },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        let b = vec![1.0, -2.0, 0.5];
        let x = cholesky_solve(&l, 3, &b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    fn two_blobs() -> (Vec<Vec<f64>>, Vec<MotorLabel>) {
        // Deterministic symmetric jitter around ±(1, 2).
        let offsets = [[0.3, -0.2], [-0.3, 0.2], [0.1, 0.4], [-0.1, -0.4], [0.25, 0.25], [-0.25, -0.25]];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (sign, label) in [(1.0, MotorLabel::Right), (-1.0, MotorLabel::Left)] {
            for o in offsets {
                x.push(vec![sign * 1.0 + o[0], sign * 2.0 + o[1]]);
                y.push(label);
            }
        }
        (x, y)
    }

    #[test]
    fn direction_follows_mean_difference_for_isotropic_classes() {
        let (x, y) = two_blobs();
        let m = train_lda(&x, &y, &LdaConfig::default()).unwrap();
        let ModelParams::Lda { weights, .. } = &m.params else { unreachable!() };
        let target = [2.0, 4.0];
        let cos = dot(weights, &target) / (dot(weights, weights).sqrt() * dot(&target, &target).sqrt());
        assert!(cos >= 0.99, "{cos}");
        assert_eq!(m.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn duplicated_columns_are_regularized() {
        let (x, y) = two_blobs();
        let dup: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0], r[1], r[0], r[1]]).collect();
        let m = train_lda(&dup, &y, &LdaConfig::default()).unwrap();
        let ModelParams::Lda { weights, threshold } = &m.params else { unreachable!() };
        assert!(weights.iter().all(|w| w.is_finite()) && threshold.is_finite());
        assert_eq!(m.accuracy(&dup, &y).unwrap(), 1.0);
    }

    #[test]
    fn all_constant_features_fail_loudly() {
        let x = vec![vec![1.0, 1.0]; 4];
        let y = vec![MotorLabel::Right, MotorLabel::Right, MotorLabel::Left, MotorLabel::Left];
        assert_eq!(train_lda(&x, &y, &LdaConfig::default()), Err(ClassifierError::SolverFailure));
    }
}
