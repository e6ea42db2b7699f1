//! Linear soft-margin SVM trained with the Pegasos stochastic subgradient
//! schedule. The bias is unregularized: it takes the same subgradient steps
//! as the weights but is neither decayed nor projected. The returned model
//! is the average of the weight iterates over the second half of the
//! steps, with the bias then set exactly: the hinge loss is piecewise linear
//! in b, and the midpoint of its minimizing interval is used.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{canonical_order, check_training, dot, sign_of, ClassifierError, ModelParams, TrainedModel, POSITIVE_CLASS};
use crate::dataset::MotorLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 200,
            seed: 0,
        }
    }
}

/// Minimizes (λ/2)|w|² + mean hinge loss over (w, b) with λ = 1/(C·n).
pub fn train_svm(x: &[Vec<f64>], y: &[MotorLabel], cfg: &SvmConfig) -> Result<TrainedModel, ClassifierError> {
    let width = check_training(x, y, 1)?;
    if !(cfg.c > 0.0) || cfg.epochs == 0 {
        return Err(ClassifierError::InvalidConfig {
            name: "svm",
            message: "c and epochs must be positive".into(),
        });
    }
    let n = x.len();
    let lambda = 1.0 / (cfg.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let order = canonical_order(x, y);
    let signs: Vec<f64> = y.iter().map(|&l| sign_of(l)).collect();

    let mut w = vec![0.0; width];
    let mut bias = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perm = order.clone();
    let mut step = 0u64;
    let total = (cfg.epochs * n) as u64;
    let mut w_sum = vec![0.0; width];
    let mut b_sum = 0.0;
    let mut averaged = 0u64;
    for _ in 0..cfg.epochs {
        perm.copy_from_slice(&order);
        perm.shuffle(&mut rng);
        for &i in &perm {
            step += 1;
            let eta = 1.0 / (lambda * step as f64);
            let margin = signs[i] * (dot(&w, &x[i]) + bias);
            let decay = 1.0 - 1.0 / step as f64;
            w.iter_mut().for_each(|v| *v *= decay);
            if margin < 1.0 {
                let g = eta * signs[i];
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += g * xj;
                }
                bias += g;
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
            if 2 * step > total {
                w_sum.iter_mut().zip(&w).for_each(|(a, v)| *a += v);
                b_sum += bias;
                averaged += 1;
            }
        }
    }
    let w: Vec<f64> = w_sum.iter().map(|v| v / averaged as f64).collect();
    let scores: Vec<f64> = x.iter().map(|r| dot(&w, r)).collect();
    let bias = best_bias(&scores, &signs).unwrap_or(b_sum / averaged as f64);
    Ok(TrainedModel {
        positive_class: POSITIVE_CLASS,
        width,
        params: ModelParams::Svm { weights: w, bias },
    })
}

/// Midpoint of the set of b minimizing Σ max(0, 1 − yᵢ(sᵢ + b)).
///
/// A positive row contributes slope −1 while b < 1 − sᵢ, a negative row +1
/// once b > −1 − sᵢ; the minimizers lie between the first breakpoint with
/// non-negative right slope and the last with non-positive left slope.
fn best_bias(scores: &[f64], signs: &[f64]) -> Option<f64> {
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (s, y) in scores.iter().zip(signs) {
        if *y > 0.0 {
            pos.push(1.0 - s);
        } else {
            neg.push(-1.0 - s);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut all: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    all.sort_by(f64::total_cmp);
    // Counts of breakpoints strictly below / at-or-below b.
    let below = |v: &[f64], b: f64| v.partition_point(|&p| p < b);
    let at_or_below = |v: &[f64], b: f64| v.partition_point(|&p| p <= b);
    let right_slope = |b: f64| at_or_below(&neg, b) as i64 - (pos.len() - at_or_below(&pos, b)) as i64;
    let left_slope = |b: f64| below(&neg, b) as i64 - (pos.len() - below(&pos, b)) as i64;
    let lo = all.iter().copied().find(|&b| right_slope(b) >= 0)?;
    let hi = all.iter().rev().copied().find(|&b| left_slope(b) <= 0)?;
    let mid = 0.5 * (lo + hi);
    mid.is_finite().then_some(mid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_pair() {
        let x = vec![vec![-1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
        let y = vec![MotorLabel::Left, MotorLabel::Right];
        let m = train_svm(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(m.predict_all(&x).unwrap(), y);
    }

    #[test]
    fn mirrored_problem_same_accuracy() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.37).sin() + if i % 2 == 0 { 0.8 } else { -0.8 }, (i as f64).cos()])
            .collect();
        let y: Vec<MotorLabel> = (0..20)
            .map(|i| if i % 2 == 0 { MotorLabel::Right } else { MotorLabel::Left })
            .collect();
        let neg_x: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let flip_y: Vec<MotorLabel> = y.iter().map(|l| l.other()).collect();
        let a = train_svm(&x, &y, &SvmConfig::default()).unwrap().accuracy(&x, &y).unwrap();
        let b = train_svm(&neg_x, &flip_y, &SvmConfig::default())
            .unwrap()
            .accuracy(&neg_x, &flip_y)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bias_is_centered_in_the_flat_region() {
        // Scores 0.25 apart: every b in [-1.0, 0.75] minimizes the loss.
        let b = best_bias(&[0.25, 0.0], &[1.0, -1.0]).unwrap();
        assert_eq!(b, -0.125);
        // Mirrored inputs give the mirrored bias.
        assert_eq!(best_bias(&[-0.25, 0.0], &[-1.0, 1.0]).unwrap(), 0.125);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![MotorLabel::Right; 2];
        assert_eq!(train_svm(&x, &y, &SvmConfig::default()), Err(ClassifierError::SingleClass));
    }
}
