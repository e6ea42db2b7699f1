//! AdaBoost.M1 over axis-aligned decision stumps.

use serde::{Deserialize, Serialize};

use super::{canonical_order, check_training, sign_of, ClassifierError, ModelParams, TrainedModel, POSITIVE_CLASS};
use crate::dataset::MotorLabel;

/// Weight given to a stump with zero weighted error: ½·ln(1e10).
pub const MAX_ALPHA: f64 = 11.512_925_464_970_229;
const ZERO_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostingConfig {
    pub rounds: usize,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        BoostingConfig { rounds: 50 }
    }
}

/// Predicts `polarity` when `x[feature] > threshold`, else `-polarity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let p = self.polarity as f64;
        if row[self.feature] > self.threshold {
            p
        } else {
            -p
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedStump {
    pub stump: Stump,
    pub alpha: f64,
}

pub(super) fn score(stumps: &[WeightedStump], row: &[f64]) -> f64 {
    stumps.iter().map(|s| s.alpha * s.stump.predict(row)).sum()
}

/// Lowest weighted-error stump over every feature, midpoint threshold and
/// polarity. Ties keep the lower feature, then the lower threshold, then
/// polarity +1.
fn best_stump(x: &[Vec<f64>], signs: &[f64], weights: &[f64], sorted: &[Vec<usize>]) -> Option<(Stump, f64)> {
    let total_pos: f64 = weights.iter().zip(signs).filter(|(_, s)| **s > 0.0).map(|(w, _)| w).sum();
    let total_neg: f64 = weights.iter().zip(signs).filter(|(_, s)| **s < 0.0).map(|(w, _)| w).sum();
    let mut best: Option<(Stump, f64)> = None;
    for (feature, order) in sorted.iter().enumerate() {
        let (mut left_pos, mut left_neg) = (0.0, 0.0);
        for j in 0..order.len() - 1 {
            let i = order[j];
            if signs[i] > 0.0 {
                left_pos += weights[i];
            } else {
                left_neg += weights[i];
            }
            let (v, next) = (x[i][feature], x[order[j + 1]][feature]);
            if v == next {
                continue;
            }
            let threshold = 0.5 * (v + next);
            let err_up = left_pos + (total_neg - left_neg);
            let err_down = left_neg + (total_pos - left_pos);
            for (polarity, err) in [(1i8, err_up), (-1i8, err_down)] {
                if best.is_none_or(|(_, e)| err < e) {
                    best = Some((
                        Stump {
                            feature,
                            threshold,
                            polarity,
                        },
                        err,
                    ));
                }
            }
        }
    }
    best
}

fn fit(
    x: &[Vec<f64>],
    y: &[MotorLabel],
    cfg: &BoostingConfig,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<TrainedModel, ClassifierError> {
    let width = check_training(x, y, 1)?;
    if cfg.rounds == 0 {
        return Err(ClassifierError::InvalidConfig {
            name: "boosting.rounds",
            message: "must be positive".into(),
        });
    }
    let order = canonical_order(x, y);
    let x: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let signs: Vec<f64> = order.iter().map(|&i| sign_of(y[i])).collect();
    let n = x.len();
    let sorted: Vec<Vec<usize>> = (0..width)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut weights = vec![1.0 / n as f64; n];
    if let Some(t) = trace.as_deref_mut() {
        t.push(weights.clone());
    }
    let mut stumps = Vec::new();
    for _ in 0..cfg.rounds {
        let Some((stump, err)) = best_stump(&x, &signs, &weights, &sorted) else {
            break;
        };
        if err >= 0.5 {
            break;
        }
        if err <= ZERO_ERROR {
            stumps.push(WeightedStump { stump, alpha: MAX_ALPHA });
            break;
        }
        let alpha = 0.5 * ((1.0 - err) / err).ln();
        for (i, w) in weights.iter_mut().enumerate() {
            *w *= (-alpha * signs[i] * stump.predict(&x[i])).exp();
        }
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= z);
        if let Some(t) = trace.as_deref_mut() {
            t.push(weights.clone());
        }
        stumps.push(WeightedStump { stump, alpha });
    }
    Ok(TrainedModel {
        positive_class: POSITIVE_CLASS,
        width,
        params: ModelParams::Boosting { stumps },
    })
}

pub fn train_adaboost(x: &[Vec<f64>], y: &[MotorLabel], cfg: &BoostingConfig) -> Result<TrainedModel, ClassifierError> {
    fit(x, y, cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stumps(m: &TrainedModel) -> &[WeightedStump] {
        match &m.params {
            ModelParams::Boosting { stumps } => stumps,
            _ => unreachable!(),
        }
    }

    #[test]
    fn separable_data_stops_after_one_round() {
        let x: Vec<Vec<f64>> = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0].iter().map(|v| vec![*v]).collect();
        let y = vec![
            MotorLabel::Left,
            MotorLabel::Left,
            MotorLabel::Left,
            MotorLabel::Right,
            MotorLabel::Right,
            MotorLabel::Right,
        ];
        let m = train_adaboost(&x, &y, &BoostingConfig::default()).unwrap();
        let s = stumps(&m);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].alpha, MAX_ALPHA);
        assert_eq!(s[0].stump.threshold, 0.0);
        assert_eq!(m.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn max_alpha_is_half_log_1e10() {
        assert!((MAX_ALPHA - 0.5 * 1e10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn first_round_reweighting_by_hand() {
        // Labels -,-,+,- at x = 1..4. Best stump: x > 2.5 -> +, error 1/4
        // (x = 4). alpha = ln(3)/2, new weights 1/6,1/6,1/6,1/2.
        let x: Vec<Vec<f64>> = (1..=4).map(|v| vec![v as f64]).collect();
        let y = vec![MotorLabel::Left, MotorLabel::Left, MotorLabel::Right, MotorLabel::Left];
        let mut trace = Vec::new();
        let m = fit(&x, &y, &BoostingConfig { rounds: 1 }, Some(&mut trace)).unwrap();
        let s = stumps(&m)[0];
        assert_eq!(
            s.stump,
            Stump {
                feature: 0,
                threshold: 2.5,
                polarity: 1
            }
        );
        assert!((s.alpha - 0.5 * 3f64.ln()).abs() < 1e-12);

        // Hand computation of D2(i) = D1(i)·exp(-alpha·y_i·h(x_i)) / Z.
        let d1 = 0.25;
        let correct = d1 * (-s.alpha).exp();
        let wrong = d1 * s.alpha.exp();
        let z = 3.0 * correct + wrong;
        let expected = [correct / z, correct / z, correct / z, wrong / z];
        for (got, want) in trace[1].iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in trace[1].iter().zip([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn stops_when_no_stump_beats_chance() {
        // XOR-like labels on identical values: no informative split.
        let x = vec![vec![1.0], vec![1.0], vec![2.0], vec![2.0]];
        let y = vec![MotorLabel::Left, MotorLabel::Right, MotorLabel::Left, MotorLabel::Right];
        let m = train_adaboost(&x, &y, &BoostingConfig::default()).unwrap();
        assert!(stumps(&m).is_empty());
        // Empty ensemble scores 0, which resolves to the positive class.
        assert_eq!(m.predict(&[1.5]).unwrap(), MotorLabel::Right);
    }
}
