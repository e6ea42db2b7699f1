use serde::{Deserialize, Serialize};

use super::{canonical_order, check_training, ClassifierError, ModelParams, TrainedModel, POSITIVE_CLASS};
use crate::dataset::MotorLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5 }
    }
}

/// Stores the training rows in canonical order.
pub fn train_knn(x: &[Vec<f64>], y: &[MotorLabel], cfg: &KnnConfig) -> Result<TrainedModel, ClassifierError> {
    let width = check_training(x, y, 1)?;
    if cfg.k == 0 {
        return Err(ClassifierError::InvalidConfig {
            name: "knn.k",
            message: "must be positive".into(),
        });
    }
    if x.len() < cfg.k {
        return Err(ClassifierError::InvalidConfig {
            name: "knn.k",
            message: format!("k = {} exceeds {} training rows", cfg.k, x.len()),
        });
    }
    let order = canonical_order(x, y);
    Ok(TrainedModel {
        positive_class: POSITIVE_CLASS,
        width,
        params: ModelParams::Knn {
            k: cfg.k,
            rows: order.iter().map(|&i| x[i].clone()).collect(),
            labels: order.iter().map(|&i| y[i]).collect(),
        },
    })
}

/// Majority vote among the k nearest rows (Euclidean). Distance ties go to
/// the lower stored index; an even split goes to `positive`.
pub(super) fn vote(k: usize, rows: &[Vec<f64>], labels: &[MotorLabel], query: &[f64], positive: MotorLabel) -> bool {
    let mut dists: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(dists.len());
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, by_dist);
    }
    let pos = dists[..k].iter().filter(|(_, i)| labels[*i] == positive).count();
    2 * pos >= k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_nn_recalls_training_points() {
        let x = vec![vec![0.0, 1.0], vec![3.0, -1.0], vec![5.0, 5.0]];
        let y = vec![MotorLabel::Right, MotorLabel::Left, MotorLabel::Left];
        let m = train_knn(&x, &y, &KnnConfig { k: 1 }).unwrap();
        assert_eq!(m.predict_all(&x).unwrap(), y);
    }

    #[test]
    fn nearest_neighbor_in_1d() {
        let x = vec![vec![0.0], vec![10.0]];
        let y = vec![MotorLabel::Right, MotorLabel::Left];
        let m = train_knn(&x, &y, &KnnConfig { k: 1 }).unwrap();
        assert_eq!(m.predict(&[1.0]).unwrap(), MotorLabel::Right);
        assert_eq!(m.predict(&[9.0]).unwrap(), MotorLabel::Left);
    }

    #[test]
    fn majority_of_five() {
        // Five nearest to 0: three Right (1,2,3) and two Left (-1,-2).
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, -1.0, -2.0, 50.0, 60.0]
            .iter()
            .map(|v| vec![*v])
            .collect();
        let y = vec![
            MotorLabel::Right,
            MotorLabel::Right,
            MotorLabel::Right,
            MotorLabel::Left,
            MotorLabel::Left,
            MotorLabel::Left,
            MotorLabel::Left,
        ];
        let m = train_knn(&x, &y, &KnnConfig { k: 5 }).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), MotorLabel::Right);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        // Query equidistant from both points: the canonically first row wins.
        let x = vec![vec![1.0], vec![-1.0]];
        let y = vec![MotorLabel::Right, MotorLabel::Left];
        let m = train_knn(&x, &y, &KnnConfig { k: 1 }).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), MotorLabel::Left);
    }

    #[test]
    fn k_larger_than_n_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![MotorLabel::Right, MotorLabel::Left];
        assert!(train_knn(&x, &y, &KnnConfig { k: 3 }).is_err());
    }
}
