//! Evaluation metrics: mean absolute error for regression and mean
//! average precision for multilabel ranking.
//!
//! AP ranks graphs per label by descending score, breaking ties by
//! original index so results never depend on sort internals. Labels
//! with no positive example cannot be ranked and are skipped — the
//! report records which — and a task where every label is empty is an
//! error rather than a silent zero.

use crate::linalg::DMat;

/// Why a metric could not be computed.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("predictions are {lhs:?} but targets are {rhs:?}")]
    ShapeMismatch { lhs: (usize, usize), rhs: (usize, usize) },
    #[error("score at graph {row}, label {col} is not finite")]
    NonFiniteScore { row: usize, col: usize },
    #[error("label at graph {row}, label {col} is {value}, expected 0 or 1")]
    NonBinaryLabel { row: usize, col: usize, value: f64 },
    #[error("every label column is empty of positives")]
    NoPositives,
}

/// Per-label average precision with skipped columns recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    /// Mean over the labels that had at least one positive.
    pub mean: f64,
    /// One entry per label; `None` where the label was skipped.
    pub per_label: Vec<Option<f64>>,
}

impl ApReport {
    /// Indices of labels that had no positive example.
    pub fn skipped(&self) -> Vec<usize> {
        self.per_label
            .iter()
            .enumerate()
            .filter_map(|(i, ap)| ap.is_none().then_some(i))
            .collect()
    }
}

/// Mean absolute error over all entries of two equal-shaped matrices.
pub fn mae(pred: &DMat, target: &DMat) -> Result<f64, MetricError> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(MetricError::ShapeMismatch {
            lhs: (pred.rows(), pred.cols()),
            rhs: (target.rows(), target.cols()),
        });
    }
    let n = pred.numel();
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / n as f64)
}

/// Mean average precision of `scores` (graphs × labels, logits or any
/// monotone transform) against binary `labels` of the same shape.
pub fn metric_ap(scores: &DMat, labels: &DMat) -> Result<ApReport, MetricError> {
    if scores.rows() != labels.rows() || scores.cols() != labels.cols() {
        return Err(MetricError::ShapeMismatch {
            lhs: (scores.rows(), scores.cols()),
            rhs: (labels.rows(), labels.cols()),
        });
    }
    for row in 0..labels.rows() {
        for col in 0..labels.cols() {
            if !scores[(row, col)].is_finite() {
                return Err(MetricError::NonFiniteScore { row, col });
            }
            let value = labels[(row, col)];
            if value != 0.0 && value != 1.0 {
                return Err(MetricError::NonBinaryLabel { row, col, value });
            }
        }
    }

    let graphs = scores.rows();
    let mut per_label = Vec::with_capacity(scores.cols());
    for col in 0..scores.cols() {
        let positives = (0..graphs).filter(|&i| labels[(i, col)] == 1.0).count();
        if positives == 0 {
            per_label.push(None);
            continue;
        }
        let mut order: Vec<usize> = (0..graphs).collect();
        // Descending score; stable, so equal scores keep index order.
        order.sort_by(|&a, &b| {
            scores[(b, col)].partial_cmp(&scores[(a, col)]).expect("finite scores")
        });
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (rank, &i) in order.iter().enumerate() {
            if labels[(i, col)] == 1.0 {
                hits += 1;
                sum += hits as f64 / (rank + 1) as f64;
            }
        }
        per_label.push(Some(sum / positives as f64));
    }

    let kept: Vec<f64> = per_label.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(MetricError::NoPositives);
    }
    Ok(ApReport { mean: kept.iter().sum::<f64>() / kept.len() as f64, per_label })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn column(values: &[f64]) -> DMat {
        DMat::from_vec(values.len(), 1, values.to_vec())
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let scores = column(&[0.9, 0.5, 0.1, -0.3]);
        let labels = column(&[1.0, 1.0, 0.0, 0.0]);
        let report = metric_ap(&scores, &labels).unwrap();
        assert_eq!(report.mean, 1.0);
        assert_eq!(report.per_label, vec![Some(1.0)]);
    }

    #[test]
    fn one_miss_among_two_positives() {
        let scores = column(&[0.9, 0.8, 0.7]);
        let labels = column(&[0.0, 1.0, 1.0]);
        let report = metric_ap(&scores, &labels).unwrap();
        assert_eq!(report.mean, (1.0 / 2.0 + 2.0 / 3.0) / 2.0);
    }

    #[test]
    fn single_positive_ranked_last_scores_reciprocal_n() {
        for n in [1usize, 2, 5, 17] {
            let scores: Vec<f64> = (0..n).map(|i| -(i as f64)).collect();
            let mut labels = vec![0.0; n];
            labels[n - 1] = 1.0;
            let report = metric_ap(&column(&scores), &column(&labels)).unwrap();
            assert_eq!(report.mean, 1.0 / n as f64);
        }
    }

    #[test]
    fn empty_labels_are_skipped_and_recorded() {
        let scores = DMat::from_vec(3, 2, vec![0.9, 0.1, 0.8, 0.2, 0.7, 0.3]);
        let labels = DMat::from_vec(3, 2, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let report = metric_ap(&scores, &labels).unwrap();
        assert_eq!(report.skipped(), vec![1]);
        assert_eq!(report.per_label[1], None);
        // Positives at ranks 1 and 3 → (1/1 + 2/3) / 2.
        assert_eq!(report.mean, (1.0 + 2.0 / 3.0) / 2.0);
    }

    #[test]
    fn all_empty_labels_error() {
        let scores = column(&[0.5, 0.4]);
        let labels = column(&[0.0, 0.0]);
        assert_eq!(metric_ap(&scores, &labels), Err(MetricError::NoPositives));
    }

    #[test]
    fn ties_resolve_by_original_index() {
        // Equal scores everywhere: ranking must be index order, so the
        // positive at index 0 ranks first and the one at index 2 third.
        let scores = column(&[0.5, 0.5, 0.5, 0.5]);
        let labels = column(&[1.0, 0.0, 1.0, 0.0]);
        let report = metric_ap(&scores, &labels).unwrap();
        assert_eq!(report.mean, (1.0 / 1.0 + 2.0 / 3.0) / 2.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let scores = column(&[0.5, f64::NAN]);
        let labels = column(&[1.0, 0.0]);
        assert_eq!(
            metric_ap(&scores, &labels),
            Err(MetricError::NonFiniteScore { row: 1, col: 0 })
        );

        let scores = column(&[0.5, 0.4]);
        let labels = column(&[1.0, 0.3]);
        assert_eq!(
            metric_ap(&scores, &labels),
            Err(MetricError::NonBinaryLabel { row: 1, col: 0, value: 0.3 })
        );

        let labels = column(&[1.0]);
        assert!(matches!(
            metric_ap(&scores, &labels),
            Err(MetricError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn mae_averages_absolute_differences() {
        let pred = DMat::from_vec(1, 2, vec![1.0, 3.0]);
        let target = DMat::zeros(1, 2);
        assert_eq!(mae(&pred, &target).unwrap(), 2.0);
        assert_eq!(mae(&target, &target).unwrap(), 0.0);
        assert!(mae(&pred, &DMat::zeros(2, 1)).is_err());
    }

    /// Independent AP: rank by repeated max-extraction (lowest index on
    /// ties), then score each prefix by rescanning it.
    fn ap_prefix_oracle(scores: &[f64], labels: &[f64]) -> Option<f64> {
        let n = scores.len();
        let mut remaining: Vec<usize> = (0..n).collect();
        let mut order = Vec::with_capacity(n);
        while !remaining.is_empty() {
            let best = *remaining
                .iter()
                .max_by(|&&a, &&b| {
                    scores[a]
                        .partial_cmp(&scores[b])
                        .unwrap()
                        .then(b.cmp(&a))
                })
                .unwrap();
            order.push(best);
            remaining.retain(|&i| i != best);
        }
        let npos = labels.iter().filter(|&&l| l == 1.0).count();
        if npos == 0 {
            return None;
        }
        let mut sum = 0.0;
        for k in 1..=n {
            if labels[order[k - 1]] == 1.0 {
                let in_prefix =
                    order[..k].iter().filter(|&&i| labels[i] == 1.0).count();
                sum += in_prefix as f64 / k as f64;
            }
        }
        Some(sum / npos as f64)
    }

    #[test]
    fn ap_matches_prefix_enumeration_oracle_exactly() {
        let mut rng = crate::rng::stream(5, "metrics-test");
        for case in 0..200 {
            let graphs = rng.random_range(1..12);
            let labels_n = rng.random_range(1..4);
            let mut scores = DMat::zeros(graphs, labels_n);
            let mut labels = DMat::zeros(graphs, labels_n);
            for i in 0..graphs {
                for j in 0..labels_n {
                    // Coarse grid keeps ties frequent.
                    scores[(i, j)] = rng.random_range(0..5) as f64 / 4.0;
                    labels[(i, j)] = f64::from(rng.random_range(0..2));
                }
            }

            let mut oracle = Vec::new();
            for j in 0..labels_n {
                let s: Vec<f64> = (0..graphs).map(|i| scores[(i, j)]).collect();
                let l: Vec<f64> = (0..graphs).map(|i| labels[(i, j)]).collect();
                oracle.push(ap_prefix_oracle(&s, &l));
            }

            match metric_ap(&scores, &labels) {
                Ok(report) => {
                    assert_eq!(report.per_label, oracle, "case {case}");
                    let kept: Vec<f64> = oracle.iter().flatten().copied().collect();
                    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
                    assert_eq!(report.mean, mean, "case {case}");
                }
                Err(MetricError::NoPositives) => {
                    assert!(oracle.iter().all(Option::is_none), "case {case}");
                }
                Err(e) => panic!("case {case}: {e}"),
            }
        }
    }
}
