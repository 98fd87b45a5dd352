//! Confusion-matrix metrics and rank-based ROC-AUC.
//!
//! Aggregate precision/recall/F1 are support-weighted, which makes the
//! weighted recall algebraically equal to accuracy.

use serde::Serialize;

use crate::corpus::Scheme;
use crate::error::{Error, Result};

/// Label-by-label contingency counts with one-vs-rest views.
#[derive(Debug, Clone, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<u8>,
    /// counts[true_index][pred_index]
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_pairs(y_true: &[u8], y_pred: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
        if y_true.len() != y_pred.len() {
            return Err(Error::Validation("label lists differ in length".into()));
        }
        if y_true.is_empty() {
            return Err(Error::Validation(
                "cannot score an empty prediction set".into(),
            ));
        }
        let index = |l: u8| -> Result<usize> {
            labels
                .iter()
                .position(|&x| x == l)
                .ok_or_else(|| Error::Validation(format!("label {l} outside scheme")))
        };
        let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            counts[index(t)?][index(p)?] += 1;
        }
        Ok(ConfusionMatrix {
            labels: labels.to_vec(),
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// (TP, FP, FN, TN) for one label's one-vs-rest view.
    pub fn one_vs_rest(&self, label_index: usize) -> (usize, usize, usize, usize) {
        let total = self.total();
        let tp = self.counts[label_index][label_index];
        let fp = (0..self.labels.len())
            .filter(|&t| t != label_index)
            .map(|t| self.counts[t][label_index])
            .sum();
        let fn_ = (0..self.labels.len())
            .filter(|&p| p != label_index)
            .map(|p| self.counts[label_index][p])
            .sum();
        let tn = total - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }
}

/// Per-class one-vs-rest metrics.
#[derive(Debug, Clone, Serialize)]
pub struct ClassMetrics {
    pub label: u8,
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metrics for one evaluated prediction set (one fold).
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub fold: usize,
    pub accuracy: f64,
    /// Support-weighted averages.
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Present only for the two-class scheme.
    pub roc_auc: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn metric(&self, name: MetricName) -> Option<f64> {
        match name {
            MetricName::Accuracy => Some(self.accuracy),
            MetricName::Precision => Some(self.precision),
            MetricName::Recall => Some(self.recall),
            MetricName::FMeasure => Some(self.f_measure),
            MetricName::RocAuc => self.roc_auc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    Precision,
    Recall,
    FMeasure,
    RocAuc,
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<MetricName> {
        match s {
            "accuracy" => Ok(MetricName::Accuracy),
            "precision" => Ok(MetricName::Precision),
            "recall" => Ok(MetricName::Recall),
            "f_measure" | "f1" => Ok(MetricName::FMeasure),
            "roc_auc" => Ok(MetricName::RocAuc),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Accuracy, support-weighted precision/recall/F1, and the per-class
/// breakdown. A class that was never predicted gets precision 0.
pub fn compute_metrics(y_true: &[u8], y_pred: &[u8], scheme: Scheme) -> Result<MetricsReport> {
    let matrix = ConfusionMatrix::from_pairs(y_true, y_pred, scheme.labels())?;
    let total = matrix.total();
    let correct: usize = (0..matrix.labels.len()).map(|i| matrix.counts[i][i]).sum();
    let accuracy = correct as f64 / total as f64;

    let mut per_class = Vec::with_capacity(matrix.labels.len());
    let (mut w_precision, mut w_f1) = (0.0, 0.0);
    for (i, &label) in matrix.labels.iter().enumerate() {
        let (tp, fp, fn_, tn) = matrix.one_vs_rest(i);
        let support = tp + fn_;
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let weight = support as f64 / total as f64;
        w_precision += weight * precision;
        w_f1 += weight * f1;
        per_class.push(ClassMetrics {
            label,
            support,
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        });
    }

    // Support-weighted recall reduces algebraically to accuracy:
    // sum_c (support_c / N) * (TP_c / support_c) = sum_c TP_c / N.
    // Evaluating the reduced form keeps the identity exact in fp.
    let w_recall = accuracy;

    Ok(MetricsReport {
        fold: 0,
        accuracy,
        precision: w_precision,
        recall: w_recall,
        f_measure: w_f1,
        roc_auc: None,
        per_class,
    })
}

/// Rank-based ROC-AUC: the probability a random positive (label 1) outscores
/// a random negative, ties counting one half. Midranks make this exactly the
/// all-pairs count.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::Validation("labels/scores differ in length".into()));
    }
    let positives = y_true.iter().filter(|&&l| l == 1).count();
    let negatives = y_true.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Validation(
            "ROC-AUC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Midranks over tied score runs.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if y_true[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos = positives as f64;
    let n_neg = negatives as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example_weighted_metrics() {
        let y_true = [1u8, 1, 2, 2];
        let y_pred = [1u8, 2, 2, 2];
        let m = compute_metrics(&y_true, &y_pred, Scheme::TwoClass).unwrap();
        assert!((m.accuracy - 0.75).abs() < 1e-12);
        assert!((m.precision - 0.8333).abs() < 1e-4);
        assert!((m.recall - 0.75).abs() < 1e-4);
        assert!((m.f_measure - 0.7333).abs() < 1e-4);
    }

    #[test]
    fn perfect_predictions() {
        let y = [1u8, 2, 3, 4];
        let m = compute_metrics(&y, &y, Scheme::FourClass).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f_measure, 1.0);
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let y_true = [1u8, 2, 2];
        let y_pred = [2u8, 2, 2];
        let m = compute_metrics(&y_true, &y_pred, Scheme::TwoClass).unwrap();
        let class1 = &m.per_class[0];
        assert_eq!(class1.label, 1);
        assert_eq!(class1.precision, 0.0);
        assert!(m.precision.is_finite());
    }

    #[test]
    fn weighted_recall_equals_accuracy() {
        let y_true = [1u8, 1, 2, 3, 4, 4, 2, 1];
        let y_pred = [1u8, 2, 2, 3, 1, 4, 4, 1];
        let m = compute_metrics(&y_true, &y_pred, Scheme::FourClass).unwrap();
        assert_eq!(m.recall.to_bits(), m.accuracy.to_bits());
    }

    #[test]
    fn mismatched_or_empty_inputs_error() {
        assert!(compute_metrics(&[1, 2], &[1], Scheme::TwoClass).is_err());
        assert!(compute_metrics(&[], &[], Scheme::TwoClass).is_err());
    }

    #[test]
    fn auc_perfect_ranking() {
        let y = [1u8, 1, 2, 2];
        let s = [0.9, 0.8, 0.4, 0.3];
        assert!((roc_auc(&y, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_hand_pair_count() {
        let y = [1u8, 2, 1, 2];
        let s = [0.9, 0.8, 0.3, 0.2];
        assert!((roc_auc(&y, &s).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let y = [1u8, 2, 1, 2];
        let s = [0.5, 0.5, 0.5, 0.5];
        assert!((roc_auc(&y, &s).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_single_class_errors() {
        assert!(roc_auc(&[1, 1], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let y = [1u8, 2, 1, 2, 1, 2];
        let s = [0.9, 0.7, 0.65, 0.3, 0.2, 0.1];
        let base = roc_auc(&y, &s).unwrap();
        let transformed: Vec<f64> = s.iter().map(|&v| (5.0 * v).exp() + 3.0).collect();
        assert!((roc_auc(&y, &transformed).unwrap() - base).abs() < 1e-12);
    }
}
