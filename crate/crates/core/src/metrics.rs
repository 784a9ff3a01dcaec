//! Prediction metrics: MAE, per-series F1 from confusion counts, pooled
//! precision/recall and rank-statistic ROC-AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tn: f64,
}

impl ConfusionCounts {
    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `tp / (tp + (fp + fn) / 2)`; 1.0 when there is nothing to find and nothing was predicted.
    pub fn f1(&self) -> f64 {
        let denom = self.tp + 0.5 * (self.fp + self.fn_);
        if denom == 0.0 {
            1.0
        } else {
            self.tp / denom
        }
    }

    /// `None` when nothing was predicted ON.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0.0).then(|| self.tp / d)
    }

    /// `None` when the truth has no ON samples.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0.0).then(|| self.tp / d)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::input(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// `scale * mean |pred - truth|`.
pub fn mae<T: Scalar>(pred: &[T], truth: &[T], scale_watts: T) -> Result<T> {
    check_len(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::input("MAE of empty vectors"));
    }
    let s: T = pred.iter().zip(truth).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(scale_watts * s / T::from_usize_lossy(pred.len()))
}

/// ON iff the probability reaches 0.5.
pub fn predicted_status<T: Scalar>(prob: &[T]) -> Vec<u8> {
    let half = T::lit(0.5);
    prob.iter().map(|&p| u8::from(p >= half)).collect()
}

/// Product-form confusion counts; inputs may be soft values in `[0, 1]`.
pub fn confusion_soft<T: Scalar>(pred: &[T], truth: &[T]) -> Result<ConfusionCounts> {
    check_len(pred.len(), truth.len())?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in pred.iter().zip(truth) {
        let (s, y) = (s.as_f64(), y.as_f64());
        c.tp += s * y;
        c.fp += s * (1.0 - y);
        c.fn_ += (1.0 - s) * y;
        c.tn += (1.0 - s) * (1.0 - y);
    }
    Ok(c)
}

pub fn confusion(pred_status: &[u8], truth_status: &[u8]) -> Result<ConfusionCounts> {
    check_len(pred_status.len(), truth_status.len())?;
    let as_f = |v: &[u8]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    confusion_soft(&as_f(pred_status), &as_f(truth_status))
}

/// Mean over series of each series' F1.
pub fn f1_per_series(series: &[ConfusionCounts]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::input("F1 over an empty list of series"));
    }
    Ok(series.iter().map(ConfusionCounts::f1).sum::<f64>() / series.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney rank statistic (ties count 1/2).
pub fn roc_auc<T: Scalar>(scores: &[T], truth: &[u8]) -> Result<f64> {
    check_len(scores.len(), truth.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::input("non-finite score"));
    }
    let n_pos = truth.iter().filter(|&&y| y == 1).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC-AUC needs both classes in the truth".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));
    // sum of (1-based, tie-averaged) ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = idx[i..=j].iter().filter(|&&k| truth[k] == 1).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0], 2000.0).unwrap(), 0.0);
        assert_eq!(mae(&[0.5], &[0.25], 2000.0).unwrap(), 500.0);
        assert!(mae(&[0.5], &[0.25, 1.0], 1.0).is_err());
    }

    #[test]
    fn status_rule() {
        assert_eq!(predicted_status(&[0.49, 0.5, 0.51]), vec![0, 1, 1]);
        assert_eq!(predicted_status(&[0.0, 0.0]), vec![0, 0]);
        assert_eq!(predicted_status(&[1.0]), vec![1]);
    }

    #[test]
    fn confusion_cases() {
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1.0, 1.0, 1.0, 1.0));
        let c = confusion(&[1; 4], &[1; 4]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (4.0, 0.0, 0.0, 0.0));
        let c = confusion(&[0; 3], &[1; 3]).unwrap();
        assert_eq!(c.fn_, 3.0);
    }

    #[test]
    fn f1_cases() {
        let c = ConfusionCounts {
            tp: 2.0,
            fp: 1.0,
            fn_: 1.0,
            tn: 0.0,
        };
        assert!((f1_per_series(&[c]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let perfect = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!(f1_per_series(&[perfect]).unwrap(), 1.0);
        let half = ConfusionCounts {
            tp: 1.0,
            fp: 2.0,
            fn_: 0.0,
            tn: 0.0,
        };
        assert_eq!(f1_per_series(&[perfect, half]).unwrap(), 0.75);
        let negatives = confusion(&[0, 0], &[0, 0]).unwrap();
        assert_eq!(negatives.f1(), 1.0);
        assert!(f1_per_series(&[]).is_err());
    }

    #[test]
    fn precision_recall() {
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 1, 1]).unwrap();
        assert_eq!(c.precision(), Some(0.5));
        assert_eq!(c.recall(), Some(1.0 / 3.0));
        let none = confusion(&[0, 0], &[0, 0]).unwrap();
        assert_eq!((none.precision(), none.recall()), (None, None));
    }

    #[test]
    fn auc_cases() {
        assert_eq!(
            roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(),
            0.75
        );
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
    }
}
