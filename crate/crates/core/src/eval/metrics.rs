use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Real;

/// Population remission rate used as the default improvement baseline.
pub const DEFAULT_BASELINE: f64 = 0.415;

/// Area under the ROC curve in its Mann-Whitney form: the probability that a
/// random positive outscores a random negative, counting ties as one half.
pub fn roc_auc<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite {
            name: "scores".into(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN excluded"));
    // Twice the positive rank sum keeps tied midranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j) as u128;
        let pos_in_tie = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += twice_mid * pos_in_tie;
        i = j;
    }
    let np = n_pos as u128;
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    /// Scores at or above `threshold` are called positive.
    pub fn at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = Self::default();
        for (s, &y) in scores.iter().zip(labels) {
            match (*s >= threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn metrics(&self) -> ThresholdMetrics {
        let sensitivity = ratio(self.tp, self.tp + self.fn_);
        let ppv = ratio(self.tp, self.tp + self.fp);
        let f1 = match (ppv, sensitivity) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        ThresholdMetrics {
            sensitivity,
            specificity: ratio(self.tn, self.tn + self.fp),
            ppv,
            npv: ratio(self.tn, self.tn + self.fn_),
            f1,
        }
    }
}

/// Confusion-matrix rates; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
}

pub fn threshold_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ThresholdMetrics> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(Confusion::at_threshold(scores, labels, threshold).metrics())
}

/// Index of the largest entry; the first wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Remission among patients whose received treatment is the model's top pick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RriResult {
    pub rate: Option<f64>,
    pub n_matched: usize,
}

pub fn rri(probs: &[Vec<f64>], received: &[usize], remission: &[bool]) -> Result<RriResult> {
    if probs.is_empty() {
        return Err(Error::Domain("RRI needs at least one patient".into()));
    }
    if probs.len() != received.len() || probs.len() != remission.len() {
        return Err(Error::Shape("RRI inputs differ in length".into()));
    }
    let mut matched = 0;
    let mut remitted = 0;
    for ((p, &t), &y) in probs.iter().zip(received).zip(remission) {
        if argmax(p) == t {
            matched += 1;
            remitted += usize::from(y);
        }
    }
    Ok(RriResult {
        rate: ratio(remitted, matched),
        n_matched: matched,
    })
}

/// Absolute and relative gain of `rate` over `baseline`.
pub fn improvement(rate: f64, baseline: f64) -> Result<(f64, f64)> {
    if !baseline.is_finite() || baseline <= 0.0 {
        return Err(Error::Domain(format!(
            "baseline must be positive, got {baseline}"
        )));
    }
    let abs = rate - baseline;
    Ok((abs, abs / baseline))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_basics() {
        assert_eq!(
            roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(),
            1.0
        );
        assert_eq!(
            roc_auc(&[0.5; 4], &[false, true, true, false]).unwrap(),
            0.5
        );
        assert_eq!(roc_auc(&[0.9f32, 0.1], &[false, true]).unwrap(), 0.0);
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let m = threshold_metrics(&[0.6, 0.4], &[true, false], 0.5).unwrap();
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.ppv, Some(1.0));
        assert_eq!(m.npv, Some(1.0));
        let c = Confusion {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 4,
        }
        .metrics();
        assert_eq!(c.sensitivity, Some(0.6));
        assert_eq!(c.specificity, Some(0.8));
        assert_eq!(c.ppv, Some(0.75));
        assert!((c.npv.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let half = Confusion {
            tp: 1,
            fp: 1,
            fn_: 1,
            tn: 0,
        }
        .metrics();
        assert_eq!(half.f1, Some(0.5));
        let none = threshold_metrics(&[0.1, 0.2], &[false, false], 0.5).unwrap();
        assert_eq!(none.sensitivity, None);
        assert_eq!(none.ppv, None);
        assert_eq!(none.f1, None);
        assert_eq!(none.specificity, Some(1.0));
    }

    #[test]
    fn rri_examples() {
        let probs = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let all = rri(&probs, &[0, 1], &[true, true]).unwrap();
        assert_eq!(
            all,
            RriResult {
                rate: Some(1.0),
                n_matched: 2
            }
        );
        let none = rri(&probs, &[1, 0], &[true, true]).unwrap();
        assert_eq!(
            none,
            RriResult {
                rate: None,
                n_matched: 0
            }
        );
        let tie = rri(&[vec![0.5, 0.5]], &[0], &[false]).unwrap();
        assert_eq!(tie.n_matched, 1);
    }

    #[test]
    fn improvement_arithmetic() {
        let (a, r) = improvement(0.415, DEFAULT_BASELINE).unwrap();
        assert_eq!((a, r), (0.0, 0.0));
        assert!(improvement(0.5, 0.0).is_err());
    }
}
