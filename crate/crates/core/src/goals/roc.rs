//! ROC curve and area under it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores at or above this value are called positive.
    pub threshold: f64,
}

/// ROC points from a sweep over the distinct scores (highest first), and the
/// trapezoidal area under them. Tied scores enter together, which gives
/// them half credit exactly as in the Mann–Whitney statistic.
pub fn roc_auc(scores: &[(f64, bool)]) -> Result<(Vec<RocPoint>, f64)> {
    let positives = scores.iter().filter(|s| s.1).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Domain(format!(
            "ROC needs both labels, got {positives} positive and {negatives} negative"
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.0.is_nan()) {
        return Err(Error::Domain(format!("score {} is not a number", bad.0)));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    // Twice the area in units of (one negative) × (one positive).
    let mut area2: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
            threshold: score,
        });
    }
    Ok((points, area2 as f64 / (2.0 * p * n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let (_, auc) = roc_auc(&[(0.9, true), (0.8, true), (0.2, false)]).unwrap();
        assert_eq!(auc, 1.0);
        let (_, auc) = roc_auc(&[(0.5, true), (0.5, false), (0.5, true)]).unwrap();
        assert_eq!(auc, 0.5);
        let (pts, auc) = roc_auc(&[(0.9, true), (0.8, false), (0.7, true), (0.6, false)]).unwrap();
        assert_eq!(auc, 0.75);
        assert_eq!(pts.first().unwrap().fpr, 0.0);
        let end = pts.last().unwrap();
        assert_eq!((end.fpr, end.tpr), (1.0, 1.0));
        assert!(roc_auc(&[(0.1, true)]).is_err());
    }
}
