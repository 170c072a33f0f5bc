//! Support recovery scoring: thresholded support, confusion counts, precision/recall/F1.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `|θ̂ᵢ| > τ` per component.
pub fn classify_sparsity<S: Scalar>(theta_hat: &[S], tau: S) -> Vec<bool> {
    theta_hat.iter().map(|v| v.abs() > tau).collect()
}

/// Support of the true parameter vector (exact nonzeros).
pub fn true_support<S: Scalar>(theta: &[S]) -> Vec<bool> {
    theta.iter().map(|v| *v != S::zero()).collect()
}

/// Counts with "nonzero" as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn predicted_positive(&self) -> usize {
        self.tp + self.fp
    }

    pub fn scores(&self) -> RecoveryScores {
        precision_recall_f1(self.tp, self.fp, self.fn_)
    }
}

pub fn confusion_counts(predicted: &[bool], actual: &[bool]) -> Result<ConfusionCounts> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            what: "support masks",
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        match (p, a) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Precision and recall are `None` when their denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryScores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: f64,
}

pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> RecoveryScores {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p > 0.0 && r > 0.0 => 2.0 * p * r / (p + r),
        _ => 0.0,
    };
    RecoveryScores { precision, recall, f1 }
}

/// Formats an optional score the way the report tables do (`--` when undefined).
pub fn format_score(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |x| format!("{x:.2}"))
}
