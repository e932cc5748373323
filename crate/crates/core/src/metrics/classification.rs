use serde::{Deserialize, Serialize};

use super::MetricError;

/// Confusion counts. "Positive" means the IR result is accurate enough to reuse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when precision, recall or F1 had a zero denominator and was
    /// reported as 0.
    pub degenerate: bool,
}

/// Standard accuracy / precision / recall / F1.
///
/// Accuracy is `(TP+TN)/total` and F1 is `2·P·R/(P+R)`.
pub fn classification_metrics(c: Confusion) -> Result<ClassificationMetrics, MetricError> {
    let total = c.total();
    if total == 0 {
        return Err(MetricError::ZeroCounts);
    }
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    let precision = ratio(c.tp as f64, (c.tp + c.fp) as f64);
    let recall = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    if degenerate {
        log::warn!("degenerate classification counts {c:?}: undefined ratios reported as 0");
    }
    Ok(ClassificationMetrics {
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        precision,
        recall,
        f1,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, fp: u64, tn: u64, fn_: u64) -> Result<ClassificationMetrics, MetricError> {
        classification_metrics(Confusion { tp, fp, tn, fn_ })
    }

    #[test]
    fn fixture() {
        let m = cm(3, 1, 5, 1).unwrap();
        assert!((m.accuracy - 0.8).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.75).abs() < 1e-12);
        assert!((m.f1 - 0.75).abs() < 1e-12);
        assert!(!m.degenerate);
    }

    #[test]
    fn perfect() {
        let m = cm(4, 0, 6, 0).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn no_positive_predictions() {
        let m = cm(0, 0, 5, 2).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.degenerate);
    }

    #[test]
    fn all_zero() {
        assert_eq!(cm(0, 0, 0, 0), Err(MetricError::ZeroCounts));
    }

    #[test]
    fn record() {
        let mut c = Confusion::default();
        c.record(true, true);
        c.record(true, false);
        c.record(false, false);
        c.record(false, true);
        assert_eq!(c, Confusion { tp: 1, fp: 1, tn: 1, fn_: 1 });
    }
}
