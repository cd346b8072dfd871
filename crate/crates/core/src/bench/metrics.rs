use serde::{Deserialize, Serialize};

use crate::dataset::FAILURE;
use crate::{Error, Result};

/// F1 reported for the untreated forest on the original private dataset,
/// kept for annotating reports.
pub const BASELINE_REFERENCE_F1: f64 = 0.7659;

/// Confusion counts with failure as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn confusion(truth: &[u8], predicted: &[u8]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(Error::WidthMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let mut c = Confusion::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        if t > 1 || p > 1 {
            return Err(Error::InvalidData("labels must be 0 or 1".into()));
        }
        match (t == FAILURE, p == FAILURE) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2tp / (2tp + fp + fn)`, 0 when nothing is positive.
pub fn f1_score(tp: u64, fp: u64, fn_: u64) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.tp, self.fp, self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

/// Sample mean and standard deviation (n - 1); the deviation is 0 below two
/// samples.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let shift = xs[0];
    let mean = shift + xs.iter().map(|x| x - shift).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample variance over mean; 0 for a zero mean.
pub fn variance_to_mean(xs: &[f64]) -> f64 {
    let (mean, std) = mean_std(xs);
    if mean == 0.0 || mean.is_nan() {
        0.0
    } else {
        std * std / mean
    }
}

/// Relative change of `mean` over `baseline` in percent.
pub fn pct_improvement(mean: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (mean - baseline) / baseline
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_cases() {
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));
        let c = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (2, 0, 0, 1));
        let c = confusion(&[1, 0, 1], &[0, 0, 0]).unwrap();
        assert_eq!((c.tp, c.fp), (0, 0));
        assert!(confusion(&[1], &[]).is_err());
    }

    #[test]
    fn f1_values() {
        assert_eq!(f1_score(8, 2, 4), 16.0 / 22.0);
        assert_eq!(f1_score(0, 0, 0), 0.0);
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(variance_to_mean(&[0.7; 10]), 0.0);
        assert_eq!(pct_improvement(0.8, 0.8), 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
