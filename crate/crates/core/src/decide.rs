//! Post-processing: turning a trained model's probabilities into labels.
//!
//! A [`DecisionRule`] composes, in order, optional per-tree vote weights
//! (applied inside the model call), a monotone calibrator, an optional
//! class reweighting and a threshold.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FAILURE};
use crate::forest::ForestModel;
use crate::{Error, Result};

pub const PROB_CLIP: f64 = 1e-6;
pub const VOTE_FLOOR: f64 = 1e-3;
const PLATT_MAX_ITER: usize = 100;
const PLATT_TOL: f64 = 1e-8;

/// Monotone map from raw to calibrated P(failure).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibrator {
    #[default]
    Identity,
    /// `sigmoid(a * logit(p) + b)`.
    Platt { a: f64, b: f64 },
    /// Left-continuous step function: `(upper_x, value)` pairs sorted by
    /// `upper_x`; `p` maps to the value of the first pair with
    /// `p <= upper_x`, or the last value beyond the final breakpoint.
    Isotonic { breakpoints: Vec<(f64, f64)> },
}

impl Calibrator {
    pub fn apply(&self, p: f64) -> f64 {
        match self {
            Calibrator::Identity => p,
            Calibrator::Platt { a, b } => sigmoid(a * logit(p) + b),
            Calibrator::Isotonic { breakpoints } => {
                let at = breakpoints.partition_point(|&(x, _)| x < p);
                breakpoints
                    .get(at)
                    .or(breakpoints.last())
                    .map_or(p, |&(_, v)| v)
            }
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    (p / (1.0 - p)).ln()
}

/// Misclassification costs: `false_alarm` for a false positive, `missed`
/// for a false negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub false_alarm: f64,
    pub missed: f64,
}

impl CostSpec {
    pub fn new(false_alarm: f64, missed: f64) -> Result<Self> {
        if !(false_alarm > 0.0 && missed > 0.0) || false_alarm.is_nan() || missed.is_nan() {
            return Err(Error::Config("costs must be positive".into()));
        }
        Ok(Self {
            false_alarm,
            missed,
        })
    }

    /// `(1, n_normal / n_failure)` from a training fold.
    pub fn inverse_frequency(train: &Dataset) -> Result<Self> {
        let (n0, n1) = train.class_counts();
        if n0 == 0 || n1 == 0 {
            return Err(Error::SingleClass);
        }
        Self::new(1.0, n0 as f64 / n1 as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub calibrator: Calibrator,
    /// `(w_normal, w_failure)`.
    pub reweight: Option<(f64, f64)>,
    pub threshold: f64,
    pub vote_weights: Option<Vec<f64>>,
}

impl Default for DecisionRule {
    fn default() -> Self {
        Self {
            calibrator: Calibrator::Identity,
            reweight: None,
            threshold: 0.5,
            vote_weights: None,
        }
    }
}

impl DecisionRule {
    pub fn with_threshold(threshold: f64) -> Result<Self> {
        let rule = Self {
            threshold,
            ..Self::default()
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if let Some((w0, w1)) = self.reweight {
            if !(w0 > 0.0 && w1 > 0.0 && w0.is_finite() && w1.is_finite()) {
                return Err(Error::Config("reweight weights must be positive".into()));
            }
        }
        if let Some(w) = &self.vote_weights {
            let total: f64 = w.iter().sum();
            if w.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(
                    "vote weights must be non-negative and sum to 1".into(),
                ));
            }
        }
        if let Calibrator::Platt { a, b } = self.calibrator {
            if !(a > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::Config("platt slope must be positive".into()));
            }
        }
        if let Calibrator::Isotonic { breakpoints } = &self.calibrator {
            let sorted = breakpoints
                .windows(2)
                .all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
            if breakpoints.is_empty() || !sorted {
                return Err(Error::Config(
                    "isotonic map must be non-empty and non-decreasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// Calibrated and reweighted score compared against the threshold.
    pub fn score(&self, p: f64) -> f64 {
        let p = self.calibrator.apply(p);
        match self.reweight {
            Some(w) => reweight_probs(p, w),
            None => p,
        }
    }
}

/// Labels from probabilities that already include any vote weighting:
/// failure iff the adjusted score reaches the threshold.
pub fn apply_rule(rule: &DecisionRule, probs: &[f64]) -> Result<Vec<u8>> {
    rule.validate()?;
    Ok(probs
        .iter()
        .map(|&p| u8::from(rule.score(p) >= rule.threshold))
        .collect())
}

/// `w1 p / (w1 p + w0 (1 - p))`.
pub fn reweight_probs(p: f64, (w0, w1): (f64, f64)) -> f64 {
    let num = w1 * p;
    let den = num + w0 * (1.0 - p);
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Raw-probability threshold label-equivalent to reweighting by `w` and
/// then thresholding at `t`.
pub fn equivalent_threshold(t: f64, (w0, w1): (f64, f64)) -> f64 {
    let num = t * w0;
    num / (num + (1.0 - t) * w1)
}

/// Bayes threshold `c_fp / (c_fp + c_fn)`.
pub fn cost_threshold(c: CostSpec) -> f64 {
    c.false_alarm / (c.false_alarm + c.missed)
}

/// F1 as an exact fraction `(2tp, 2tp + fp + fn)`.
fn f1_fraction(tp: u64, fp: u64, fn_: u64) -> (u64, u64) {
    (2 * tp, 2 * tp + fp + fn_)
}

fn cmp_fraction((a, b): (u64, u64), (c, d): (u64, u64)) -> Ordering {
    // 0/0 counts as 0.
    let lhs = u128::from(a) * u128::from(d.max(1));
    let rhs = u128::from(c) * u128::from(b.max(1));
    lhs.cmp(&rhs)
}

fn check_validation(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::WidthMismatch {
            expected: labels.len(),
            got: probs.len(),
        });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidData("labels must be 0 or 1".into()));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidData("non-finite probability".into()));
    }
    let positives = labels.iter().filter(|&&l| l == FAILURE).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// F1 of labelling `p >= t` as failure.
pub fn f1_at(probs: &[f64], labels: &[u8], t: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &y) in probs.iter().zip(labels) {
        match (p >= t, y == FAILURE) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let (n, d) = f1_fraction(tp, fp, fn_);
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Threshold maximising validation F1 over 0, 1 and the midpoints between
/// consecutive distinct probabilities. Ties go to the candidate nearest 0.5,
/// then to the smaller one.
pub fn tune_threshold(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_validation(probs, labels)?;
    let mut pairs: Vec<(f64, u8)> = probs.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Distinct values ascending, with failure and normal counts at or above.
    let mut distinct: Vec<(f64, u64, u64)> = Vec::new();
    for &(p, y) in pairs.iter().rev() {
        match distinct.last_mut() {
            Some(last) if last.0 == p => {}
            _ => {
                let (tp, fp) = distinct.last().map_or((0, 0), |l| (l.1, l.2));
                distinct.push((p, tp, fp));
            }
        }
        let last = distinct.last_mut().expect("just pushed");
        if y == FAILURE {
            last.1 += 1;
        } else {
            last.2 += 1;
        }
    }
    distinct.reverse();
    let positives = labels.iter().filter(|&&l| l == FAILURE).count() as u64;

    // Each candidate with the (tp, fp) of predicting `p >= candidate`.
    let above = |t: f64| -> (u64, u64) {
        let at = distinct.partition_point(|d| d.0 < t);
        distinct.get(at).map_or((0, 0), |d| (d.1, d.2))
    };
    let mut candidates = vec![0.0, 1.0];
    candidates.extend(distinct.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)));

    let mut best: Option<(f64, (u64, u64))> = None;
    for t in candidates {
        let (tp, fp) = above(t);
        let score = f1_fraction(tp, fp, positives - tp);
        let better = match best {
            None => true,
            Some((bt, bs)) => match cmp_fraction(score, bs) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => {
                    let (da, db) = ((t - 0.5).abs(), (bt - 0.5).abs());
                    da < db || (da == db && t < bt)
                }
            },
        };
        if better {
            best = Some((t, score));
        }
    }
    Ok(best.expect("candidates are non-empty").0)
}

/// Platt scaling fitted by Newton's method on `(logit(p), label)`. Falls
/// back to the identity when the fit is degenerate or does not converge.
pub fn platt_fit(probs: &[f64], labels: &[u8]) -> Result<Calibrator> {
    check_validation(probs, labels)?;
    let xs: Vec<f64> = probs.iter().map(|&p| logit(p)).collect();
    let ys: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let (mut a, mut b) = (1.0, 0.0);
    for _ in 0..PLATT_MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let s = sigmoid(a * x + b);
            let r = s - y;
            let w = s * (1.0 - s);
            ga += r * x;
            gb += r;
            haa += w * x * x;
            hab += w * x;
            hbb += w;
        }
        let det = haa * hbb - hab * hab;
        if !(det.abs() > 1e-12 * (haa * hbb).abs().max(f64::MIN_POSITIVE)) || !det.is_finite() {
            log::warn!("platt: singular curvature, using identity calibration");
            return Ok(Calibrator::Identity);
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        a -= da;
        b -= db;
        if da.abs().max(db.abs()) < PLATT_TOL {
            if a <= 0.0 {
                log::warn!("platt: non-positive slope {a}, using identity calibration");
                return Ok(Calibrator::Identity);
            }
            return Ok(Calibrator::Platt { a, b });
        }
    }
    log::warn!("platt: no convergence in {PLATT_MAX_ITER} iterations, using identity calibration");
    Ok(Calibrator::Identity)
}

/// Pool-adjacent-violators fit of labels on probabilities, tied
/// probabilities pooled first.
pub fn isotonic_fit(probs: &[f64], labels: &[u8]) -> Result<Calibrator> {
    check_validation(probs, labels)?;
    let mut pairs: Vec<(f64, f64)> = probs
        .iter()
        .zip(labels)
        .map(|(&p, &l)| (p, f64::from(l)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Blocks of (upper_x, label sum, count).
    let mut blocks: Vec<(f64, f64, f64)> = Vec::new();
    for (p, y) in pairs {
        match blocks.last_mut() {
            Some(last) if last.0 == p => {
                last.1 += y;
                last.2 += 1.0;
            }
            _ => blocks.push((p, y, 1.0)),
        }
        while blocks.len() >= 2 {
            let n = blocks.len();
            let (hi, lo) = (blocks[n - 1], blocks[n - 2]);
            if lo.1 / lo.2 <= hi.1 / hi.2 {
                break;
            }
            blocks.truncate(n - 2);
            blocks.push((hi.0, lo.1 + hi.1, lo.2 + hi.2));
        }
    }
    Ok(Calibrator::Isotonic {
        breakpoints: blocks.into_iter().map(|(x, s, c)| (x, s / c)).collect(),
    })
}

/// Per-tree weights proportional to each tree's validation F1, floored at
/// [`VOTE_FLOOR`] and normalised to sum to 1.
pub fn vote_weight_fit(model: &ForestModel, val: &Dataset) -> Result<Vec<f64>> {
    let raw = (0..model.n_trees())
        .map(|t| {
            let p = model.tree_proba(t, val.features())?;
            Ok(f1_at(&p, val.labels(), 0.5).max(VOTE_FLOOR))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tune_prefers_half_on_ties() {
        let t = tune_threshold(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap();
        assert_eq!(t, 0.5);
    }

    #[test]
    fn tune_on_inverted_scores() {
        let probs = [0.9, 0.8, 0.2, 0.1];
        let labels = [0, 0, 1, 1];
        let t = tune_threshold(&probs, &labels).unwrap();
        let best = (0..=100)
            .map(|i| f1_at(&probs, &labels, i as f64 / 100.0))
            .fold(0.0, f64::max);
        assert_eq!(f1_at(&probs, &labels, t), best);
        assert!((best - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn tune_rejects_single_class() {
        assert!(matches!(
            tune_threshold(&[0.1, 0.2], &[0, 0]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn cost_thresholds() {
        assert_eq!(cost_threshold(CostSpec::new(2.0, 2.0).unwrap()), 0.5);
        assert!((cost_threshold(CostSpec::new(1.0, 5.0).unwrap()) - 1.0 / 6.0).abs() < 1e-15);
        assert!(cost_threshold(CostSpec::new(1.0, 1e300).unwrap()) < 1e-299);
        assert!(CostSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn reweight_values() {
        assert_eq!(reweight_probs(0.5, (1.0, 3.0)), 0.75);
        for i in 0..=10 {
            let p = i as f64 / 10.0;
            assert!((reweight_probs(p, (1.0, 1.0)) - p).abs() < 1e-15);
        }
        assert_eq!(reweight_probs(0.0, (1.0, 3.0)), 0.0);
        assert_eq!(reweight_probs(1.0, (1.0, 3.0)), 1.0);
        assert!(reweight_probs(0.3, (2.0, 5.0)) < reweight_probs(0.31, (2.0, 5.0)));
    }

    #[test]
    fn reweight_matches_shifted_threshold() {
        let probs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let reweighted = DecisionRule {
            reweight: Some((1.0, 3.0)),
            threshold: 0.75,
            ..DecisionRule::default()
        };
        let plain = DecisionRule::with_threshold(0.5).unwrap();
        assert_eq!(
            apply_rule(&reweighted, &probs).unwrap(),
            apply_rule(&plain, &probs).unwrap()
        );
        assert_eq!(equivalent_threshold(0.75, (1.0, 3.0)), 0.5);
    }

    #[test]
    fn threshold_bounds() {
        let all = apply_rule(
            &DecisionRule::with_threshold(0.0).unwrap(),
            &[0.0, 0.3, 1.0],
        )
        .unwrap();
        assert_eq!(all, vec![1, 1, 1]);
        assert!(DecisionRule::with_threshold(1.0 + 1e-12).is_err());
    }

    #[test]
    fn isotonic_two_point_pool() {
        let c = isotonic_fit(&[0.2, 0.8], &[1, 0]).unwrap();
        assert_eq!(
            c,
            Calibrator::Isotonic {
                breakpoints: vec![(0.8, 0.5)]
            }
        );
        assert_eq!(c.apply(0.0), 0.5);
        assert_eq!(c.apply(0.9), 0.5);
    }

    #[test]
    fn isotonic_fixed_point() {
        let probs = [0.1, 0.1, 0.4, 0.4, 0.7, 0.9];
        let labels = [0, 0, 0, 1, 1, 1];
        let c = isotonic_fit(&probs, &labels).unwrap();
        assert_eq!(c.apply(0.1), 0.0);
        assert_eq!(c.apply(0.4), 0.5);
        assert_eq!(c.apply(0.7), 1.0);
        assert_eq!(c.apply(0.25), 0.5);
    }

    #[test]
    fn platt_degenerate_input() {
        assert_eq!(
            platt_fit(&[0.3; 6], &[0, 1, 0, 1, 0, 0]).unwrap(),
            Calibrator::Identity
        );
    }
}
