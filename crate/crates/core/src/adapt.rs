//! In-processing techniques: models that change how the forest is learned
//! rather than the data it sees or the threshold applied afterwards.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FAILURE, NORMAL};
use crate::forest::{self, FitConfig, ForestModel, Sampling};
use crate::resample::{resample, SamplerKind, SamplerSpec};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Matrix, Result};

/// Member weight `ln(1e6) / 2` given to a boosting round with zero error.
pub const ZERO_ERROR_ALPHA: f64 = 6.907_755_278_982_137;
const ERROR_CLAMP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    MeanProba,
    WeightedVote,
}

/// Forests combined by probability averaging or by a weighted hard vote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    members: Vec<(ForestModel, f64)>,
    aggregation: Aggregation,
}

impl EnsembleModel {
    /// Equal-weight probability average.
    pub fn mean_of(members: Vec<ForestModel>) -> Result<Self> {
        let w = 1.0 / members.len().max(1) as f64;
        Self::new(
            members.into_iter().map(|m| (m, w)).collect(),
            Aggregation::MeanProba,
        )
    }

    pub fn new(members: Vec<(ForestModel, f64)>, aggregation: Aggregation) -> Result<Self> {
        let Some((first, _)) = members.first() else {
            return Err(Error::Config("ensemble without members".into()));
        };
        let width = first.n_features();
        if let Some((m, _)) = members.iter().find(|(m, _)| m.n_features() != width) {
            return Err(Error::WidthMismatch {
                expected: width,
                got: m.n_features(),
            });
        }
        if members.iter().any(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("member weights must be non-negative".into()));
        }
        let total: f64 = members.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("member weights sum to {total}")));
        }
        Ok(Self {
            members,
            aggregation,
        })
    }

    pub fn members(&self) -> &[(ForestModel, f64)] {
        &self.members
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn n_features(&self) -> usize {
        self.members[0].0.n_features()
    }

    pub fn n_trees(&self) -> usize {
        self.members.iter().map(|(m, _)| m.n_trees()).sum()
    }

    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; rows.rows()];
        for (m, w) in &self.members {
            let p = m.predict_proba(rows)?;
            match self.aggregation {
                Aggregation::MeanProba => {
                    acc.iter_mut().zip(&p).for_each(|(a, p)| *a += w * p);
                }
                Aggregation::WeightedVote => {
                    acc.iter_mut()
                        .zip(&p)
                        .for_each(|(a, p)| *a += if *p >= 0.5 { *w } else { -*w });
                }
            }
        }
        Ok(match self.aggregation {
            Aggregation::MeanProba => acc.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(),
            Aggregation::WeightedVote => acc.into_iter().map(logistic).collect(),
        })
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Forest trained on the features plus an out-of-fold probability from a
/// depth-2 tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    base: ForestModel,
    main: ForestModel,
    folds: usize,
}

impl MetaModel {
    pub fn base(&self) -> &ForestModel {
        &self.base
    }

    pub fn main(&self) -> &ForestModel {
        &self.main
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn n_features(&self) -> usize {
        self.base.n_features()
    }

    pub fn n_trees(&self) -> usize {
        self.base.n_trees() + self.main.n_trees()
    }

    /// Appends the base model's probability as an extra column.
    pub fn augment(&self, rows: &Matrix) -> Result<Matrix> {
        rows.with_column(&self.base.predict_proba(rows)?)
    }

    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>> {
        self.main.predict_proba(&self.augment(rows)?)
    }
}

/// `(1, n_normal / n_failure)`.
pub fn inverse_frequency_weights(train: &Dataset) -> Result<(f64, f64)> {
    let (n0, n1) = train.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    Ok((1.0, n0 as f64 / n1 as f64))
}

pub fn cost_sensitive_fit(train: &Dataset, cfg: &FitConfig) -> Result<ForestModel> {
    let cfg = FitConfig {
        class_weights: inverse_frequency_weights(train)?,
        ..cfg.clone()
    };
    forest::fit(train, &cfg)
}

/// Seed used by member `m` of a bagged ensemble for both its undersampling
/// and its forest.
pub fn member_seed(seed: u64, m: usize) -> u64 {
    derive_seed(seed, 0xb000 + m as u64)
}

/// Equal-weight average of forests, each trained on its own random
/// undersample of the majority class.
pub fn bagging_fit(train: &Dataset, n_members: usize, cfg: &FitConfig) -> Result<EnsembleModel> {
    if n_members == 0 {
        return Err(Error::Config("bagging needs at least one member".into()));
    }
    let members = (0..n_members)
        .map(|m| {
            let seed = member_seed(cfg.seed, m);
            let balanced = resample(
                train,
                &SamplerSpec::new(SamplerKind::Rus).with_seed(seed),
                None,
            )?;
            forest::fit(
                &balanced.data,
                &FitConfig {
                    seed,
                    ..cfg.clone()
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::mean_of(members)
}

/// One boosting round: the distribution it trained on and the resulting
/// error and member weight.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostRound {
    pub weights: Vec<f64>,
    pub error: f64,
    pub alpha: f64,
}

/// AdaBoost.M1 with `member` as the weak learner. Returns the ensemble and a
/// record of every round attempted, including one that stopped training.
pub fn adaboost(
    train: &Dataset,
    n_rounds: usize,
    member: &FitConfig,
) -> Result<(EnsembleModel, Vec<BoostRound>)> {
    if n_rounds == 0 {
        return Err(Error::Config("boosting needs at least one round".into()));
    }
    let n = train.len();
    let mut dist = vec![1.0 / n as f64; n];
    let mut kept: Vec<(ForestModel, f64)> = Vec::new();
    let mut rounds = Vec::new();
    for t in 0..n_rounds {
        let cfg = FitConfig {
            seed: derive_seed(member.seed, t as u64),
            ..member.clone()
        };
        let model = forest::fit_weighted(train, &cfg, &dist)?;
        let predicted = model.predict(train.features())?;
        let wrong: Vec<bool> = predicted
            .iter()
            .zip(train.labels())
            .map(|(p, y)| p != y)
            .collect();
        let error: f64 = dist
            .iter()
            .zip(&wrong)
            .filter(|(_, &w)| w)
            .map(|(d, _)| d)
            .sum();
        if error >= 0.5 {
            rounds.push(BoostRound {
                weights: dist.clone(),
                error,
                alpha: 0.0,
            });
            if kept.is_empty() {
                log::warn!("boosting: first round error {error:.4} >= 0.5, using a single member");
                return Ok((EnsembleModel::mean_of(vec![model])?, rounds));
            }
            break;
        }
        let alpha = if error == 0.0 {
            ZERO_ERROR_ALPHA
        } else {
            let e = error.clamp(ERROR_CLAMP, 1.0 - ERROR_CLAMP);
            0.5 * ((1.0 - e) / e).ln()
        };
        rounds.push(BoostRound {
            weights: dist.clone(),
            error,
            alpha,
        });
        kept.push((model, alpha));
        if error == 0.0 {
            break;
        }
        // y·h is +1 when correct and -1 when wrong.
        for (d, &w) in dist.iter_mut().zip(&wrong) {
            *d *= if w { alpha.exp() } else { (-alpha).exp() };
        }
        let total: f64 = dist.iter().sum();
        dist.iter_mut().for_each(|d| *d /= total);
    }
    let total: f64 = kept.iter().map(|(_, a)| a).sum();
    let members = kept.into_iter().map(|(m, a)| (m, a / total)).collect();
    Ok((
        EnsembleModel::new(members, Aggregation::WeightedVote)?,
        rounds,
    ))
}

/// AdaBoost over forests capped at depth 3.
pub fn boosting_fit(train: &Dataset, n_rounds: usize, cfg: &FitConfig) -> Result<EnsembleModel> {
    let member = FitConfig {
        max_depth: Some(3),
        ..cfg.clone()
    };
    Ok(adaboost(train, n_rounds, &member)?.0)
}

/// Forest whose every tree trains on an exactly balanced draw.
pub fn balanced_rf_fit(train: &Dataset, cfg: &FitConfig) -> Result<ForestModel> {
    forest::grow_forest(train, cfg, None, Sampling::Balanced)
}

pub const META_FOLDS: usize = 5;
pub const META_COLUMN: &str = "meta_proba";

fn base_config(cfg: &FitConfig, d: usize, seed: u64) -> FitConfig {
    FitConfig {
        n_trees: 1,
        max_depth: Some(2),
        min_leaf: 1,
        feature_subsample: Some(d),
        class_weights: (1.0, 1.0),
        bootstrap: false,
        seed: derive_seed(cfg.seed, seed),
    }
}

/// Out-of-fold base probabilities for every training row over stratified
/// folds. Folds whose
/// training part holds one class predict that part's failure rate.
pub fn out_of_fold_proba(train: &Dataset, cfg: &FitConfig, folds: usize) -> Result<Vec<f64>> {
    let n = train.len();
    if folds < 2 || n < folds {
        return Err(Error::TooFewSamples {
            class: FAILURE,
            count: n,
            needed: folds.max(2),
        });
    }
    let mut rng = seeded(derive_seed(cfg.seed, 0x3e7a));
    let mut fold_of = vec![0usize; n];
    let mut next = 0;
    for label in [NORMAL, FAILURE] {
        let mut idx = train.indices_of(label);
        idx.shuffle(&mut rng);
        for i in idx {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    let mut out = vec![0.0; n];
    for k in 0..folds {
        let (held, fit_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == k);
        let part = train.subset(&fit_idx);
        let probs = match part {
            Ok(p) if p.n_normal() > 0 && p.n_failure() > 0 => {
                let base = forest::fit(&p, &base_config(cfg, train.n_features(), k as u64))?;
                base.predict_proba(&train.features().select_rows(&held))?
            }
            _ => {
                let failures = fit_idx
                    .iter()
                    .filter(|&&i| train.labels()[i] == FAILURE)
                    .count();
                vec![failures as f64 / fit_idx.len() as f64; held.len()]
            }
        };
        for (&i, p) in held.iter().zip(probs) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Two-level model: a depth-2 tree's out-of-fold probability becomes an
/// extra feature for the main forest.
pub fn meta_fit(train: &Dataset, cfg: &FitConfig) -> Result<MetaModel> {
    let meta = out_of_fold_proba(train, cfg, META_FOLDS)?;
    let base = forest::fit(
        train,
        &base_config(cfg, train.n_features(), META_FOLDS as u64),
    )?;
    let augmented = Dataset::new(
        train.schema().with_extra(META_COLUMN)?,
        train.features().with_column(&meta)?,
        train.labels().to_vec(),
    )?;
    let main = forest::fit(&augmented, cfg)?;
    Ok(MetaModel {
        base,
        main,
        folds: META_FOLDS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, ColumnSchema, GeneratorConfig};
    use crate::forest::Node;

    fn line(xs: &[f64], labels: &[u8]) -> Dataset {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        Dataset::new(
            ColumnSchema::continuous(&["x"], "y").unwrap(),
            Matrix::from_rows(&rows).unwrap(),
            labels.to_vec(),
        )
        .unwrap()
    }

    fn small() -> Dataset {
        generate_synthetic(&GeneratorConfig {
            n_normal: 300,
            n_failure: 30,
            overlap: 0.4,
            seed: 3,
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    fn quick() -> FitConfig {
        FitConfig {
            n_trees: 10,
            seed: 5,
            ..FitConfig::default()
        }
    }

    #[test]
    fn cost_weights() {
        let d = small();
        assert_eq!(inverse_frequency_weights(&d).unwrap(), (1.0, 10.0));
        let full = generate_synthetic(&GeneratorConfig::default()).unwrap();
        let (_, w) = inverse_frequency_weights(&full).unwrap();
        assert!((w - 40.51).abs() < 0.01);
    }

    #[test]
    fn weighted_leaf_probability() {
        let mut labels = vec![0u8; 40];
        labels.push(1);
        let d = line(&[1.0; 41], &labels);
        let cfg = FitConfig {
            n_trees: 1,
            bootstrap: false,
            class_weights: (1.0, 40.51),
            ..FitConfig::default()
        };
        let p = forest::fit(&d, &cfg)
            .unwrap()
            .predict_proba(d.features())
            .unwrap();
        assert!((p[0] - 40.51 / 80.51).abs() < 1e-12);
        assert!((p[0] - 0.503).abs() < 1e-3);
    }

    #[test]
    fn cost_sensitive_is_baseline_on_balanced_data() {
        let xs: Vec<f64> = (0..20).map(|i| ((i * 37) % 20) as f64).collect();
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let d = line(&xs, &labels);
        assert_eq!(
            cost_sensitive_fit(&d, &quick()).unwrap(),
            forest::fit(&d, &quick()).unwrap()
        );
    }

    #[test]
    fn single_member_bagging_is_rus_then_fit() {
        let d = small();
        let cfg = quick();
        let bag = bagging_fit(&d, 1, &cfg).unwrap();
        let seed = member_seed(cfg.seed, 0);
        let rus = resample(
            &d,
            &SamplerSpec::new(SamplerKind::Rus).with_seed(seed),
            None,
        )
        .unwrap();
        let single = forest::fit(&rus.data, &FitConfig { seed, ..cfg }).unwrap();
        assert_eq!(
            bag.predict_proba(d.features()).unwrap(),
            single.predict_proba(d.features()).unwrap()
        );
    }

    #[test]
    fn bagging_members_differ() {
        let d = small();
        let bag = bagging_fit(&d, 3, &quick()).unwrap();
        assert_eq!(bag.members().len(), 3);
        assert_eq!(bag.n_trees(), 30);
        let probe = d.features();
        let a = bag.members()[0].0.predict_proba(probe).unwrap();
        let b = bag.members()[1].0.predict_proba(probe).unwrap();
        assert_ne!(a, b);
    }

    fn stump() -> FitConfig {
        FitConfig {
            n_trees: 1,
            max_depth: Some(1),
            bootstrap: false,
            ..FitConfig::default()
        }
    }

    #[test]
    fn boosting_stops_on_perfect_learner() {
        let d = line(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let (model, rounds) = adaboost(&d, 5, &stump()).unwrap();
        assert_eq!(rounds.len(), 1);
        assert_eq!(rounds[0].error, 0.0);
        assert!((rounds[0].alpha - 1e6f64.ln() / 2.0).abs() < 1e-15);
        assert_eq!(model.members().len(), 1);
    }

    #[test]
    fn boosting_round_two_weights() {
        // A stump cannot separate 0 0 1 1 0 1; the first one errs on one row.
        let d = line(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 1, 1, 0, 1]);
        let (_, rounds) = adaboost(&d, 2, &stump()).unwrap();
        let first = &rounds[0];
        assert!(first.weights.iter().all(|w| (w - 1.0 / 6.0).abs() < 1e-15));

        // Oracle: the best threshold by weighted Gini with equal weights,
        // its misclassified rows and the textbook update.
        let h = stump_oracle(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[0, 0, 1, 1, 0, 1],
            &first.weights,
        );
        let labels = [0u8, 0, 1, 1, 0, 1];
        let err: f64 = (0..6)
            .filter(|&i| h[i] != labels[i])
            .map(|i| first.weights[i])
            .sum();
        assert!((first.error - err).abs() < 1e-12);
        let alpha = 0.5 * ((1.0 - err) / err).ln();
        assert!((first.alpha - alpha).abs() < 1e-12);
        let mut expected: Vec<f64> = (0..6)
            .map(|i| {
                first.weights[i]
                    * if h[i] != labels[i] {
                        alpha.exp()
                    } else {
                        (-alpha).exp()
                    }
            })
            .collect();
        let z: f64 = expected.iter().sum();
        expected.iter_mut().for_each(|w| *w /= z);
        let second = &rounds[1].weights;
        for (a, b) in second.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{second:?} vs {expected:?}");
        }
        assert!((second.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    /// Exhaustive weighted-Gini stump over midpoints, predicting the weighted
    /// majority on each side.
    fn stump_oracle(xs: &[f64], ys: &[u8], w: &[f64]) -> Vec<u8> {
        let gini = |idx: &[usize]| -> (f64, f64, f64) {
            let m0: f64 = idx.iter().filter(|&&i| ys[i] == 0).map(|&i| w[i]).sum();
            let m1: f64 = idx.iter().filter(|&&i| ys[i] == 1).map(|&i| w[i]).sum();
            let t = m0 + m1;
            (t * (1.0 - (m0 / t).powi(2) - (m1 / t).powi(2)), m0, m1)
        };
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..xs.len() - 1 {
            let thr = 0.5 * (xs[k] + xs[k + 1]);
            let (l, r): (Vec<usize>, Vec<usize>) = (0..xs.len()).partition(|&i| xs[i] <= thr);
            let imp = gini(&l).0 + gini(&r).0;
            if imp < best.0 - 1e-15 {
                best = (imp, thr);
            }
        }
        let (l, r): (Vec<usize>, Vec<usize>) = (0..xs.len()).partition(|&i| xs[i] <= best.1);
        let side = |idx: &[usize]| {
            let (_, m0, m1) = gini(idx);
            u8::from(m1 / (m0 + m1) >= 0.5)
        };
        let (pl, pr) = (side(&l), side(&r));
        xs.iter()
            .map(|&x| if x <= best.1 { pl } else { pr })
            .collect()
    }

    #[test]
    fn boosting_distribution_stays_positive_and_normalised() {
        let d = small();
        let (model, rounds) = adaboost(
            &d,
            4,
            &FitConfig {
                max_depth: Some(2),
                ..quick()
            },
        )
        .unwrap();
        for r in &rounds {
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            if r.error < 0.5 {
                assert!(r.alpha > 0.0);
            }
        }
        let total: f64 = model.members().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let p = model.predict_proba(d.features()).unwrap();
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn balanced_forest_draws_balanced_samples() {
        let d = small();
        let m = balanced_rf_fit(&d, &quick()).unwrap();
        for c in m.bootstrap_counts() {
            assert_eq!(c[0], c[1]);
            assert_eq!(c[1], d.n_failure());
        }
    }

    #[test]
    fn meta_model_shape() {
        let d = small();
        let m = meta_fit(&d, &quick()).unwrap();
        assert_eq!(m.main().n_features(), d.n_features() + 1);
        let aug = m.augment(d.features()).unwrap();
        assert!(aug
            .column(d.n_features())
            .iter()
            .all(|v| (0.0..=1.0).contains(v)));
        let oof = out_of_fold_proba(&d, &quick(), META_FOLDS).unwrap();
        assert!(oof.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(m.predict_proba(d.features()).unwrap().len(), d.len());
    }

    #[test]
    fn constant_meta_feature_is_never_split_on() {
        // No feature carries signal the base tree can use at depth 0.
        let xs = vec![2.0; 30];
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let d = line(&xs, &labels);
        let m = meta_fit(&d, &quick()).unwrap();
        let col = m.augment(d.features()).unwrap().column(1);
        assert!(col.iter().all(|&v| v == col[0]));
        for t in m.main().trees() {
            assert!(t
                .nodes()
                .iter()
                .all(|n| !matches!(n, Node::Split { feature: 1, .. })));
        }
    }
}
