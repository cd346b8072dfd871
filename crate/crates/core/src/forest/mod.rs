//! CART trees and random forests with class weights, per-sample weights,
//! probability output and out-of-bag bookkeeping.

mod tree;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FAILURE, NORMAL};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Matrix, Result};

pub use tree::{Node, Tree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means ⌈√d⌉.
    pub feature_subsample: Option<usize>,
    /// `(w_normal, w_failure)`.
    pub class_weights: (f64, f64),
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            feature_subsample: None,
            class_weights: (1.0, 1.0),
            bootstrap: true,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 {
            return Err(Error::Config("n_trees and min_leaf must be >= 1".into()));
        }
        if self.max_depth == Some(0) || self.feature_subsample == Some(0) {
            return Err(Error::Config(
                "max_depth and feature_subsample must be >= 1".into(),
            ));
        }
        let (w0, w1) = self.class_weights;
        if !(w0 > 0.0 && w1 > 0.0 && w0.is_finite() && w1.is_finite()) {
            return Err(Error::Config("class weights must be positive".into()));
        }
        Ok(())
    }

    fn mtry(&self, d: usize) -> usize {
        self.feature_subsample
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d)
    }
}

/// How each tree draws its training sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sampling {
    /// n draws with replacement, or every row once when bootstrap is off.
    Standard,
    /// n_failure draws from each class: failures with replacement, normals
    /// without replacement while enough exist.
    Balanced,
}

/// A trained random forest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    config: FitConfig,
    n_features: usize,
    /// Per-tree `[normal, failure]` row counts of the drawn sample.
    bootstrap_counts: Vec<[usize; 2]>,
    #[serde(skip)]
    oob_indices: Vec<Vec<u32>>,
}

/// Weighted Gini impurity of a node holding `counts = (n0, n1)` under class
/// weights `(w0, w1)`.
pub fn weighted_gini(counts: (f64, f64), weights: (f64, f64)) -> Result<f64> {
    if counts.0 < 0.0 || counts.1 < 0.0 {
        return Err(Error::InvalidData("negative class count".into()));
    }
    if !(weights.0 > 0.0 && weights.1 > 0.0) {
        return Err(Error::Config("class weights must be positive".into()));
    }
    tree::gini([counts.0, counts.1], weights)
        .ok_or_else(|| Error::InvalidData("gini of an empty node".into()))
}

pub fn fit(train: &Dataset, cfg: &FitConfig) -> Result<ForestModel> {
    grow_forest(train, cfg, None, Sampling::Standard)
}

/// Like [`fit`], with a positive weight per training row entering both the
/// split criterion and the leaf probabilities.
pub fn fit_weighted(
    train: &Dataset,
    cfg: &FitConfig,
    sample_weights: &[f64],
) -> Result<ForestModel> {
    if sample_weights.len() != train.len() {
        return Err(Error::WidthMismatch {
            expected: train.len(),
            got: sample_weights.len(),
        });
    }
    if sample_weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Config("sample weights must be positive".into()));
    }
    grow_forest(train, cfg, Some(sample_weights), Sampling::Standard)
}

pub(crate) fn grow_forest(
    train: &Dataset,
    cfg: &FitConfig,
    sample_weights: Option<&[f64]>,
    sampling: Sampling,
) -> Result<ForestModel> {
    cfg.validate()?;
    let d = train.n_features();
    if d == 0 {
        return Err(Error::InvalidData("no features".into()));
    }
    if train.n_normal() == 0 || train.n_failure() == 0 {
        return Err(Error::SingleClass);
    }
    let params = tree::GrowParams {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        mtry: cfg.mtry(d),
        class_weights: cfg.class_weights,
    };
    let by_class = [train.indices_of(NORMAL), train.indices_of(FAILURE)];
    let presorted = tree::Presorted::new(train.features(), train.labels());
    let ones;
    let weights = match sample_weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; train.len()];
            &ones
        }
    };

    let build = |t: usize| -> (Tree, Vec<u32>, [usize; 2]) {
        let mut rng = seeded(derive_seed(cfg.seed, t as u64));
        let n = train.len();
        let mut drawn = vec![0u32; n];
        match sampling {
            Sampling::Standard if cfg.bootstrap => {
                for _ in 0..n {
                    drawn[rng.random_range(0..n)] += 1;
                }
            }
            Sampling::Standard => drawn.iter_mut().for_each(|c| *c = 1),
            Sampling::Balanced => {
                let k = by_class[1].len();
                for _ in 0..k {
                    drawn[by_class[1][rng.random_range(0..k)]] += 1;
                }
                let majority = &by_class[0];
                if majority.len() >= k {
                    for i in rand::seq::index::sample(&mut rng, majority.len(), k) {
                        drawn[majority[i]] += 1;
                    }
                } else {
                    for _ in 0..k {
                        drawn[majority[rng.random_range(0..majority.len())]] += 1;
                    }
                }
            }
        }
        let mut oob = Vec::new();
        let mut class_counts = [0usize; 2];
        for (i, &c) in drawn.iter().enumerate() {
            if c == 0 {
                oob.push(i as u32);
            } else {
                class_counts[train.labels()[i] as usize] += c as usize;
            }
        }
        let tree = tree::grow(&presorted, &drawn, weights, &params, &mut rng);
        (tree, oob, class_counts)
    };

    #[cfg(feature = "parallel")]
    let built: Vec<_> = {
        use rayon::prelude::*;
        (0..cfg.n_trees).into_par_iter().map(build).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let built: Vec<_> = (0..cfg.n_trees).map(build).collect();

    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut oob_indices = Vec::with_capacity(cfg.n_trees);
    let mut bootstrap_counts = Vec::with_capacity(cfg.n_trees);
    for (t, o, c) in built {
        trees.push(t);
        oob_indices.push(o);
        bootstrap_counts.push(c);
    }
    let mut config = cfg.clone();
    config.feature_subsample = Some(params.mtry);
    Ok(ForestModel {
        trees,
        config,
        n_features: d,
        bootstrap_counts,
        oob_indices,
    })
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn oob_indices(&self) -> &[Vec<u32>] {
        &self.oob_indices
    }

    pub fn bootstrap_counts(&self) -> &[[usize; 2]] {
        &self.bootstrap_counts
    }

    fn check_width(&self, rows: &Matrix) -> Result<()> {
        if rows.cols() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                got: rows.cols(),
            });
        }
        Ok(())
    }

    /// P(failure) per row: the mean of per-tree leaf probabilities.
    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<f64>> {
        self.check_width(rows)?;
        let k = self.trees.len() as f64;
        Ok(rows
            .iter_rows()
            .map(|r| {
                let s: f64 = self.trees.iter().map(|t| t.predict_row(r)).sum();
                (s / k).clamp(0.0, 1.0)
            })
            .collect())
    }

    /// Weighted mean of per-tree leaf probabilities; `weights` must have one
    /// entry per tree and sum to 1.
    pub fn predict_proba_weighted(&self, rows: &Matrix, weights: &[f64]) -> Result<Vec<f64>> {
        self.check_width(rows)?;
        if weights.len() != self.trees.len() {
            return Err(Error::WidthMismatch {
                expected: self.trees.len(),
                got: weights.len(),
            });
        }
        Ok(rows
            .iter_rows()
            .map(|r| {
                let s: f64 = self
                    .trees
                    .iter()
                    .zip(weights)
                    .map(|(t, w)| w * t.predict_row(r))
                    .sum();
                s.clamp(0.0, 1.0)
            })
            .collect())
    }

    /// Leaf probabilities of a single tree.
    pub fn tree_proba(&self, tree: usize, rows: &Matrix) -> Result<Vec<f64>> {
        self.check_width(rows)?;
        let t = &self.trees[tree];
        Ok(rows.iter_rows().map(|r| t.predict_row(r)).collect())
    }

    /// Label 1 iff P(failure) ≥ 0.5.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(rows)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }
}
