use std::time::Instant;

use serde::Serialize;

use super::metrics::{confusion, median, Confusion};
use super::technique::{CalibrationMethod, GenerativeKind, Technique, TechniqueSpec};
use crate::adapt;
use crate::dataset::{stratified_split, Dataset, SplitSpec, FAILURE};
use crate::decide::{
    cost_threshold, isotonic_fit, platt_fit, tune_threshold, vote_weight_fit, CostSpec,
    DecisionRule,
};
use crate::forest::{self, FitConfig, ForestModel};
use crate::genmodel::{cgan_fit, cvae_fit, sample_synthetic, CganSpec, CvaeSpec};
use crate::model::Model;
use crate::resample::{resample, SamplerSpec};
use crate::rng::derive_seed;
use crate::{Matrix, Result};

/// A fold read, in the order it happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldAccess {
    Train,
    Validation,
    TestFeatures,
    TestLabels,
}

/// Test fold whose labels are reachable only through [`SealedTest::score`].
#[derive(Clone, Debug)]
pub struct SealedTest {
    data: Dataset,
}

impl SealedTest {
    pub fn features(&self) -> &Matrix {
        self.data.features()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn score(&self, predicted: &[u8]) -> Result<Confusion> {
        confusion(self.data.labels(), predicted)
    }
}

/// One stratified train/validation/test split.
#[derive(Clone, Debug)]
pub struct Folds {
    pub train: Dataset,
    pub val: Dataset,
    pub test: SealedTest,
}

impl Folds {
    pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<Self> {
        let (train, val, test) = stratified_split(data, spec)?;
        Ok(Self {
            train,
            val,
            test: SealedTest { data: test },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Forest settings; the seed is replaced per run.
    pub forest: FitConfig,
    pub timing: bool,
    pub timing_reps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            forest: FitConfig::default(),
            timing: true,
            timing_reps: 5,
        }
    }
}

/// Metrics of one technique on one split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub technique: String,
    pub run: usize,
    pub seed: u64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub inference_seconds: f64,
    pub train_seconds: f64,
    pub train_rows: usize,
    pub n_trees: usize,
    #[serde(skip)]
    pub audit: Vec<FoldAccess>,
}

/// A model ready for the test fold.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub rule: DecisionRule,
    pub train_seconds: f64,
    pub train_rows: usize,
    pub audit: Vec<FoldAccess>,
}

/// The plain forest of a run, shared by post-processing techniques and as
/// the massaging ranker.
#[derive(Clone, Debug)]
pub struct BaselineFit {
    pub model: ForestModel,
    pub seconds: f64,
}

pub fn fit_baseline(train: &Dataset, forest: &FitConfig) -> Result<BaselineFit> {
    let start = Instant::now();
    let model = forest::fit(train, forest)?;
    Ok(BaselineFit {
        model,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn needs_baseline(t: &Technique) -> bool {
    matches!(
        t,
        Technique::Baseline
            | Technique::Threshold
            | Technique::CostThreshold { .. }
            | Technique::Reweight { .. }
            | Technique::Calibration { .. }
            | Technique::SampleWeighting
    ) || matches!(
        t,
        Technique::Resample {
            kind: crate::resample::SamplerKind::Massaging,
            ..
        }
    )
}

/// Fits `spec` on the training fold (and the validation fold for
/// post-processing). `baseline` is reused when given, and fitted otherwise.
pub fn train_technique(
    spec: &TechniqueSpec,
    folds: &Folds,
    forest_cfg: &FitConfig,
    baseline: Option<&BaselineFit>,
) -> Result<Trained> {
    let train = &folds.train;
    let mut audit = vec![FoldAccess::Train];
    let owned;
    let baseline = match (needs_baseline(spec.technique()), baseline) {
        (false, _) => None,
        (true, Some(b)) => Some(b),
        (true, None) => {
            owned = fit_baseline(train, forest_cfg)?;
            Some(&owned)
        }
    };
    let reused = baseline.map_or(0.0, |b| b.seconds);
    let base = || {
        baseline
            .map(|b| b.model.clone())
            .expect("baseline prepared")
    };
    let seed = forest_cfg.seed;
    let start = Instant::now();
    let mut rule = DecisionRule::default();
    let mut rows = train.len();

    let model: Model = match spec.technique() {
        Technique::Baseline => base().into(),
        Technique::Resample {
            kind,
            ratio,
            k,
            clusters,
            noise,
        } => {
            let mut s = SamplerSpec::new(*kind).with_seed(derive_seed(seed, 1));
            s.target_ratio = ratio.unwrap_or(s.target_ratio);
            s.k_neighbors = k.unwrap_or(s.k_neighbors);
            s.n_clusters = clusters.or(s.n_clusters);
            s.noise_scale = noise.unwrap_or(s.noise_scale);
            let out = resample(train, &s, baseline.map(|b| &b.model))?;
            rows = out.data.len();
            forest::fit(&out.data, forest_cfg)?.into()
        }
        Technique::Generative {
            kind,
            ratio,
            epochs,
            latent,
            hidden,
            beta,
        } => {
            let gen_seed = derive_seed(seed, 2);
            let generator = match kind {
                GenerativeKind::Cvae => {
                    let d = CvaeSpec::default();
                    cvae_fit(
                        train,
                        &CvaeSpec {
                            latent_dim: latent.unwrap_or(d.latent_dim),
                            hidden: hidden.unwrap_or(d.hidden),
                            epochs: epochs.unwrap_or(d.epochs),
                            kl_weight: beta.unwrap_or(d.kl_weight),
                            seed: gen_seed,
                            ..d
                        },
                    )?
                }
                GenerativeKind::Cgan => {
                    let d = CganSpec::default();
                    cgan_fit(
                        train,
                        &CganSpec {
                            latent_dim: latent.unwrap_or(d.latent_dim),
                            hidden: hidden.unwrap_or(d.hidden),
                            epochs: epochs.unwrap_or(d.epochs),
                            seed: gen_seed,
                            ..d
                        },
                    )?
                }
            };
            let target = (ratio.unwrap_or(1.0) * train.n_normal() as f64).round() as usize;
            let count = target.saturating_sub(train.n_failure());
            let synthetic = sample_synthetic(&generator, count, derive_seed(seed, 3));
            let rows_added: Vec<&[f64]> = synthetic.iter_rows().collect();
            let augmented = train.append_rows(&rows_added, FAILURE)?;
            rows = augmented.len();
            forest::fit(&augmented, forest_cfg)?.into()
        }
        Technique::CostSensitive => adapt::cost_sensitive_fit(train, forest_cfg)?.into(),
        Technique::Bagging { members } => adapt::bagging_fit(train, *members, forest_cfg)?.into(),
        Technique::Boosting { rounds } => adapt::boosting_fit(train, *rounds, forest_cfg)?.into(),
        Technique::BalancedForest => adapt::balanced_rf_fit(train, forest_cfg)?.into(),
        Technique::Meta => adapt::meta_fit(train, forest_cfg)?.into(),
        Technique::CostThreshold { cfp, cfn } => {
            let default = CostSpec::inverse_frequency(train)?;
            let costs = CostSpec::new(
                cfp.unwrap_or(default.false_alarm),
                cfn.unwrap_or(default.missed),
            )?;
            rule.threshold = cost_threshold(costs);
            base().into()
        }
        Technique::Reweight { w0, w1 } => {
            let (d0, d1) = adapt::inverse_frequency_weights(train)?;
            rule.reweight = Some((w0.unwrap_or(d0), w1.unwrap_or(d1)));
            base().into()
        }
        Technique::Threshold | Technique::Calibration { .. } | Technique::SampleWeighting => {
            let model = base();
            let val = &folds.val;
            audit.push(FoldAccess::Validation);
            match spec.technique() {
                Technique::Threshold => {
                    rule.threshold =
                        tune_threshold(&model.predict_proba(val.features())?, val.labels())?;
                }
                Technique::Calibration { method } => {
                    let probs = model.predict_proba(val.features())?;
                    rule.calibrator = match method {
                        CalibrationMethod::Isotonic => isotonic_fit(&probs, val.labels())?,
                        CalibrationMethod::Platt => platt_fit(&probs, val.labels())?,
                    };
                }
                _ => rule.vote_weights = Some(vote_weight_fit(&model, val)?),
            }
            model.into()
        }
    };
    rule.validate()?;
    Ok(Trained {
        model,
        rule,
        train_seconds: reused + start.elapsed().as_secs_f64(),
        train_rows: rows,
        audit,
    })
}

/// Scores a trained model on the sealed test fold, timing `reps` batch
/// predictions when `timing` is set.
pub fn evaluate(
    spec: &TechniqueSpec,
    trained: Trained,
    test: &SealedTest,
    run: usize,
    seed: u64,
    cfg: &RunConfig,
) -> Result<RunResult> {
    let mut audit = trained.audit;
    audit.push(FoldAccess::TestFeatures);
    let mut times = Vec::new();
    let mut predicted = None;
    for _ in 0..if cfg.timing {
        cfg.timing_reps.max(1)
    } else {
        1
    } {
        let start = Instant::now();
        let labels = trained.model.predict_with(&trained.rule, test.features())?;
        times.push(start.elapsed().as_secs_f64());
        predicted.get_or_insert(labels);
    }
    let predicted = predicted.expect("at least one prediction");
    audit.push(FoldAccess::TestLabels);
    let c = test.score(&predicted)?;
    let (inference_seconds, train_seconds) = if cfg.timing {
        (median(&times), trained.train_seconds)
    } else {
        (0.0, 0.0)
    };
    Ok(RunResult {
        technique: spec.id().to_string(),
        run,
        seed,
        f1: c.f1(),
        precision: c.precision(),
        recall: c.recall(),
        accuracy: c.accuracy(),
        inference_seconds,
        train_seconds,
        train_rows: trained.train_rows,
        n_trees: trained.model.n_trees(),
        audit,
    })
}

/// Trains and scores one technique on `folds` with training seed `seed`.
pub fn run_technique(
    spec: &TechniqueSpec,
    folds: &Folds,
    seed: u64,
    cfg: &RunConfig,
) -> Result<RunResult> {
    let forest_cfg = FitConfig {
        seed,
        ..cfg.forest.clone()
    };
    let trained = train_technique(spec, folds, &forest_cfg, None)?;
    evaluate(spec, trained, &folds.test, 0, seed, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, GeneratorConfig};

    fn folds() -> Folds {
        let d = generate_synthetic(&GeneratorConfig {
            n_normal: 600,
            n_failure: 40,
            seed: 8,
            ..GeneratorConfig::default()
        })
        .unwrap();
        Folds::split(
            &d,
            &SplitSpec {
                seed: 3,
                ..SplitSpec::default()
            },
        )
        .unwrap()
    }

    fn cfg() -> RunConfig {
        RunConfig {
            forest: FitConfig {
                n_trees: 15,
                ..FitConfig::default()
            },
            timing: false,
            timing_reps: 5,
        }
    }

    #[test]
    fn baseline_matches_forest_predict() {
        let f = folds();
        let r = run_technique(&TechniqueSpec::baseline(), &f, 4, &cfg()).unwrap();
        let m = forest::fit(
            &f.train,
            &FitConfig {
                seed: 4,
                ..cfg().forest
            },
        )
        .unwrap();
        let c = f
            .test
            .score(&m.predict(f.test.features()).unwrap())
            .unwrap();
        assert_eq!(r.f1, c.f1());
        assert_eq!(r.accuracy, c.accuracy());
        assert_eq!((r.inference_seconds, r.train_seconds), (0.0, 0.0));
    }

    #[test]
    fn repeat_runs_agree() {
        let f = folds();
        for id in [
            "pre:smote",
            "in:boosting?rounds=3",
            "post:threshold",
            "post:sample_weighting",
        ] {
            let t = TechniqueSpec::parse(id).unwrap();
            let a = run_technique(&t, &f, 9, &cfg()).unwrap();
            let b = run_technique(&t, &f, 9, &cfg()).unwrap();
            assert_eq!(a, b, "{id}");
        }
    }

    #[test]
    fn test_labels_read_last() {
        let f = folds();
        let t = TechniqueSpec::parse("post:calibration?method=platt").unwrap();
        let r = run_technique(&t, &f, 1, &cfg()).unwrap();
        assert_eq!(
            r.audit,
            vec![
                FoldAccess::Train,
                FoldAccess::Validation,
                FoldAccess::TestFeatures,
                FoldAccess::TestLabels
            ]
        );
    }

    #[test]
    fn resampling_changes_training_rows() {
        let f = folds();
        let rus = run_technique(&TechniqueSpec::parse("pre:rus").unwrap(), &f, 2, &cfg()).unwrap();
        assert_eq!(rus.train_rows, 2 * f.train.n_failure());
        let cvae = TechniqueSpec::parse("pre:cvae?epochs=5").unwrap();
        let r = run_technique(&cvae, &f, 2, &cfg()).unwrap();
        assert_eq!(r.train_rows, 2 * f.train.n_normal());
    }

    #[test]
    fn every_technique_runs() {
        let f = folds();
        for t in super::super::all_techniques() {
            let t = match t.id() {
                "pre:ctgan" => TechniqueSpec::parse("pre:ctgan?epochs=3").unwrap(),
                "pre:cvae" => TechniqueSpec::parse("pre:cvae?epochs=3").unwrap(),
                _ => t,
            };
            let r = run_technique(&t, &f, 5, &cfg()).unwrap_or_else(|e| panic!("{t}: {e}"));
            assert!((0.0..=1.0).contains(&r.f1), "{t}");
        }
    }
}
