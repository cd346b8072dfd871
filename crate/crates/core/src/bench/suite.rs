use serde::Serialize;

use super::metrics::{mean_std, median, pct_improvement, variance_to_mean, BASELINE_REFERENCE_F1};
use super::run::{evaluate, fit_baseline, train_technique, Folds, RunConfig, RunResult};
use super::technique::{Category, TechniqueSpec};
use crate::dataset::{Dataset, SplitSpec};
use crate::forest::FitConfig;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Share of failed runs above which a technique is flagged unreliable.
pub const UNRELIABLE_FAILURE_SHARE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub runs: usize,
    pub base_seed: u64,
    /// Train, validation and test fractions.
    pub split: (f64, f64, f64),
    /// Reuse the `base_seed` split for every run, varying only training.
    pub fixed_split: bool,
    pub run: RunConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            base_seed: 42,
            split: (0.6, 0.2, 0.2),
            fixed_split: false,
            run: RunConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn split_seed(&self, run: usize) -> u64 {
        if self.fixed_split {
            self.base_seed
        } else {
            self.base_seed.wrapping_add(run as u64)
        }
    }

    /// Training seed shared by all techniques in a run.
    pub fn train_seed(&self, run: usize) -> u64 {
        derive_seed(self.base_seed, run as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Self {
        let (mean, std) = mean_std(xs);
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TechniqueSummary {
    pub id: String,
    pub category: Category,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub unreliable: bool,
    pub f1: Stat,
    pub precision: Stat,
    pub recall: Stat,
    pub accuracy: Stat,
    pub vmr_f1: f64,
    pub pct_improvement_f1: f64,
    pub inference_ms_mean: f64,
    pub inference_ms_median: f64,
    pub train_ms_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub technique: String,
    pub run: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub runs: usize,
    pub base_seed: u64,
    pub fixed_split: bool,
    pub baseline_reference_f1: f64,
    pub techniques: Vec<TechniqueSummary>,
    pub notes: Vec<String>,
    pub failures: Vec<RunFailure>,
    #[serde(skip)]
    pub results: Vec<RunResult>,
}

impl MetricsReport {
    pub fn get(&self, id: &str) -> Option<&TechniqueSummary> {
        self.techniques.iter().find(|t| t.id == id)
    }

    pub fn baseline(&self) -> &TechniqueSummary {
        self.techniques
            .iter()
            .find(|t| t.category == Category::Baseline)
            .expect("suite always includes the baseline")
    }

    /// Highest mean F1 among reliable techniques of `category`.
    pub fn best_in(&self, category: Category) -> Option<&TechniqueSummary> {
        self.techniques
            .iter()
            .filter(|t| t.category == category && !t.unreliable && t.runs_ok > 0)
            .max_by(|a, b| a.f1.mean.total_cmp(&b.f1.mean))
    }

    /// Per-run results of one technique, in run order.
    pub fn results_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.results.iter().filter(move |r| r.technique == id)
    }
}

/// Runs every technique on `runs` splits of `data`. Within a run all
/// techniques share the split and the training seed. Models are fitted first
/// (in parallel when enabled); test-fold timing then runs one model at a
/// time.
pub fn run_suite(
    techniques: &[TechniqueSpec],
    data: &Dataset,
    cfg: &SuiteConfig,
) -> Result<MetricsReport> {
    if cfg.runs < 2 {
        return Err(Error::Config("a suite needs at least 2 runs".into()));
    }
    let mut specs: Vec<TechniqueSpec> = Vec::with_capacity(techniques.len() + 1);
    if !techniques.iter().any(TechniqueSpec::is_baseline) {
        specs.push(TechniqueSpec::baseline());
    }
    for t in techniques {
        if specs.iter().any(|s| s.id() == t.id()) {
            return Err(Error::Technique(format!("{} listed twice", t.id())));
        }
        specs.push(t.clone());
    }
    let (tr, va, te) = cfg.split;
    SplitSpec::new(tr, va, te, 0)?;

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for run in 0..cfg.runs {
        let seed = cfg.train_seed(run);
        let split = SplitSpec::new(tr, va, te, cfg.split_seed(run))?;
        let forest_cfg = FitConfig {
            seed,
            ..cfg.run.forest.clone()
        };
        let prepared = Folds::split(data, &split).map(|folds| {
            let baseline = fit_baseline(&folds.train, &forest_cfg);
            (folds, baseline)
        });
        let (folds, baseline) = match prepared {
            Ok(p) => p,
            Err(e) => {
                let msg = e.to_string();
                failures.extend(specs.iter().map(|s| RunFailure {
                    technique: s.id().to_string(),
                    run,
                    error: msg.clone(),
                }));
                continue;
            }
        };
        let baseline = baseline.ok();
        let train_one =
            |s: &TechniqueSpec| train_technique(s, &folds, &forest_cfg, baseline.as_ref());
        #[cfg(feature = "parallel")]
        let trained: Vec<_> = {
            use rayon::prelude::*;
            specs.par_iter().map(train_one).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let trained: Vec<_> = specs.iter().map(train_one).collect();

        for (s, t) in specs.iter().zip(trained) {
            match t.and_then(|t| evaluate(s, t, &folds.test, run, seed, &cfg.run)) {
                Ok(r) => results.push(r),
                Err(e) => {
                    log::warn!("{} run {run}: {e}", s.id());
                    failures.push(RunFailure {
                        technique: s.id().to_string(),
                        run,
                        error: e.to_string(),
                    });
                }
            }
        }
        log::info!("run {}/{} done", run + 1, cfg.runs);
    }
    Ok(summarise(&specs, cfg, results, failures))
}

fn summarise(
    specs: &[TechniqueSpec],
    cfg: &SuiteConfig,
    results: Vec<RunResult>,
    failures: Vec<RunFailure>,
) -> MetricsReport {
    let column = |id: &str, f: fn(&RunResult) -> f64| -> Vec<f64> {
        results
            .iter()
            .filter(|r| r.technique == id)
            .map(f)
            .collect()
    };
    let baseline_f1 = mean_std(&column(
        specs
            .iter()
            .find(|s| s.is_baseline())
            .expect("baseline added")
            .id(),
        |r| r.f1,
    ))
    .0;
    let techniques = specs
        .iter()
        .map(|s| {
            let f1 = column(s.id(), |r| r.f1);
            let inference_ms = column(s.id(), |r| 1e3 * r.inference_seconds);
            let failed = failures.iter().filter(|f| f.technique == s.id()).count();
            let f1_stat = Stat::of(&f1);
            TechniqueSummary {
                id: s.id().to_string(),
                category: s.category(),
                runs_ok: f1.len(),
                runs_failed: failed,
                unreliable: failed as f64 > UNRELIABLE_FAILURE_SHARE * cfg.runs as f64,
                f1: f1_stat,
                precision: Stat::of(&column(s.id(), |r| r.precision)),
                recall: Stat::of(&column(s.id(), |r| r.recall)),
                accuracy: Stat::of(&column(s.id(), |r| r.accuracy)),
                vmr_f1: variance_to_mean(&f1),
                pct_improvement_f1: if s.is_baseline() {
                    0.0
                } else {
                    pct_improvement(f1_stat.mean, baseline_f1)
                },
                inference_ms_mean: mean_std(&inference_ms).0,
                inference_ms_median: median(&inference_ms),
                train_ms_mean: mean_std(&column(s.id(), |r| 1e3 * r.train_seconds)).0,
            }
        })
        .collect();
    let mut report = MetricsReport {
        runs: cfg.runs,
        base_seed: cfg.base_seed,
        fixed_split: cfg.fixed_split,
        baseline_reference_f1: BASELINE_REFERENCE_F1,
        techniques,
        notes: Vec::new(),
        failures,
        results,
    };
    report.notes = stability_notes(&report);
    report
}

/// Flags where the per-category winners' F1 stability departs from the
/// ordering "every winner below the baseline, threshold tuning lowest".
pub fn stability_notes(report: &MetricsReport) -> Vec<String> {
    let mut notes = Vec::new();
    for t in report.techniques.iter().filter(|t| t.unreliable) {
        notes.push(format!(
            "{} failed in {} of {} runs and is marked unreliable",
            t.id, t.runs_failed, report.runs
        ));
    }
    let base = report.baseline();
    let winners: Vec<&TechniqueSummary> = [Category::Pre, Category::In, Category::Post]
        .into_iter()
        .filter_map(|c| report.best_in(c))
        .collect();
    for w in &winners {
        if w.vmr_f1 >= base.vmr_f1 {
            notes.push(format!(
                "vmr: best {} technique {} ({:.3e}) is not below the baseline ({:.3e})",
                w.category, w.id, w.vmr_f1, base.vmr_f1
            ));
        }
    }
    if let Some(lowest) = winners.iter().min_by(|a, b| a.vmr_f1.total_cmp(&b.vmr_f1)) {
        if lowest.id != "post:threshold" {
            notes.push(format!(
                "vmr: lowest among category winners is {}, not post:threshold",
                lowest.id
            ));
        }
    }
    notes
}
