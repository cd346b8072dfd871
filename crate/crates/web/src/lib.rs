//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string so the page needs no generated type glue.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use imbalance::dataset::{
    generate_synthetic, stratified_split, Dataset, GeneratorConfig, SplitSpec,
};
use imbalance::decide::{equivalent_threshold, f1_at, reweight_probs, tune_threshold};
use imbalance::forest::{fit, FitConfig};
use imbalance::resample::{resample, SamplerKind, SamplerSpec};
use imbalance::Result;

const CURVE_POINTS: usize = 101;
const PREVIEW_X: &str = "osnr_rx";
const PREVIEW_Y: &str = "ber_rx";

fn to_json<T: Serialize>(out: Result<T>) -> std::result::Result<String, JsError> {
    let value = out.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

fn dataset(n_normal: usize, n_failure: usize, overlap: f64, seed: u64) -> Result<Dataset> {
    generate_synthetic(&GeneratorConfig {
        n_normal,
        n_failure,
        overlap,
        seed,
        ..GeneratorConfig::default()
    })
}

#[derive(Serialize)]
struct ThresholdCurve {
    thresholds: Vec<f64>,
    validation_f1: Vec<f64>,
    test_f1: Vec<f64>,
    tuned: f64,
    tuned_test_f1: f64,
    default_test_f1: f64,
}

fn threshold_curve_impl(
    n_normal: usize,
    n_failure: usize,
    overlap: f64,
    trees: usize,
    seed: u64,
) -> Result<ThresholdCurve> {
    let d = dataset(n_normal, n_failure, overlap, seed)?;
    let (train, val, test) = stratified_split(
        &d,
        &SplitSpec {
            seed,
            ..SplitSpec::default()
        },
    )?;
    let model = fit(
        &train,
        &FitConfig {
            n_trees: trees,
            seed,
            ..FitConfig::default()
        },
    )?;
    let pv = model.predict_proba(val.features())?;
    let pt = model.predict_proba(test.features())?;
    let thresholds: Vec<f64> = (0..CURVE_POINTS)
        .map(|i| i as f64 / (CURVE_POINTS - 1) as f64)
        .collect();
    let tuned = tune_threshold(&pv, val.labels())?;
    Ok(ThresholdCurve {
        validation_f1: thresholds
            .iter()
            .map(|&t| f1_at(&pv, val.labels(), t))
            .collect(),
        test_f1: thresholds
            .iter()
            .map(|&t| f1_at(&pt, test.labels(), t))
            .collect(),
        tuned,
        tuned_test_f1: f1_at(&pt, test.labels(), tuned),
        default_test_f1: f1_at(&pt, test.labels(), 0.5),
        thresholds,
    })
}

/// Validation and test F1 of a forest over a threshold sweep, plus the
/// threshold tuned on validation.
#[wasm_bindgen]
pub fn threshold_curve(
    n_normal: usize,
    n_failure: usize,
    overlap: f64,
    trees: usize,
    seed: u64,
) -> std::result::Result<String, JsError> {
    to_json(threshold_curve_impl(
        n_normal, n_failure, overlap, trees, seed,
    ))
}

#[derive(Serialize)]
struct Point {
    x: f64,
    y: f64,
    label: u8,
}

#[derive(Serialize)]
struct Preview {
    x_name: &'static str,
    y_name: &'static str,
    before: Vec<Point>,
    after: Vec<Point>,
    before_counts: (usize, usize),
    after_counts: (usize, usize),
}

fn points(d: &Dataset) -> Vec<Point> {
    let col = |name: &str| d.schema().names().iter().position(|n| n == name);
    let (Some(x), Some(y)) = (col(PREVIEW_X), col(PREVIEW_Y)) else {
        return Vec::new();
    };
    d.features()
        .iter_rows()
        .zip(d.labels())
        .map(|(r, &label)| Point {
            x: r[x],
            y: r[y],
            label,
        })
        .collect()
}

fn resample_preview_impl(
    sampler: &str,
    n_normal: usize,
    n_failure: usize,
    overlap: f64,
    seed: u64,
) -> Result<Preview> {
    let kind = SamplerKind::from_name(sampler)
        .filter(|k| *k != SamplerKind::Massaging)
        .ok_or_else(|| imbalance::Error::Technique(format!("unsupported sampler '{sampler}'")))?;
    let d = dataset(n_normal, n_failure, overlap, seed)?;
    let out = resample(&d, &SamplerSpec::new(kind).with_seed(seed), None)?;
    Ok(Preview {
        x_name: PREVIEW_X,
        y_name: PREVIEW_Y,
        before: points(&d),
        after: points(&out.data),
        before_counts: d.class_counts(),
        after_counts: out.data.class_counts(),
    })
}

/// Receiver OSNR and BER of every row before and after a resampler.
#[wasm_bindgen]
pub fn resample_preview(
    sampler: &str,
    n_normal: usize,
    n_failure: usize,
    overlap: f64,
    seed: u64,
) -> std::result::Result<String, JsError> {
    to_json(resample_preview_impl(
        sampler, n_normal, n_failure, overlap, seed,
    ))
}

#[derive(Serialize)]
struct ReweightMap {
    p: Vec<f64>,
    reweighted: Vec<f64>,
    threshold: f64,
    equivalent_threshold: f64,
}

/// The reweighting map for weights `(w0, w1)` and the raw-probability
/// threshold it is equivalent to at `threshold`.
#[wasm_bindgen]
pub fn reweight_map(w0: f64, w1: f64, threshold: f64) -> std::result::Result<String, JsError> {
    let out = if w0 > 0.0 && w1 > 0.0 && (0.0..=1.0).contains(&threshold) {
        let p: Vec<f64> = (0..CURVE_POINTS)
            .map(|i| i as f64 / (CURVE_POINTS - 1) as f64)
            .collect();
        Ok(ReweightMap {
            reweighted: p.iter().map(|&v| reweight_probs(v, (w0, w1))).collect(),
            p,
            threshold,
            equivalent_threshold: equivalent_threshold(threshold, (w0, w1)),
        })
    } else {
        Err(imbalance::Error::Config(
            "weights must be positive and the threshold in [0, 1]".into(),
        ))
    };
    to_json(out)
}
