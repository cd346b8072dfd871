use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Serialize, Serializer};

use crate::resample::SamplerKind;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Baseline,
    Pre,
    In,
    Post,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Baseline => "baseline",
            Category::Pre => "pre",
            Category::In => "in",
            Category::Post => "post",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenerativeKind {
    Cgan,
    Cvae,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationMethod {
    Isotonic,
    Platt,
}

/// A technique with its parameters resolved; `None` fields take their
/// defaults at run time.
#[derive(Clone, Debug, PartialEq)]
pub enum Technique {
    Baseline,
    Resample {
        kind: SamplerKind,
        ratio: Option<f64>,
        k: Option<usize>,
        clusters: Option<usize>,
        noise: Option<f64>,
    },
    Generative {
        kind: GenerativeKind,
        ratio: Option<f64>,
        epochs: Option<usize>,
        latent: Option<usize>,
        hidden: Option<usize>,
        beta: Option<f64>,
    },
    CostSensitive,
    Bagging {
        members: usize,
    },
    Boosting {
        rounds: usize,
    },
    BalancedForest,
    Meta,
    Threshold,
    CostThreshold {
        cfp: Option<f64>,
        cfn: Option<f64>,
    },
    Reweight {
        w0: Option<f64>,
        w1: Option<f64>,
    },
    Calibration {
        method: CalibrationMethod,
    },
    SampleWeighting,
}

pub const DEFAULT_BAGGING_MEMBERS: usize = 10;
pub const DEFAULT_BOOSTING_ROUNDS: usize = 10;

struct Entry {
    category: Category,
    name: &'static str,
    keys: &'static [&'static str],
    summary: &'static str,
}

const SAMPLER_KEYS: &[&str] = &["ratio", "k", "clusters", "noise"];
const GENERATIVE_KEYS: &[&str] = &["ratio", "epochs", "latent", "hidden", "beta"];

const CATALOGUE: &[Entry] = &[
    Entry {
        category: Category::Baseline,
        name: "baseline",
        keys: &[],
        summary: "random forest, threshold 0.5",
    },
    Entry {
        category: Category::Pre,
        name: "ros",
        keys: SAMPLER_KEYS,
        summary: "random over-sampling of failures",
    },
    Entry {
        category: Category::Pre,
        name: "rus",
        keys: SAMPLER_KEYS,
        summary: "random under-sampling of normals",
    },
    Entry {
        category: Category::Pre,
        name: "smote",
        keys: SAMPLER_KEYS,
        summary: "SMOTE interpolation between failure neighbours",
    },
    Entry {
        category: Category::Pre,
        name: "adasyn",
        keys: SAMPLER_KEYS,
        summary: "ADASYN, SMOTE focused on hard failures",
    },
    Entry {
        category: Category::Pre,
        name: "cluster_centroids",
        keys: SAMPLER_KEYS,
        summary: "normals replaced by k-means centroids",
    },
    Entry {
        category: Category::Pre,
        name: "smote_tomek",
        keys: SAMPLER_KEYS,
        summary: "SMOTE followed by Tomek-link cleaning",
    },
    Entry {
        category: Category::Pre,
        name: "massaging",
        keys: SAMPLER_KEYS,
        summary: "relabel the normals a ranker scores highest",
    },
    Entry {
        category: Category::Pre,
        name: "perturbation",
        keys: SAMPLER_KEYS,
        summary: "jittered copies of failures",
    },
    Entry {
        category: Category::Pre,
        name: "cluster_massaging",
        keys: SAMPLER_KEYS,
        summary: "relabel normals inside failure-rich clusters",
    },
    Entry {
        category: Category::Pre,
        name: "ctgan",
        keys: GENERATIVE_KEYS,
        summary: "failures drawn from a conditional GAN",
    },
    Entry {
        category: Category::Pre,
        name: "cvae",
        keys: GENERATIVE_KEYS,
        summary: "failures drawn from a conditional VAE",
    },
    Entry {
        category: Category::In,
        name: "cost_sensitive",
        keys: &[],
        summary: "inverse-frequency class weights",
    },
    Entry {
        category: Category::In,
        name: "bagging",
        keys: &["members"],
        summary: "average of forests on balanced undersamples",
    },
    Entry {
        category: Category::In,
        name: "boosting",
        keys: &["rounds"],
        summary: "AdaBoost over depth-3 forests",
    },
    Entry {
        category: Category::In,
        name: "brf",
        keys: &[],
        summary: "balanced random forest",
    },
    Entry {
        category: Category::In,
        name: "meta",
        keys: &[],
        summary: "forest on features plus a shallow tree's score",
    },
    Entry {
        category: Category::Post,
        name: "threshold",
        keys: &[],
        summary: "threshold tuned for validation F1",
    },
    Entry {
        category: Category::Post,
        name: "cost_threshold",
        keys: &["cfp", "cfn"],
        summary: "Bayes threshold from misclassification costs",
    },
    Entry {
        category: Category::Post,
        name: "reweight",
        keys: &["w0", "w1"],
        summary: "class-reweighted probabilities",
    },
    Entry {
        category: Category::Post,
        name: "calibration",
        keys: &["method"],
        summary: "isotonic or Platt calibration on validation",
    },
    Entry {
        category: Category::Post,
        name: "sample_weighting",
        keys: &[],
        summary: "trees weighted by validation F1",
    },
];

/// A parsed `<category>:<name>[?key=value&...]` string, or `baseline`.
#[derive(Clone, Debug, PartialEq)]
pub struct TechniqueSpec {
    id: String,
    category: Category,
    name: String,
    params: IndexMap<String, String>,
    technique: Technique,
}

impl Serialize for TechniqueSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.id)
    }
}

fn bad(id: &str, why: impl fmt::Display) -> Error {
    Error::Technique(format!("{id}: {why}"))
}

impl TechniqueSpec {
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        let (head, query) = match id.split_once('?') {
            Some((h, q)) => (h, Some(q)),
            None => (id, None),
        };
        let (category, name) = if head == "baseline" {
            (Category::Baseline, "baseline")
        } else {
            let (cat, name) = head
                .split_once(':')
                .ok_or_else(|| bad(id, "expected <category>:<name>"))?;
            let cat = match cat {
                "pre" => Category::Pre,
                "in" => Category::In,
                "post" => Category::Post,
                other => return Err(bad(id, format!("unknown category '{other}'"))),
            };
            (cat, name)
        };
        let entry = CATALOGUE
            .iter()
            .find(|e| e.category == category && e.name == name)
            .ok_or_else(|| bad(id, format!("unknown technique '{name}'")))?;

        let mut params = IndexMap::new();
        for pair in query
            .into_iter()
            .flat_map(|q| q.split('&'))
            .filter(|p| !p.is_empty())
        {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| bad(id, format!("parameter '{pair}' is not key=value")))?;
            if !entry.keys.contains(&k) {
                return Err(bad(id, format!("unknown parameter '{k}'")));
            }
            if params.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(id, format!("parameter '{k}' given twice")));
            }
        }
        let technique = resolve(id, category, name, &params)?;
        Ok(Self {
            id: id.to_string(),
            category,
            name: name.to_string(),
            params,
            technique,
        })
    }

    pub fn baseline() -> Self {
        Self::parse("baseline").expect("baseline parses")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &IndexMap<String, String> {
        &self.params
    }

    pub fn technique(&self) -> &Technique {
        &self.technique
    }

    pub fn is_baseline(&self) -> bool {
        self.category == Category::Baseline
    }
}

impl FromStr for TechniqueSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for TechniqueSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

fn get<T: FromStr>(id: &str, params: &IndexMap<String, String>, key: &str) -> Result<Option<T>> {
    params
        .get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| bad(id, format!("bad value '{v}' for '{key}'")))
        })
        .transpose()
}

fn positive(id: &str, key: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(id, format!("'{key}' must be positive"))),
        other => Ok(other),
    }
}

fn fraction(id: &str, key: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x <= 1.0) => Err(bad(id, format!("'{key}' must lie in (0, 1]"))),
        other => Ok(other),
    }
}

fn at_least_one(id: &str, key: &str, v: Option<usize>) -> Result<Option<usize>> {
    match v {
        Some(0) => Err(bad(id, format!("'{key}' must be at least 1"))),
        other => Ok(other),
    }
}

fn resolve(
    id: &str,
    category: Category,
    name: &str,
    p: &IndexMap<String, String>,
) -> Result<Technique> {
    let t = match (category, name) {
        (Category::Baseline, _) => Technique::Baseline,
        (Category::Pre, "ctgan" | "cvae") => Technique::Generative {
            kind: if name == "ctgan" {
                GenerativeKind::Cgan
            } else {
                GenerativeKind::Cvae
            },
            ratio: fraction(id, "ratio", get(id, p, "ratio")?)?,
            epochs: at_least_one(id, "epochs", get(id, p, "epochs")?)?,
            latent: at_least_one(id, "latent", get(id, p, "latent")?)?,
            hidden: at_least_one(id, "hidden", get(id, p, "hidden")?)?,
            beta: positive(id, "beta", get(id, p, "beta")?)?,
        },
        (Category::Pre, _) => Technique::Resample {
            kind: SamplerKind::from_name(name).ok_or_else(|| bad(id, "unknown sampler"))?,
            ratio: fraction(id, "ratio", get(id, p, "ratio")?)?,
            k: at_least_one(id, "k", get(id, p, "k")?)?,
            clusters: at_least_one(id, "clusters", get(id, p, "clusters")?)?,
            noise: positive(id, "noise", get(id, p, "noise")?)?,
        },
        (Category::In, "cost_sensitive") => Technique::CostSensitive,
        (Category::In, "bagging") => Technique::Bagging {
            members: at_least_one(id, "members", get(id, p, "members")?)?
                .unwrap_or(DEFAULT_BAGGING_MEMBERS),
        },
        (Category::In, "boosting") => Technique::Boosting {
            rounds: at_least_one(id, "rounds", get(id, p, "rounds")?)?
                .unwrap_or(DEFAULT_BOOSTING_ROUNDS),
        },
        (Category::In, "brf") => Technique::BalancedForest,
        (Category::In, _) => Technique::Meta,
        (Category::Post, "threshold") => Technique::Threshold,
        (Category::Post, "cost_threshold") => Technique::CostThreshold {
            cfp: positive(id, "cfp", get(id, p, "cfp")?)?,
            cfn: positive(id, "cfn", get(id, p, "cfn")?)?,
        },
        (Category::Post, "reweight") => Technique::Reweight {
            w0: positive(id, "w0", get(id, p, "w0")?)?,
            w1: positive(id, "w1", get(id, p, "w1")?)?,
        },
        (Category::Post, "calibration") => Technique::Calibration {
            method: match p.get("method").map(String::as_str) {
                None | Some("isotonic") => CalibrationMethod::Isotonic,
                Some("platt") => CalibrationMethod::Platt,
                Some(other) => {
                    return Err(bad(id, format!("unknown calibration method '{other}'")))
                }
            },
        },
        (Category::Post, _) => Technique::SampleWeighting,
    };
    Ok(t)
}

/// Every catalogued technique with default parameters, baseline first.
pub fn all_techniques() -> Vec<TechniqueSpec> {
    CATALOGUE
        .iter()
        .map(|e| {
            let id = if e.category == Category::Baseline {
                e.name.to_string()
            } else {
                format!("{}:{}", e.category, e.name)
            };
            TechniqueSpec::parse(&id).expect("catalogue entries parse")
        })
        .collect()
}

/// `(id, accepted parameters, one-line summary)` for every technique.
pub fn catalogue() -> Vec<(String, Vec<&'static str>, &'static str)> {
    all_techniques()
        .into_iter()
        .zip(CATALOGUE)
        .map(|(t, e)| (t.id, e.keys.to_vec(), e.summary))
        .collect()
}
