//! Pre-processing samplers: each maps a training fold to a new training
//! fold before any model sees it.
//!
//! Distances (k-NN, k-means, Tomek links) are Euclidean on features z-scored
//! with statistics of the input fold, so BER columns at the 1e-6 scale are
//! not swamped by dB-scale OSNR and power columns.

mod kmeans;
mod neighbors;
mod over;
mod relabel;
mod under;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::forest::ForestModel;
use crate::{Error, Result};

pub use kmeans::{kmeans, KMeans};
pub use neighbors::nearest;
pub use over::{adasyn, interpolate, largest_remainder, perturbation, ros, smote};
pub use relabel::{cluster_massaging, massaging, massaging_budget};
pub use under::{cluster_centroids, rus, smote_tomek, tomek_links};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Ros,
    Rus,
    Smote,
    Adasyn,
    ClusterCentroids,
    SmoteTomek,
    Massaging,
    Perturbation,
    ClusterMassaging,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 9] = [
        SamplerKind::Ros,
        SamplerKind::Rus,
        SamplerKind::Smote,
        SamplerKind::Adasyn,
        SamplerKind::ClusterCentroids,
        SamplerKind::SmoteTomek,
        SamplerKind::Massaging,
        SamplerKind::Perturbation,
        SamplerKind::ClusterMassaging,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ros => "ros",
            SamplerKind::Rus => "rus",
            SamplerKind::Smote => "smote",
            SamplerKind::Adasyn => "adasyn",
            SamplerKind::ClusterCentroids => "cluster_centroids",
            SamplerKind::SmoteTomek => "smote_tomek",
            SamplerKind::Massaging => "massaging",
            SamplerKind::Perturbation => "perturbation",
            SamplerKind::ClusterMassaging => "cluster_massaging",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Label-editing samplers change labels, never the row multiset.
    pub fn edits_labels(self) -> bool {
        matches!(self, SamplerKind::Massaging | SamplerKind::ClusterMassaging)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Desired failure/normal count ratio after sampling, in (0, 1].
    pub target_ratio: f64,
    pub k_neighbors: usize,
    /// Cluster count; `None` means round(n_failure / target_ratio) for
    /// cluster centroids and 10 for cluster massaging.
    pub n_clusters: Option<usize>,
    /// Perturbation noise, in units of each feature's standard deviation.
    pub noise_scale: f64,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind) -> Self {
        Self {
            kind,
            target_ratio: 1.0,
            k_neighbors: 5,
            n_clusters: None,
            noise_scale: 0.1,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.target_ratio = ratio;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "target ratio must lie in (0, 1], got {}",
                self.target_ratio
            )));
        }
        if self.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be >= 1".into()));
        }
        if self.n_clusters == Some(0) {
            return Err(Error::Config("n_clusters must be >= 1".into()));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::Config("noise_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Where a synthetic row came from. Indices refer to rows of the sampler's
/// input; `row` indexes the output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Origin {
    pub row: usize,
    pub parent: usize,
    /// Interpolation partner for SMOTE-style rows.
    pub neighbor: Option<usize>,
    /// Position on the parent→neighbor segment.
    pub lambda: f64,
}

/// Output of a sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct Resampled {
    pub data: Dataset,
    /// One record per synthetic row (empty for samplers that create none).
    pub origins: Vec<Origin>,
}

impl Resampled {
    fn plain(data: Dataset) -> Self {
        Self {
            data,
            origins: Vec::new(),
        }
    }
}

/// Runs the sampler described by `spec`. Massaging needs a `ranker` trained
/// on `d`.
pub fn resample(
    d: &Dataset,
    spec: &SamplerSpec,
    ranker: Option<&ForestModel>,
) -> Result<Resampled> {
    spec.validate()?;
    match spec.kind {
        SamplerKind::Ros => ros(d, spec),
        SamplerKind::Rus => rus(d, spec),
        SamplerKind::Smote => smote(d, spec),
        SamplerKind::Adasyn => adasyn(d, spec),
        SamplerKind::ClusterCentroids => cluster_centroids(d, spec),
        SamplerKind::SmoteTomek => smote_tomek(d, spec),
        SamplerKind::Massaging => {
            let ranker =
                ranker.ok_or_else(|| Error::Config("massaging needs a ranker model".into()))?;
            massaging(d, spec, ranker)
        }
        SamplerKind::Perturbation => perturbation(d, spec),
        SamplerKind::ClusterMassaging => cluster_massaging(d, spec),
    }
}

fn require_both(d: &Dataset) -> Result<()> {
    if d.n_normal() == 0 {
        return Err(Error::TooFewSamples {
            class: 0,
            count: 0,
            needed: 1,
        });
    }
    Ok(())
}

/// Failure count that meets the target ratio against the current normals.
fn minority_target(d: &Dataset, ratio: f64) -> usize {
    (ratio * d.n_normal() as f64).round() as usize
}
