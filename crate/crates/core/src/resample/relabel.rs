use super::kmeans::kmeans;
use super::neighbors::sq_dist;
use super::{require_both, Resampled, SamplerSpec};
use crate::dataset::{Dataset, Standardizer, FAILURE, NORMAL};
use crate::forest::ForestModel;
use crate::{Error, Result};

const FLIP_CAP: f64 = 0.1;
const DEFAULT_MASSAGING_CLUSTERS: usize = 10;

/// Number of normal→failure flips:
/// `min(⌈(ratio·n_normal − n_failure) / (1 + ratio)⌉, ⌊0.1·n_normal⌋)`, or 0
/// when the target already holds.
pub fn massaging_budget(n_normal: usize, n_failure: usize, ratio: f64) -> usize {
    let gap = ratio * n_normal as f64 - n_failure as f64;
    if gap <= 0.0 {
        return 0;
    }
    // tolerate representation error before the ceiling
    let requested = (gap / (1.0 + ratio) - 1e-9).ceil().max(0.0) as usize;
    let cap = (FLIP_CAP * n_normal as f64 + 1e-9).floor() as usize;
    requested.min(cap)
}

/// Flips the normal rows the ranker scores most failure-like (ties to the
/// lower row index). Features are untouched.
pub fn massaging(d: &Dataset, spec: &SamplerSpec, ranker: &ForestModel) -> Result<Resampled> {
    require_both(d)?;
    let m = massaging_budget(d.n_normal(), d.n_failure(), spec.target_ratio);
    if m == 0 {
        return Ok(Resampled::plain(d.clone()));
    }
    let scores = ranker.predict_proba(d.features())?;
    let mut candidates = d.indices_of(NORMAL);
    candidates.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut labels = d.labels().to_vec();
    for &i in candidates.iter().take(m) {
        labels[i] = FAILURE;
    }
    Ok(Resampled::plain(d.relabel(labels)?))
}

/// Cluster-based massaging. Rows are clustered with k-means; in every
/// cluster whose failure fraction exceeds the global one (most enriched
/// first), normal rows nearest the centroid are flipped until the cluster
/// is balanced, or, for a cluster already dominated by failures, until it
/// holds no normal rows. The global [`massaging_budget`] bounds the total.
pub fn cluster_massaging(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    require_both(d)?;
    let k = spec.n_clusters.unwrap_or(DEFAULT_MASSAGING_CLUSTERS);
    if d.len() < k {
        return Err(Error::Config(format!("{k} clusters from {} rows", d.len())));
    }
    let mut budget = massaging_budget(d.n_normal(), d.n_failure(), spec.target_ratio);
    if budget == 0 {
        return Ok(Resampled::plain(d.clone()));
    }
    let z = Standardizer::fit(d.features()).transform(d.features());
    let km = kmeans(&z, k, spec.seed)?;
    let global = d.n_failure() as f64 / d.len() as f64;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in km.assignments.iter().enumerate() {
        members[c].push(i);
    }
    let fraction = |c: usize| {
        let m = &members[c];
        let f = m.iter().filter(|&&i| d.labels()[i] == FAILURE).count();
        if m.is_empty() {
            0.0
        } else {
            f as f64 / m.len() as f64
        }
    };
    let mut clusters: Vec<usize> = (0..k).filter(|&c| fraction(c) > global).collect();
    clusters.sort_by(|&a, &b| fraction(b).total_cmp(&fraction(a)).then(a.cmp(&b)));

    let mut labels = d.labels().to_vec();
    for c in clusters {
        if budget == 0 {
            break;
        }
        let mut normals: Vec<usize> = members[c]
            .iter()
            .copied()
            .filter(|&i| labels[i] == NORMAL)
            .collect();
        let n_fail = members[c].len() - normals.len();
        let want = if normals.len() > n_fail {
            (normals.len() - n_fail).div_ceil(2)
        } else {
            normals.len()
        };
        let centroid = km.centroids.row(c);
        normals.sort_by(|&a, &b| {
            sq_dist(z.row(a), centroid)
                .total_cmp(&sq_dist(z.row(b), centroid))
                .then(a.cmp(&b))
        });
        for &i in normals.iter().take(want.min(budget)) {
            labels[i] = FAILURE;
            budget -= 1;
        }
    }
    Ok(Resampled::plain(d.relabel(labels)?))
}
