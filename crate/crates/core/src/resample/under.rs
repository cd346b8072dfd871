use super::kmeans::kmeans;
use super::neighbors::nearest;
use super::over::smote;
use super::{require_both, Origin, Resampled, SamplerSpec};
use crate::dataset::{Dataset, Standardizer, FAILURE, NORMAL};
use crate::rng::seeded;
use crate::{Error, Matrix, Result};

fn majority_target(d: &Dataset, ratio: f64) -> usize {
    (d.n_failure() as f64 / ratio).round() as usize
}

/// Random under-sampling: keeps round(n_failure / ratio) normal rows drawn
/// without replacement; row order is preserved.
pub fn rus(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    require_both(d)?;
    let majority = d.indices_of(NORMAL);
    let keep = majority_target(d, spec.target_ratio);
    if keep >= majority.len() {
        return Ok(Resampled::plain(d.clone()));
    }
    let mut rng = seeded(spec.seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, majority.len(), keep)
        .into_iter()
        .map(|i| majority[i])
        .collect();
    picked.extend(d.indices_of(FAILURE));
    picked.sort_unstable();
    Ok(Resampled::plain(d.subset(&picked)?))
}

/// Replaces the normal rows by the centroids of a k-means clustering of
/// them (clustered in z-space, centroids reported in feature units).
pub fn cluster_centroids(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    require_both(d)?;
    let majority = d.indices_of(NORMAL);
    let k = spec
        .n_clusters
        .unwrap_or_else(|| majority_target(d, spec.target_ratio))
        .max(1);
    if k > majority.len() {
        return Err(Error::Config(format!(
            "{k} clusters requested from {} normal rows",
            majority.len()
        )));
    }
    let scaler = Standardizer::fit(d.features());
    let maj = d.features().select_rows(&majority);
    let km = kmeans(&scaler.transform(&maj), k, spec.seed)?;
    let mut sums = Matrix::zeros(k, d.n_features());
    let mut sizes = vec![0usize; k];
    for (r, &c) in maj.iter_rows().zip(&km.assignments) {
        sizes[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(r) {
            *s += v;
        }
    }
    let mut features = Matrix::with_cols(d.n_features());
    let mut labels = Vec::with_capacity(k + d.n_failure());
    for c in 0..k {
        let row: Vec<f64> = if sizes[c] > 0 {
            sums.row(c).iter().map(|s| s / sizes[c] as f64).collect()
        } else {
            scaler.inverse_row(km.centroids.row(c))
        };
        features.push_row(&row)?;
        labels.push(NORMAL);
    }
    for i in d.indices_of(FAILURE) {
        features.push_row(d.row(i))?;
        labels.push(FAILURE);
    }
    Ok(Resampled::plain(Dataset::new(
        d.schema().clone(),
        features,
        labels,
    )?))
}

/// Pairs `(i, j)` of opposite-class rows that are each other's nearest
/// neighbour, as `(failure row, normal row)`.
pub fn tomek_links(points: &Matrix, labels: &[u8]) -> Vec<(usize, usize)> {
    let all: Vec<usize> = (0..points.rows()).collect();
    let nn = |i: usize| {
        nearest(points, points.row(i), &all, 1, Some(i))
            .first()
            .copied()
    };
    let mut links = Vec::new();
    for i in (0..points.rows()).filter(|&i| labels[i] == FAILURE) {
        let Some(j) = nn(i) else { continue };
        if labels[j] == NORMAL && nn(j) == Some(i) {
            links.push((i, j));
        }
    }
    links
}

/// SMOTE followed by removal of the normal member of every Tomek link.
pub fn smote_tomek(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    let over = smote(d, spec)?;
    let scaler = Standardizer::fit(d.features());
    let z = scaler.transform(over.data.features());
    let links = tomek_links(&z, over.data.labels());
    if links.is_empty() {
        return Ok(over);
    }
    let mut drop = vec![false; over.data.len()];
    for &(_, j) in &links {
        drop[j] = true;
    }
    let keep: Vec<usize> = (0..over.data.len()).filter(|&i| !drop[i]).collect();
    let mut new_index = vec![usize::MAX; over.data.len()];
    for (n, &i) in keep.iter().enumerate() {
        new_index[i] = n;
    }
    let origins = over
        .origins
        .iter()
        .map(|o| Origin {
            row: new_index[o.row],
            ..*o
        })
        .collect();
    Ok(Resampled {
        data: over.data.subset(&keep)?,
        origins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSchema;
    use crate::resample::SamplerKind;

    fn ds(rows: &[Vec<f64>], labels: &[u8]) -> Dataset {
        let names: Vec<String> = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        Dataset::new(
            ColumnSchema::continuous(&names, "y").unwrap(),
            Matrix::from_rows(rows).unwrap(),
            labels.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn rus_subset_and_counts() {
        let rows: Vec<Vec<f64>> = (0..110).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..110).map(|i| u8::from(i >= 100)).collect();
        let d = ds(&rows, &labels);
        let out = rus(&d, &SamplerSpec::new(SamplerKind::Rus).with_seed(3)).unwrap();
        assert_eq!(out.data.class_counts(), (10, 10));
        for r in out.data.features().iter_rows() {
            let i = r[0] as usize;
            assert_eq!(d.row(i), r);
        }
    }

    #[test]
    fn one_dimensional_tomek_link() {
        let pts = Matrix::from_rows(&[[0.0], [0.1], [1.0]]).unwrap();
        assert_eq!(tomek_links(&pts, &[0, 1, 0]), vec![(1, 0)]);
        // wide margin: no mutual cross-class neighbours
        let pts = Matrix::from_rows(&[[0.0], [0.1], [5.0], [5.1]]).unwrap();
        assert!(tomek_links(&pts, &[0, 0, 1, 1]).is_empty());
    }

    #[test]
    fn separated_classes_smote_tomek_equals_smote() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            rows.push(vec![(i % 6) as f64 * 0.1, (i / 6) as f64 * 0.1]);
            labels.push(0);
        }
        for i in 0..6 {
            rows.push(vec![50.0 + i as f64 * 0.1, 50.0]);
            labels.push(1);
        }
        let d = ds(&rows, &labels);
        let spec = SamplerSpec::new(SamplerKind::SmoteTomek).with_seed(2);
        assert_eq!(smote_tomek(&d, &spec).unwrap(), smote(&d, &spec).unwrap());
    }

    #[test]
    fn two_tight_clusters() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..50 {
            let e = 0.01 * ((i % 7) as f64 - 3.0);
            rows.push(vec![e, -e]);
            rows.push(vec![10.0 + e, 10.0 + e]);
            labels.extend([0, 0]);
        }
        rows.push(vec![5.0, 0.0]);
        rows.push(vec![5.0, 1.0]);
        labels.extend([1, 1]);
        let d = ds(&rows, &labels);
        let out = cluster_centroids(&d, &SamplerSpec::new(SamplerKind::ClusterCentroids)).unwrap();
        assert_eq!(out.data.class_counts(), (2, 2));
        let mut c: Vec<Vec<f64>> = (0..2).map(|i| out.data.row(i).to_vec()).collect();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (got, want) in c.iter().zip([[0.0, 0.0], [10.0, 10.0]]) {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 0.03, "{got:?}");
            }
        }
    }

    #[test]
    fn centroid_count_exceeding_majority_is_error() {
        let d = ds(&[vec![0.0], vec![1.0], vec![2.0]], &[0, 1, 1]);
        let spec = SamplerSpec {
            n_clusters: Some(2),
            ..SamplerSpec::new(SamplerKind::ClusterCentroids)
        };
        assert!(cluster_centroids(&d, &spec).is_err());
    }
}
