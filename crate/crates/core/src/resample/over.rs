use rand::Rng as _;
use rand_distr::StandardNormal;

use super::neighbors::nearest;
use super::{minority_target, require_both, Origin, Resampled, SamplerSpec};
use crate::dataset::{Dataset, Standardizer, FAILURE, NORMAL};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// `a + λ (b − a)`.
pub fn interpolate(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + lambda * (y - x)).collect()
}

/// Splits `total` into integer shares proportional to `weights`, handing the
/// leftover units to the largest fractional remainders (lower index first on
/// ties). Uniform shares when every weight is zero.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let norm: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum).collect()
    } else {
        vec![1.0 / weights.len() as f64; weights.len()]
    };
    let raw: Vec<f64> = norm.iter().map(|w| w * total as f64).collect();
    let mut quotas: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        quotas[i] += 1;
    }
    quotas
}

/// Parent draws shared by ROS and perturbation so that zero-noise
/// perturbation reproduces ROS exactly.
fn duplicate_parents(d: &Dataset, spec: &SamplerSpec) -> Vec<usize> {
    let minority = d.indices_of(FAILURE);
    let need = minority_target(d, spec.target_ratio).saturating_sub(minority.len());
    let mut rng = seeded(spec.seed);
    (0..need)
        .map(|_| minority[rng.random_range(0..minority.len())])
        .collect()
}

fn append_synthetic(
    d: &Dataset,
    rows: Vec<Vec<f64>>,
    mut origins: Vec<Origin>,
) -> Result<Resampled> {
    let base = d.len();
    for (i, o) in origins.iter_mut().enumerate() {
        o.row = base + i;
    }
    Ok(Resampled {
        data: d.append_rows(&rows, FAILURE)?,
        origins,
    })
}

/// Random over-sampling: duplicates failure rows uniformly with replacement.
pub fn ros(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    require_both(d)?;
    let parents = duplicate_parents(d, spec);
    let rows = parents.iter().map(|&p| d.row(p).to_vec()).collect();
    let origins = parents
        .iter()
        .map(|&parent| Origin {
            row: 0,
            parent,
            neighbor: None,
            lambda: 0.0,
        })
        .collect();
    append_synthetic(d, rows, origins)
}

/// ROS with additive Gaussian noise of `noise_scale` × per-feature std on
/// every duplicate.
pub fn perturbation(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    require_both(d)?;
    let parents = duplicate_parents(d, spec);
    let scaler = Standardizer::fit(d.features());
    let mut noise = seeded(derive_seed(spec.seed, 1));
    let rows = parents
        .iter()
        .map(|&p| {
            d.row(p)
                .iter()
                .zip(scaler.std())
                .map(|(v, s)| {
                    let z: f64 = noise.sample(StandardNormal);
                    v + spec.noise_scale * s * z
                })
                .collect()
        })
        .collect();
    let origins = parents
        .iter()
        .map(|&parent| Origin {
            row: 0,
            parent,
            neighbor: None,
            lambda: 0.0,
        })
        .collect();
    append_synthetic(d, rows, origins)
}

struct MinorityGeometry {
    minority: Vec<usize>,
    /// k nearest failure rows of each failure row (positions in `minority`
    /// order, values are row indices).
    neighbors: Vec<Vec<usize>>,
    z: crate::Matrix,
}

fn minority_geometry(d: &Dataset, spec: &SamplerSpec) -> Result<MinorityGeometry> {
    require_both(d)?;
    let minority = d.indices_of(FAILURE);
    if minority.len() < 2 {
        return Err(Error::TooFewSamples {
            class: FAILURE,
            count: minority.len(),
            needed: 2,
        });
    }
    let k = spec.k_neighbors.min(minority.len() - 1);
    let z = Standardizer::fit(d.features()).transform(d.features());
    let neighbors = minority
        .iter()
        .map(|&i| nearest(&z, z.row(i), &minority, k, Some(i)))
        .collect();
    Ok(MinorityGeometry {
        minority,
        neighbors,
        z,
    })
}

/// SMOTE: each synthetic row is `x_i + λ (x_nn − x_i)` for a uniformly drawn
/// failure row `x_i`, one of its k nearest failure neighbours and
/// `λ ~ U[0, 1)`.
pub fn smote(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    let g = minority_geometry(d, spec)?;
    let need = minority_target(d, spec.target_ratio).saturating_sub(g.minority.len());
    let mut rng = seeded(spec.seed);
    let mut rows = Vec::with_capacity(need);
    let mut origins = Vec::with_capacity(need);
    for _ in 0..need {
        let a = rng.random_range(0..g.minority.len());
        let nb = &g.neighbors[a];
        let j = nb[rng.random_range(0..nb.len())];
        let lambda: f64 = rng.random();
        let parent = g.minority[a];
        rows.push(interpolate(d.row(parent), d.row(j), lambda));
        origins.push(Origin {
            row: 0,
            parent,
            neighbor: Some(j),
            lambda,
        });
    }
    append_synthetic(d, rows, origins)
}

/// Per-failure-row difficulty: the fraction of normal rows among its k
/// nearest neighbours over the whole fold.
pub(crate) fn adasyn_difficulty(
    d: &Dataset,
    z: &crate::Matrix,
    minority: &[usize],
    k: usize,
) -> Vec<f64> {
    let all: Vec<usize> = (0..d.len()).collect();
    let k = k.min(d.len() - 1);
    minority
        .iter()
        .map(|&i| {
            let nb = nearest(z, z.row(i), &all, k, Some(i));
            nb.iter().filter(|&&j| d.labels()[j] == NORMAL).count() as f64 / k as f64
        })
        .collect()
}

/// ADASYN: SMOTE-style generation with per-row quotas proportional to the
/// row's difficulty (uniform if no row has any normal neighbour).
pub fn adasyn(d: &Dataset, spec: &SamplerSpec) -> Result<Resampled> {
    let g = minority_geometry(d, spec)?;
    let need = minority_target(d, spec.target_ratio).saturating_sub(g.minority.len());
    let difficulty = adasyn_difficulty(d, &g.z, &g.minority, spec.k_neighbors);
    let quotas = largest_remainder(&difficulty, need);
    let mut rng = seeded(spec.seed);
    let mut rows = Vec::with_capacity(need);
    let mut origins = Vec::with_capacity(need);
    for (a, &q) in quotas.iter().enumerate() {
        let parent = g.minority[a];
        let nb = &g.neighbors[a];
        for _ in 0..q {
            let j = nb[rng.random_range(0..nb.len())];
            let lambda: f64 = rng.random();
            rows.push(interpolate(d.row(parent), d.row(j), lambda));
            origins.push(Origin {
                row: 0,
                parent,
                neighbor: Some(j),
                lambda,
            });
        }
    }
    append_synthetic(d, rows, origins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnSchema;
    use crate::resample::SamplerKind;
    use crate::Matrix;

    fn ds(rows: &[Vec<f64>], labels: &[u8]) -> Dataset {
        let names: Vec<String> = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        Dataset::new(
            ColumnSchema::continuous(&names, "y").unwrap(),
            Matrix::from_rows(rows).unwrap(),
            labels.to_vec(),
        )
        .unwrap()
    }

    fn grid(n0: usize, n1: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n0 {
            rows.push(vec![(i % 10) as f64, (i / 10) as f64]);
            labels.push(0);
        }
        for i in 0..n1 {
            rows.push(vec![20.0 + (i % 3) as f64, 0.5 * i as f64]);
            labels.push(1);
        }
        ds(&rows, &labels)
    }

    #[test]
    fn midpoint_interpolation() {
        assert_eq!(interpolate(&[0.0, 0.0], &[1.0, 1.0], 0.5), vec![0.5, 0.5]);
    }

    #[test]
    fn ros_counts_and_duplicates() {
        let d = grid(100, 10);
        let out = ros(&d, &SamplerSpec::new(SamplerKind::Ros).with_seed(4)).unwrap();
        assert_eq!(out.data.class_counts(), (100, 100));
        for o in &out.origins {
            assert_eq!(out.data.row(o.row), d.row(o.parent));
        }
        let balanced = grid(100, 100);
        let same = ros(&balanced, &SamplerSpec::new(SamplerKind::Ros)).unwrap();
        assert_eq!(same.data, balanced);
    }

    #[test]
    fn smote_counts_and_bounding_box() {
        let d = grid(100, 10);
        let out = smote(&d, &SamplerSpec::new(SamplerKind::Smote).with_seed(9)).unwrap();
        assert_eq!(out.data.class_counts(), (100, 100));
        assert_eq!(out.origins.len(), 90);
        let minority = d.indices_of(FAILURE);
        for j in 0..2 {
            let lo = minority
                .iter()
                .map(|&i| d.row(i)[j])
                .fold(f64::MAX, f64::min);
            let hi = minority
                .iter()
                .map(|&i| d.row(i)[j])
                .fold(f64::MIN, f64::max);
            for o in &out.origins {
                let v = out.data.row(o.row)[j];
                assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn smote_needs_two_failures() {
        let d = grid(10, 1);
        assert!(matches!(
            smote(&d, &SamplerSpec::new(SamplerKind::Smote)),
            Err(Error::TooFewSamples { class: 1, .. })
        ));
    }

    #[test]
    fn perturbation_zero_noise_is_ros() {
        let d = grid(100, 10);
        let mut spec = SamplerSpec::new(SamplerKind::Perturbation).with_seed(5);
        spec.noise_scale = 0.0;
        let p = perturbation(&d, &spec).unwrap();
        let r = ros(&d, &spec).unwrap();
        assert_eq!(p.data, r.data);
        spec.noise_scale = 0.1;
        assert_eq!(
            perturbation(&d, &spec).unwrap().data.class_counts(),
            (100, 100)
        );
    }

    #[test]
    fn largest_remainder_allocation() {
        // raw shares 2.5, 1.25, 1.25, 0, 0 of 5 → floors 2,1,1,0,0 and the
        // single leftover goes to the 0.5 remainder
        let q = largest_remainder(&[0.5, 0.25, 0.25, 0.0, 0.0], 5);
        assert_eq!(q, vec![3, 1, 1, 0, 0]);
        // equal remainders: lower index wins
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 3), vec![2, 1]);
    }

    #[test]
    fn adasyn_zero_weight_for_safe_points() {
        // failure 0..2 sit deep inside their own cluster, failure 3 among normals
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.2, 0.0],
            vec![0.3, 0.0],
            vec![0.0, 0.1],
            vec![10.0, 10.0],
            vec![10.1, 10.0],
            vec![10.0, 10.1],
            vec![10.1, 10.1],
            vec![10.05, 10.05],
        ];
        let labels = [1, 1, 1, 0, 1, 0, 0, 0, 1, 0];
        let d = ds(&rows, &labels);
        let z = Standardizer::fit(d.features()).transform(d.features());
        let minority = d.indices_of(FAILURE);
        let w = adasyn_difficulty(&d, &z, &minority, 3);
        // rows 0, 1 and 4 see only failures; row 2 reaches normal row 3;
        // row 8 sits among normals
        assert_eq!(w, vec![0.0, 0.0, 1.0 / 3.0, 0.0, 1.0]);
        assert_eq!(largest_remainder(&w, 8), vec![0, 0, 2, 0, 6]);
        // already balanced: nothing to add
        let out = adasyn(
            &d,
            &SamplerSpec {
                k_neighbors: 3,
                ..SamplerSpec::new(SamplerKind::Adasyn)
            },
        )
        .unwrap();
        assert_eq!(out.data, d);
    }

    #[test]
    fn adasyn_all_safe_points_get_nothing() {
        let rows = vec![
            vec![0.0],
            vec![0.1],
            vec![0.2],
            vec![0.3],
            vec![9.0],
            vec![9.1],
            vec![9.2],
            vec![9.3],
            vec![9.4],
        ];
        let labels = [1, 1, 1, 1, 0, 0, 0, 0, 0];
        let d = ds(&rows, &labels);
        let z = Standardizer::fit(d.features()).transform(d.features());
        let w = adasyn_difficulty(&d, &z, &d.indices_of(FAILURE), 2);
        assert!(w.iter().all(|&v| v == 0.0));
        // uniform fallback
        assert_eq!(largest_remainder(&w, 1), vec![1, 0, 0, 0]);
    }

    #[test]
    fn perturbation_residual_spread() {
        let d = grid(1200, 10);
        let out = perturbation(
            &d,
            &SamplerSpec::new(SamplerKind::Perturbation).with_seed(2),
        )
        .unwrap();
        assert_eq!(out.origins.len(), 1190);
        let std = Standardizer::fit(d.features()).std().to_vec();
        for j in 0..2 {
            let res: Vec<f64> = out
                .origins
                .iter()
                .map(|o| out.data.row(o.row)[j] - d.row(o.parent)[j])
                .collect();
            let mean = res.iter().sum::<f64>() / res.len() as f64;
            let var = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (res.len() - 1) as f64;
            let want = 0.1 * std[j];
            assert!(
                (var.sqrt() - want).abs() <= 0.2 * want,
                "feature {j}: {} vs {want}",
                var.sqrt()
            );
        }
    }
}
