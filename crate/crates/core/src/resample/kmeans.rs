use rand::Rng as _;

use super::neighbors::sq_dist;
use crate::rng::seeded;
use crate::{Error, Matrix, Result};

const MAX_ITER: usize = 300;
const TOL: f64 = 1e-6;

/// Lloyd's k-means with k-means++ seeding.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Matrix,
    /// Cluster index per input row.
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

/// Clusters the rows of `points` into `k` groups. Stops after 300
/// iterations or once no centroid moves more than 1e-6. Assignment ties go
/// to the lower centroid index; an empty cluster is re-seeded with the point
/// farthest from its current centroid.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<KMeans> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k = {k} with {n} points")));
    }
    let mut rng = seeded(seed);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut dist = vec![0.0; n];
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        assign(points, &centroids, &mut assignments, &mut dist);

        let d = points.cols();
        let mut sums = Matrix::zeros(k, d);
        let mut sizes = vec![0usize; k];
        for (r, &c) in points.iter_rows().zip(&assignments) {
            sizes[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] == 0 {
                // steal the worst-fitted point
                let far = (0..n)
                    .filter(|&i| sizes[assignments[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    let old = assignments[i];
                    sizes[old] -= 1;
                    for (s, v) in sums.row_mut(old).iter_mut().zip(points.row(i)) {
                        *s -= v;
                    }
                    assignments[i] = c;
                    dist[i] = 0.0;
                    sizes[c] = 1;
                    sums.row_mut(c).copy_from_slice(points.row(i));
                }
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if sizes[c] == 0 {
                continue;
            }
            let inv = 1.0 / sizes[c] as f64;
            let new: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
            shift = shift.max(sq_dist(&new, centroids.row(c)).sqrt());
            centroids.row_mut(c).copy_from_slice(&new);
        }
        if shift <= TOL {
            break;
        }
    }
    assign(points, &centroids, &mut assignments, &mut dist);
    Ok(KMeans {
        centroids,
        assignments,
        iterations,
    })
}

fn assign(points: &Matrix, centroids: &Matrix, assignments: &mut [usize], dist: &mut [f64]) {
    for (i, r) in points.iter_rows().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for (c, cr) in centroids.iter_rows().enumerate() {
            let d = sq_dist(r, cr);
            if d < best.0 {
                best = (d, c);
            }
        }
        assignments[i] = best.1;
        dist[i] = best.0;
    }
}

fn plus_plus(points: &Matrix, k: usize, rng: &mut crate::rng::Rng) -> Matrix {
    let n = points.rows();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = Matrix::with_cols(points.cols());
    centroids.push_row(points.row(first)).expect("width");
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|r| sq_dist(r, points.row(first)))
        .collect();
    while centroids.rows() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if u < w {
                    break;
                }
                u -= w;
            }
            pick.expect("positive mass")
        } else {
            // every remaining point coincides with a centroid
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[next] = true;
        centroids.push_row(points.row(next)).expect("width");
        for (i, r) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, points.row(next)));
        }
    }
    centroids
}
