use serde::{Deserialize, Serialize};

use crate::Matrix;

/// Per-feature z-scoring fitted on a training fold. Zero-variance columns
/// keep unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &Matrix) -> Self {
        let d = m.cols();
        let n = m.rows().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in m.iter_rows() {
            for (acc, v) in mean.iter_mut().zip(r) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; d];
        for r in m.iter_rows() {
            for j in 0..d {
                let e = r[j] - mean[j];
                var[j] += e * e;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn transform(&self, m: &Matrix) -> Matrix {
        let mut out = Matrix::with_cols(m.cols());
        for r in m.iter_rows() {
            out.push_row(&self.transform_row(r)).expect("same width");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_roundtrip_and_constant_column() {
        let m = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&m);
        assert_eq!(s.mean(), &[2.0, 5.0]);
        assert_eq!(s.std(), &[1.0, 1.0]);
        let z = s.transform_row(&[3.0, 5.0]);
        assert_eq!(z, vec![1.0, 0.0]);
        assert_eq!(s.inverse_row(&z), vec![3.0, 5.0]);
    }
}
