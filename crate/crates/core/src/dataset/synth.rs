use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ColumnSchema, Dataset, FAILURE, NORMAL};
use crate::rng::{derive_seed, seeded, Rng};
use crate::{Error, Matrix, Result};

/// Continuous features emitted by [`generate_synthetic`], in column order.
pub const FEATURE_NAMES: [&str; 12] = [
    "ber_tx", "osnr_tx", "ber_rx", "osnr_rx", "oa1_in", "oa1_out", "oa2_in", "oa2_out", "oa3_in",
    "oa3_out", "oa4_in", "oa4_out",
];

const LABEL_NAME: &str = "failure";

// (mean, spread) of the normal class per feature
const NORMAL_STATS: [(f64, f64); 12] = [
    (2.0e-7, 0.3e-7),
    (32.0, 0.5),
    (2.0e-6, 0.25e-6),
    (20.0, 1.0),
    (0.0, 0.2),
    (17.0, 0.2),
    (-3.0, 0.3),
    (17.0, 0.2),
    (-3.0, 0.3),
    (17.0, 0.2),
    (-3.0, 0.3),
    (5.0, 0.2),
];

// failure-class mean offset per feature, in spreads per unit of separation;
// the WSS sits between OA2 and OA3 so only receiver-side telemetry moves
const FAILURE_DIRECTION: [f64; 12] = [
    0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0, -0.3, 0.0, -0.3, 0.0,
];

const BER_OSNR_CORRELATION: f64 = -0.8;
const TRUNCATION: f64 = 4.0;
// shape of the overlap -> separation curve; overlap 0.5 gives a shift of
// about 2.1 spreads
const SEPARATION_EXPONENT: f64 = 2.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_normal: usize,
    pub n_failure: usize,
    /// Extra measurement jitter, relative to each feature's spread.
    pub noise_scale: f64,
    /// 0 = classes separable on `osnr_rx`, 1 = identical class distributions.
    pub overlap: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        // class counts of the cleaned testbed corpus
        Self {
            n_normal: 7859,
            n_failure: 194,
            noise_scale: 0.1,
            overlap: 0.5,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_failure < 2 || self.n_normal < self.n_failure {
            return Err(Error::Config(format!(
                "need n_normal >= n_failure >= 2, got {}/{}",
                self.n_normal, self.n_failure
            )));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::Config("noise_scale must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Config("overlap must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Failure-class mean shift of `osnr_rx`, in spreads. At overlap 0 it
    /// exceeds the full width of the truncated noise, so the classes cannot
    /// touch.
    pub fn separation(&self) -> f64 {
        let reach = 2.0 * TRUNCATION * (1.0 + self.noise_scale);
        (reach + 1.0) * (1.0 - self.overlap).powf(SEPARATION_EXPONENT)
    }
}

fn truncated_normal(rng: &mut Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= TRUNCATION {
            return z;
        }
    }
}

/// Two-Gaussian stand-in for end-to-end testbed telemetry. Failure rows have
/// degraded receiver OSNR, elevated receiver BER and lower downstream OA input
/// power; BER and OSNR are negatively correlated within each class.
///
/// Random draws do not depend on `overlap` or the class shift, so configs
/// differing only in `overlap` share their noise realisation.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.n_normal + cfg.n_failure;
    let mut labels = vec![NORMAL; cfg.n_normal];
    labels.extend(std::iter::repeat_n(FAILURE, cfg.n_failure));
    labels.shuffle(&mut seeded(derive_seed(cfg.seed, 0)));

    let mut rng = seeded(derive_seed(cfg.seed, 1));
    let shift = cfg.separation();
    let rho = BER_OSNR_CORRELATION;
    let rho_c = (1.0 - rho * rho).sqrt();
    let mut features = Matrix::with_cols(FEATURE_NAMES.len());
    let mut z = [0.0; 12];
    let mut row = [0.0; 12];
    for &y in &labels {
        for v in z.iter_mut() {
            *v = truncated_normal(&mut rng);
        }
        // ber columns mix in the paired osnr draw
        let (ber_tx, ber_rx) = (rho * z[1] + rho_c * z[0], rho * z[3] + rho_c * z[2]);
        z[0] = ber_tx;
        z[2] = ber_rx;
        for j in 0..12 {
            let jitter = cfg.noise_scale * truncated_normal(&mut rng);
            let offset = if y == FAILURE {
                shift * FAILURE_DIRECTION[j]
            } else {
                0.0
            };
            let (mean, spread) = NORMAL_STATS[j];
            row[j] = mean + spread * (z[j] + jitter + offset);
        }
        features.push_row(&row)?;
    }
    debug_assert_eq!(features.rows(), n);
    let schema = ColumnSchema::continuous(&FEATURE_NAMES, LABEL_NAME)?;
    Dataset::new(schema, features, labels)
}

/// Difference of class means of `osnr_rx` (normal minus failure) over the
/// pooled within-class standard deviation.
pub fn separation_statistic(d: &Dataset) -> Result<f64> {
    let col = d
        .schema()
        .names()
        .iter()
        .position(|n| n == "osnr_rx")
        .ok_or_else(|| Error::Schema("no osnr_rx column".into()))?;
    let mut stats = [(0usize, 0.0f64, 0.0f64); 2];
    for (r, &y) in d.features().iter_rows().zip(d.labels()) {
        let s = &mut stats[y as usize];
        s.0 += 1;
        s.1 += r[col];
    }
    let means = [
        stats[0].1 / stats[0].0 as f64,
        stats[1].1 / stats[1].0 as f64,
    ];
    for (r, &y) in d.features().iter_rows().zip(d.labels()) {
        let e = r[col] - means[y as usize];
        stats[y as usize].2 += e * e;
    }
    let dof = (stats[0].0 + stats[1].0) as f64 - 2.0;
    let pooled = ((stats[0].2 + stats[1].2) / dof).sqrt();
    Ok((means[0] - means[1]) / pooled)
}
