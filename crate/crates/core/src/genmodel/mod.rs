//! Generative over-sampling: a conditional VAE and a simplified conditional
//! GAN built on a small hand-written MLP.
//!
//! Both learners work in standardised feature space and hand back a
//! [`Generator`] that emits failure rows in original units.

mod cgan;
mod cvae;
mod mlp;

pub use cgan::{cgan_fit, Cgan, CganSpec, DiscriminatorLoss};
pub use cvae::{cvae_fit, kl_divergence, reparameterize, Cvae, CvaeLoss, CvaeSpec};
pub use mlp::{mlp_forward, Activation, Gradients, Layer, Mlp, Trace};

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::{Standardizer, FAILURE};
use crate::rng::{derive_seed, seeded};
use crate::Matrix;

/// Maximum joint gradient norm per optimiser step.
pub const CLIP_NORM: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub discriminator_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Sampler {
    Network {
        net: Mlp,
        latent_dim: usize,
    },
    /// Duplicates with Gaussian jitter of a tenth of the per-feature spread.
    Jitter {
        rows: Matrix,
        spread: Vec<f64>,
    },
}

/// A trained, immutable source of synthetic failure rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    sampler: Sampler,
    scaler: Standardizer,
    history: Vec<EpochStats>,
}

impl Generator {
    fn new(sampler: Sampler, scaler: Standardizer, history: Vec<EpochStats>) -> Self {
        Self {
            sampler,
            scaler,
            history,
        }
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self.sampler, Sampler::Jitter { .. })
    }

    pub fn n_features(&self) -> usize {
        self.scaler.mean().len()
    }
}

fn degenerate_fallback(minority: &Matrix, what: &str) -> Option<Generator> {
    let first = minority.row(0);
    if minority.iter_rows().any(|r| r != first) {
        return None;
    }
    log::warn!("{what}: all failure rows are identical, falling back to jittered duplicates");
    let scaler = Standardizer::fit(minority);
    let spread = vec![0.0; minority.cols()];
    Some(Generator::new(
        Sampler::Jitter {
            rows: minority.clone(),
            spread,
        },
        scaler,
        Vec::new(),
    ))
}

/// Draws `count` failure rows in original feature units. The same generator
/// and seed always give the same rows.
pub fn sample_synthetic(generator: &Generator, count: usize, seed: u64) -> Matrix {
    let mut rng = seeded(derive_seed(seed, 0x6e6d));
    let mut out = Matrix::with_cols(generator.n_features());
    for _ in 0..count {
        let row = match &generator.sampler {
            Sampler::Network { net, latent_dim } => {
                let mut input: Vec<f64> = (0..*latent_dim)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                input.push(f64::from(FAILURE));
                let z = net
                    .forward(&input)
                    .expect("generator width is fixed at fit time");
                generator.scaler.inverse_row(&z)
            }
            Sampler::Jitter { rows, spread } => {
                let parent = rows.row(rng.random_range(0..rows.rows()));
                parent
                    .iter()
                    .zip(spread)
                    .map(|(&v, &s)| {
                        if s > 0.0 {
                            Normal::new(v, 0.1 * s)
                                .expect("finite spread")
                                .sample(&mut rng)
                        } else {
                            v
                        }
                    })
                    .collect()
            }
        };
        out.push_row(&row).expect("width checked");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnSchema, Dataset};
    use crate::rng::Rng;

    /// Central-difference check of `grad` for the scalar `loss` over `params`.
    fn max_relative_error(
        params: &[f64],
        grad: &[f64],
        mut loss: impl FnMut(&[f64]) -> f64,
    ) -> f64 {
        let h = 1e-5;
        let mut p = params.to_vec();
        let mut worst: f64 = 0.0;
        for i in 0..p.len() {
            let orig = p[i];
            p[i] = orig + h;
            let up = loss(&p);
            p[i] = orig - h;
            let down = loss(&p);
            p[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = grad[i].abs().max(numeric.abs()).max(1e-5);
            worst = worst.max((grad[i] - numeric).abs() / denom);
        }
        worst
    }

    fn gaussian_rows(rng: &mut Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect())
            .collect()
    }

    #[test]
    fn kl_zero_at_standard_normal() {
        assert_eq!(kl_divergence(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!(kl_divergence(&[1.0], &[0.0]) > 0.0);
    }

    #[test]
    fn zero_noise_decodes_the_mean() {
        let m = Cvae::new(3, 2, 5, 7);
        let x = [0.3, -1.0, 0.5];
        let (mean, log_var) = m.encode(&x, 1.0).unwrap();
        assert_eq!(reparameterize(&mean, &log_var, &[0.0, 0.0]), mean);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = seeded(3);
        let net = Mlp::new(
            &[3, 4, 2],
            &[Activation::Tanh, Activation::Sigmoid],
            &mut rng,
        );
        let x = [0.4, -0.7, 1.1];
        let target = [0.2, 0.9];
        let loss_of = |n: &Mlp| -> f64 {
            n.forward(&x)
                .unwrap()
                .iter()
                .zip(&target)
                .map(|(y, t)| (y - t) * (y - t))
                .sum()
        };
        let trace = net.trace(&x).unwrap();
        let g_out: Vec<f64> = trace
            .output()
            .iter()
            .zip(&target)
            .map(|(y, t)| 2.0 * (y - t))
            .collect();
        let mut grads = net.zero_gradients();
        net.backward(&trace, &g_out, &mut grads);
        let err = max_relative_error(&net.params(), &grads.flatten(), |p| {
            let mut n = net.clone();
            n.set_params(p);
            loss_of(&n)
        });
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn cvae_gradients_match_finite_differences() {
        let model = Cvae::new(2, 1, 3, 11);
        assert!(model.n_params() <= 50);
        let mut rng = seeded(12);
        let rows = gaussian_rows(&mut rng, 4, 2);
        let eps = gaussian_rows(&mut rng, 4, 1);
        let labels = [1.0, 0.0, 1.0, 1.0];
        let out = model.loss(&rows, &labels, &eps, 1.0).unwrap();
        let n_enc = model.encoder.n_params();
        let mut analytic = out.encoder.flatten();
        analytic.extend(out.decoder.flatten());
        let mut params = model.encoder.params();
        params.extend(model.decoder.params());
        let err = max_relative_error(&params, &analytic, |p| {
            let mut m = model.clone();
            m.encoder.set_params(&p[..n_enc]);
            m.decoder.set_params(&p[n_enc..]);
            m.loss(&rows, &labels, &eps, 1.0).unwrap().total
        });
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn cgan_gradients_match_finite_differences() {
        let model = Cgan::new(2, 1, 3, 21);
        assert!(model.generator.n_params() + model.discriminator.n_params() <= 50);
        let mut rng = seeded(22);
        let real = gaussian_rows(&mut rng, 4, 2);
        let noise = gaussian_rows(&mut rng, 4, 1);
        let classes = [0.0, 1.0, 0.0, 1.0];

        let d = model
            .discriminator_loss(&real, &classes, &noise, &classes)
            .unwrap();
        let err = max_relative_error(&model.discriminator.params(), &d.gradients.flatten(), |p| {
            let mut m = model.clone();
            m.discriminator.set_params(p);
            m.discriminator_loss(&real, &classes, &noise, &classes)
                .unwrap()
                .loss
        });
        assert!(err < 1e-4, "discriminator relative error {err}");

        let (_, g) = model.generator_loss(&noise, &classes).unwrap();
        let err = max_relative_error(&model.generator.params(), &g.flatten(), |p| {
            let mut m = model.clone();
            m.generator.set_params(p);
            m.generator_loss(&noise, &classes).unwrap().0
        });
        assert!(err < 1e-4, "generator relative error {err}");
    }

    fn toy(seed: u64, n_normal: usize, n_failure: usize) -> Dataset {
        let mut rng = seeded(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, n, centre) in [(0u8, n_normal, [0.0, 0.0]), (1u8, n_failure, [4.0, -3.0])] {
            for _ in 0..n {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![centre[0] + a, centre[1] + 0.5 * b]);
                labels.push(label);
            }
        }
        let schema = ColumnSchema::continuous(&["a", "b"], "y").unwrap();
        Dataset::new(schema, Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn cvae_matches_minority_mean() {
        let d = toy(5, 100, 60);
        let spec = CvaeSpec {
            epochs: 60,
            hidden: 8,
            seed: 3,
            ..CvaeSpec::default()
        };
        let g = cvae_fit(&d, &spec).unwrap();
        assert!(g.history().last().unwrap().loss.is_finite());
        let s = sample_synthetic(&g, 500, 9);
        assert_eq!(s.rows(), 500);
        let minority = d.features().select_rows(&d.indices_of(FAILURE));
        let scaler = Standardizer::fit(&minority);
        for j in 0..2 {
            let mean = s.column(j).iter().sum::<f64>() / 500.0;
            let gap = (mean - scaler.mean()[j]).abs() / scaler.std()[j];
            assert!(gap < 0.5, "feature {j}: {gap}");
        }
        let again = cvae_fit(&d, &spec).unwrap();
        assert_eq!(sample_synthetic(&again, 20, 1), sample_synthetic(&g, 20, 1));
        assert_eq!(sample_synthetic(&g, 20, 1), sample_synthetic(&g, 20, 1));
    }

    #[test]
    fn cgan_output_is_bounded_and_deterministic() {
        let d = toy(6, 200, 40);
        let spec = CganSpec {
            epochs: 20,
            hidden: 8,
            seed: 4,
            ..CganSpec::default()
        };
        let g = cgan_fit(&d, &spec).unwrap();
        assert!(g
            .history()
            .iter()
            .all(|e| e.discriminator_accuracy.is_some()));
        let s = sample_synthetic(&g, 1000, 2);
        let scaler = Standardizer::fit(d.features());
        let within = s
            .iter_rows()
            .filter(|r| scaler.transform_row(r).iter().all(|v| v.abs() <= 6.0))
            .count();
        assert!(within >= 990, "{within}");
        let again = cgan_fit(&d, &spec).unwrap();
        assert_eq!(sample_synthetic(&again, 30, 5), sample_synthetic(&g, 30, 5));
    }

    #[test]
    fn identical_minority_rows_fall_back() {
        let schema = ColumnSchema::continuous(&["a", "b"], "y").unwrap();
        let rows = [[0.0, 1.0], [2.0, 1.0], [5.0, 5.0], [5.0, 5.0], [5.0, 5.0]];
        let d = Dataset::new(
            schema,
            Matrix::from_rows(&rows).unwrap(),
            vec![0, 0, 1, 1, 1],
        )
        .unwrap();
        let g = cvae_fit(&d, &CvaeSpec::default()).unwrap();
        assert!(g.is_fallback());
        let s = sample_synthetic(&g, 4, 0);
        assert!(s.iter_rows().all(|r| r == [5.0, 5.0]));
        assert!(cgan_fit(&d, &CganSpec::default()).unwrap().is_fallback());
    }
}
