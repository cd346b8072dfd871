use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{clip_joint, sigmoid, softplus, Activation, Gradients, Mlp};
use super::{degenerate_fallback, EpochStats, Generator, Sampler, CLIP_NORM};
use crate::dataset::{Dataset, Standardizer, FAILURE, NORMAL};
use crate::rng::{derive_seed, seeded, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CganSpec {
    pub latent_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub seed: u64,
}

impl Default for CganSpec {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            hidden: 32,
            epochs: 50,
            batch: 32,
            generator_lr: 0.01,
            discriminator_lr: 0.01,
            seed: 0,
        }
    }
}

impl CganSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = self.latent_dim > 0
            && self.hidden > 0
            && self.epochs > 0
            && self.batch > 0
            && self.generator_lr > 0.0
            && self.discriminator_lr > 0.0;
        if positive && self.generator_lr.is_finite() && self.discriminator_lr.is_finite() {
            Ok(())
        } else {
            Err(Error::Config("cgan settings must be positive".into()))
        }
    }
}

/// Generator `(noise, class) -> features` and discriminator
/// `(features, class) -> logit of "real"`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cgan {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub latent_dim: usize,
}

/// Batch-averaged discriminator loss, its gradients and the fraction of
/// real and fake rows it classified correctly.
#[derive(Clone, Debug)]
pub struct DiscriminatorLoss {
    pub loss: f64,
    pub gradients: Gradients,
    pub accuracy: f64,
}

fn conditioned(x: &[f64], c: f64) -> Vec<f64> {
    let mut v = x.to_vec();
    v.push(c);
    v
}

impl Cgan {
    pub fn new(n_features: usize, latent_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let generator = Mlp::new(
            &[latent_dim + 1, hidden, n_features],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        let discriminator = Mlp::new(
            &[n_features + 1, hidden, 1],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        Self {
            generator,
            discriminator,
            latent_dim,
        }
    }

    pub fn generate(&self, noise: &[f64], class: f64) -> Result<Vec<f64>> {
        self.generator.forward(&conditioned(noise, class))
    }

    /// `mean(softplus(-D(real)) + softplus(D(G(noise))))`, gradients with
    /// respect to the discriminator only.
    pub fn discriminator_loss(
        &self,
        real: &[Vec<f64>],
        real_class: &[f64],
        noise: &[Vec<f64>],
        fake_class: &[f64],
    ) -> Result<DiscriminatorLoss> {
        let n = (real.len() + noise.len()) as f64;
        let scale = 1.0 / real.len().max(1) as f64;
        let fake_scale = 1.0 / noise.len().max(1) as f64;
        let mut gradients = self.discriminator.zero_gradients();
        let (mut loss, mut correct) = (0.0, 0usize);
        for (x, &c) in real.iter().zip(real_class) {
            let trace = self.discriminator.trace(&conditioned(x, c))?;
            let logit = trace.output()[0];
            loss += softplus(-logit) * scale;
            correct += usize::from(logit > 0.0);
            self.discriminator
                .backward(&trace, &[(sigmoid(logit) - 1.0) * scale], &mut gradients);
        }
        for (z, &c) in noise.iter().zip(fake_class) {
            let fake = self.generate(z, c)?;
            let trace = self.discriminator.trace(&conditioned(&fake, c))?;
            let logit = trace.output()[0];
            loss += softplus(logit) * fake_scale;
            correct += usize::from(logit <= 0.0);
            self.discriminator
                .backward(&trace, &[sigmoid(logit) * fake_scale], &mut gradients);
        }
        Ok(DiscriminatorLoss {
            loss,
            gradients,
            accuracy: correct as f64 / n,
        })
    }

    /// Non-saturating generator loss `mean(softplus(-D(G(noise))))`,
    /// gradients with respect to the generator only.
    pub fn generator_loss(&self, noise: &[Vec<f64>], class: &[f64]) -> Result<(f64, Gradients)> {
        let scale = 1.0 / noise.len() as f64;
        let mut gradients = self.generator.zero_gradients();
        let mut scratch = self.discriminator.zero_gradients();
        let mut loss = 0.0;
        for (z, &c) in noise.iter().zip(class) {
            let g_trace = self.generator.trace(&conditioned(z, c))?;
            let d_trace = self
                .discriminator
                .trace(&conditioned(g_trace.output(), c))?;
            let logit = d_trace.output()[0];
            loss += softplus(-logit) * scale;
            let d_in = self.discriminator.backward(
                &d_trace,
                &[(sigmoid(logit) - 1.0) * scale],
                &mut scratch,
            );
            let d_features = &d_in[..d_in.len() - 1];
            self.generator
                .backward(&g_trace, d_features, &mut gradients);
        }
        Ok((loss, gradients))
    }
}

fn noise_batch(rng: &mut Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect())
        .collect()
}

/// Trains a conditional GAN on both classes of `train` with class-balanced
/// batches. The returned generator emits failure rows.
pub fn cgan_fit(train: &Dataset, spec: &CganSpec) -> Result<Generator> {
    spec.validate()?;
    let (n_normal, n_failure) = train.class_counts();
    if n_normal == 0 || n_failure == 0 {
        return Err(Error::SingleClass);
    }
    let minority = train.features().select_rows(&train.indices_of(FAILURE));
    if let Some(g) = degenerate_fallback(&minority, "cgan") {
        return Ok(g);
    }
    let scaler = Standardizer::fit(train.features());
    let z = scaler.transform(train.features());
    let by_class = [train.indices_of(NORMAL), train.indices_of(FAILURE)];

    let mut model = Cgan::new(z.cols(), spec.latent_dim, spec.hidden, spec.seed);
    let mut rng = seeded(derive_seed(spec.seed, 1));
    let half = spec.batch.div_ceil(2);
    let steps = (2 * n_failure).div_ceil(spec.batch).max(1);
    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        let (mut d_sum, mut g_sum, mut acc_sum) = (0.0, 0.0, 0.0);
        for _ in 0..steps {
            let mut real = Vec::with_capacity(2 * half);
            let mut classes = Vec::with_capacity(2 * half);
            for (label, idx) in by_class.iter().enumerate() {
                for _ in 0..half {
                    real.push(z.row(idx[rng.random_range(0..idx.len())]).to_vec());
                    classes.push(label as f64);
                }
            }
            let noise = noise_batch(&mut rng, classes.len(), spec.latent_dim);
            let mut d = model.discriminator_loss(&real, &classes, &noise, &classes)?;
            clip_joint(&mut [&mut d.gradients], CLIP_NORM);
            model
                .discriminator
                .sgd_step(&d.gradients, spec.discriminator_lr);

            let noise = noise_batch(&mut rng, classes.len(), spec.latent_dim);
            let (g_loss, mut g_grad) = model.generator_loss(&noise, &classes)?;
            clip_joint(&mut [&mut g_grad], CLIP_NORM);
            model.generator.sgd_step(&g_grad, spec.generator_lr);

            if !(d.loss.is_finite() && g_loss.is_finite()) {
                return Err(Error::Diverged(format!(
                    "cgan loss non-finite in epoch {epoch} (discriminator {}, generator {g_loss})",
                    d.loss
                )));
            }
            if !(model.generator.is_finite() && model.discriminator.is_finite()) {
                return Err(Error::Diverged(format!(
                    "cgan parameters non-finite in epoch {epoch}"
                )));
            }
            d_sum += d.loss;
            g_sum += g_loss;
            acc_sum += d.accuracy;
        }
        let steps = steps as f64;
        let accuracy = acc_sum / steps;
        log::debug!(
            "cgan epoch {epoch}: discriminator loss {:.4}, generator loss {:.4}, discriminator accuracy {accuracy:.3}",
            d_sum / steps,
            g_sum / steps
        );
        history.push(EpochStats {
            loss: (d_sum + g_sum) / steps,
            discriminator_accuracy: Some(accuracy),
        });
    }
    Ok(Generator::new(
        Sampler::Network {
            net: model.generator,
            latent_dim: spec.latent_dim,
        },
        scaler,
        history,
    ))
}
