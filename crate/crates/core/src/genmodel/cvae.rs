use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{clip_joint, Activation, Gradients, Mlp};
use super::{degenerate_fallback, EpochStats, Generator, Sampler, CLIP_NORM};
use crate::dataset::{Dataset, Standardizer, FAILURE};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvaeSpec {
    pub latent_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub kl_weight: f64,
    pub seed: u64,
}

impl Default for CvaeSpec {
    fn default() -> Self {
        Self {
            latent_dim: 4,
            hidden: 32,
            epochs: 200,
            batch: 32,
            learning_rate: 1e-3,
            kl_weight: 1.0,
            seed: 0,
        }
    }
}

impl CvaeSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = self.latent_dim > 0
            && self.hidden > 0
            && self.epochs > 0
            && self.batch > 0
            && self.learning_rate > 0.0
            && self.kl_weight > 0.0;
        if positive && self.learning_rate.is_finite() && self.kl_weight.is_finite() {
            Ok(())
        } else {
            Err(Error::Config("cvae settings must be positive".into()))
        }
    }
}

/// Encoder `(features, label) -> (mean, log variance)` and decoder
/// `(latent, label) -> features`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cvae {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub latent_dim: usize,
}

/// Batch-averaged loss terms and parameter gradients.
#[derive(Clone, Debug)]
pub struct CvaeLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub encoder: Gradients,
    pub decoder: Gradients,
}

/// `KL(N(mean, exp(log_var)) || N(0, I))`.
pub fn kl_divergence(mean: &[f64], log_var: &[f64]) -> f64 {
    -0.5 * mean
        .iter()
        .zip(log_var)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// `z = mean + exp(log_var / 2) * eps`.
pub fn reparameterize(mean: &[f64], log_var: &[f64], eps: &[f64]) -> Vec<f64> {
    mean.iter()
        .zip(log_var)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

fn with_condition(x: &[f64], c: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.extend_from_slice(x);
    v.push(c);
    v
}

impl Cvae {
    pub fn new(n_features: usize, latent_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let encoder = Mlp::new(
            &[n_features + 1, hidden, 2 * latent_dim],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        let decoder = Mlp::new(
            &[latent_dim + 1, hidden, n_features],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        Self {
            encoder,
            decoder,
            latent_dim,
        }
    }

    pub fn n_params(&self) -> usize {
        self.encoder.n_params() + self.decoder.n_params()
    }

    /// Returns `(mean, log variance)`.
    pub fn encode(&self, x: &[f64], label: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut out = self.encoder.forward(&with_condition(x, label))?;
        let log_var = out.split_off(self.latent_dim);
        Ok((out, log_var))
    }

    pub fn decode(&self, z: &[f64], label: f64) -> Result<Vec<f64>> {
        self.decoder.forward(&with_condition(z, label))
    }

    /// Loss `sum of squared reconstruction errors + kl_weight * KL`, averaged
    /// over the batch, with noise `eps[i]` driving row `i`.
    pub fn loss(
        &self,
        rows: &[Vec<f64>],
        labels: &[f64],
        eps: &[Vec<f64>],
        kl_weight: f64,
    ) -> Result<CvaeLoss> {
        let k = self.latent_dim;
        let scale = 1.0 / rows.len() as f64;
        let mut encoder = self.encoder.zero_gradients();
        let mut decoder = self.decoder.zero_gradients();
        let (mut reconstruction, mut kl) = (0.0, 0.0);
        for ((x, &c), e) in rows.iter().zip(labels).zip(eps) {
            let enc_trace = self.encoder.trace(&with_condition(x, c))?;
            let (mean, log_var) = enc_trace.output().split_at(k);
            let z = reparameterize(mean, log_var, e);
            let dec_trace = self.decoder.trace(&with_condition(&z, c))?;
            let recon = dec_trace.output();

            reconstruction += recon
                .iter()
                .zip(x)
                .map(|(r, t)| (r - t) * (r - t))
                .sum::<f64>();
            kl += kl_divergence(mean, log_var);

            let grad_recon: Vec<f64> = recon
                .iter()
                .zip(x)
                .map(|(r, t)| 2.0 * (r - t) * scale)
                .collect();
            let grad_dec_in = self.decoder.backward(&dec_trace, &grad_recon, &mut decoder);
            let mut grad_enc_out = vec![0.0; 2 * k];
            for l in 0..k {
                let dz = grad_dec_in[l];
                let sd = (0.5 * log_var[l]).exp();
                grad_enc_out[l] = dz + kl_weight * mean[l] * scale;
                grad_enc_out[k + l] =
                    dz * e[l] * 0.5 * sd + kl_weight * 0.5 * (log_var[l].exp() - 1.0) * scale;
            }
            self.encoder
                .backward(&enc_trace, &grad_enc_out, &mut encoder);
        }
        reconstruction *= scale;
        kl *= scale;
        Ok(CvaeLoss {
            total: reconstruction + kl_weight * kl,
            reconstruction,
            kl,
            encoder,
            decoder,
        })
    }
}

/// Trains a CVAE on the failure rows of `train`, standardised with their own
/// mean and spread.
pub fn cvae_fit(train: &Dataset, spec: &CvaeSpec) -> Result<Generator> {
    spec.validate()?;
    let minority = train.features().select_rows(&train.indices_of(FAILURE));
    if minority.rows() < 2 {
        return Err(Error::TooFewSamples {
            class: FAILURE,
            count: minority.rows(),
            needed: 2,
        });
    }
    if let Some(g) = degenerate_fallback(&minority, "cvae") {
        return Ok(g);
    }
    let scaler = Standardizer::fit(&minority);
    let z = scaler.transform(&minority);
    let rows: Vec<Vec<f64>> = z.iter_rows().map(<[f64]>::to_vec).collect();
    let mut model = Cvae::new(z.cols(), spec.latent_dim, spec.hidden, spec.seed);
    let mut rng = seeded(derive_seed(spec.seed, 1));
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(spec.batch) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| rows[i].clone()).collect();
            let labels = vec![f64::from(FAILURE); batch.len()];
            let eps: Vec<Vec<f64>> = batch
                .iter()
                .map(|_| {
                    (0..spec.latent_dim)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect()
                })
                .collect();
            let mut out = model.loss(&batch, &labels, &eps, spec.kl_weight)?;
            if !out.total.is_finite() {
                return Err(Error::Diverged(format!(
                    "cvae loss became {} in epoch {epoch}",
                    out.total
                )));
            }
            clip_joint(&mut [&mut out.encoder, &mut out.decoder], CLIP_NORM);
            model.encoder.sgd_step(&out.encoder, spec.learning_rate);
            model.decoder.sgd_step(&out.decoder, spec.learning_rate);
            if !(model.encoder.is_finite() && model.decoder.is_finite()) {
                return Err(Error::Diverged(format!(
                    "cvae parameters non-finite in epoch {epoch}"
                )));
            }
            sum += out.total;
            batches += 1;
        }
        let loss = sum / batches as f64;
        log::debug!("cvae epoch {epoch}: loss {loss:.5}");
        history.push(EpochStats {
            loss,
            discriminator_accuracy: None,
        });
    }
    Ok(Generator::new(
        Sampler::Network {
            net: model.decoder,
            latent_dim: spec.latent_dim,
        },
        scaler,
        history,
    ))
}
