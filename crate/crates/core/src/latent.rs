//! Early fusion of embeddings with heuristic bits, and a small dense VAE.
//!
//! Encoder: input -> tanh hidden layers -> (mu, log sigma^2) heads.
//! Decoder: z -> tanh hidden layers (reversed widths) -> linear output.
//! Loss per batch: mean over samples of the summed squared reconstruction
//! error, plus beta times the mean KL divergence to N(0, I).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::{Embedding, EMBEDDING_DIM};
use crate::heuristics::{HeuristicVector, DEFAULT_RULE_COUNT};
use crate::linalg::{axpy, dot};
use crate::rng::{gaussian, shuffle, stream};

/// Fused width for the default rule set: embedding slots then heuristic slots.
pub const FUSED_DIM: usize = EMBEDDING_DIM + DEFAULT_RULE_COUNT;

const LOGVAR_MIN: f64 = -10.0;
const LOGVAR_MAX: f64 = 10.0;
const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatentError {
    #[error("expected width {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("loss became non-finite at epoch {epoch} (reconstruction {reconstruction}, kl {kl})")]
    NonFiniteLoss {
        epoch: usize,
        reconstruction: f64,
        kl: f64,
    },
    #[error("invalid VAE configuration: {0}")]
    InvalidConfig(String),
    #[error("batch is empty")]
    EmptyBatch,
}

/// `[embedding | heuristic bits]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedVector {
    values: Vec<f64>,
    heuristic_len: usize,
    pub function_id: String,
}

impl FusedVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn embedding_part(&self) -> &[f64] {
        &self.values[..EMBEDDING_DIM]
    }

    pub fn heuristic_part(&self) -> &[f64] {
        &self.values[EMBEDDING_DIM..]
    }
}

impl AsRef<[f64]> for FusedVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Concatenates an embedding with heuristic bits (as 0.0 / 1.0).
pub fn fuse(e: &Embedding, h: &HeuristicVector) -> Result<FusedVector, LatentError> {
    let ev = e.values();
    if ev.len() != EMBEDDING_DIM {
        return Err(LatentError::DimensionMismatch {
            expected: EMBEDDING_DIM,
            got: ev.len(),
        });
    }
    if h.bits.is_empty() {
        return Err(LatentError::DimensionMismatch {
            expected: DEFAULT_RULE_COUNT,
            got: 0,
        });
    }
    let mut values = Vec::with_capacity(EMBEDDING_DIM + h.bits.len());
    values.extend_from_slice(ev);
    values.extend(h.bits.iter().map(|&b| if b != 0 { 1.0 } else { 0.0 }));
    Ok(FusedVector {
        values,
        heuristic_len: h.bits.len(),
        function_id: e.function_id.clone(),
    })
}

/// Test-time input: the embedding with all heuristic slots set to zero.
pub fn project_for_test(e: &Embedding) -> Result<FusedVector, LatentError> {
    project_for_test_with(e, DEFAULT_RULE_COUNT)
}

/// As [`project_for_test`] for a rule set of `heuristic_len` rules.
pub fn project_for_test_with(e: &Embedding, heuristic_len: usize) -> Result<FusedVector, LatentError> {
    fuse(e, &HeuristicVector::zeros(heuristic_len))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub kl_weight: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            input_dim: FUSED_DIM,
            latent_dim: 16,
            hidden_dims: vec![256, 64],
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            momentum: 0.9,
            kl_weight: 1.0,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<(), LatentError> {
        let bad = |m: &str| Err(LatentError::InvalidConfig(m.into()));
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be at least 1");
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return bad("hidden layer widths must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.kl_weight.is_finite() && self.kl_weight >= 0.0) {
            return bad("kl_weight must be nonnegative");
        }
        Ok(())
    }
}

/// Fully connected layer, weights row-major `output x input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(input: usize, output: usize) -> Self {
        Self {
            input,
            output,
            weights: vec![0.0; input * output],
            bias: vec![0.0; output],
        }
    }

    fn xavier(input: usize, output: usize, rng: &mut crate::rng::SeededRng) -> Self {
        use rand::Rng;
        let limit = libm::sqrt(6.0 / (input + output) as f64);
        let weights = (0..input * output).map(|_| rng.gen_range(-limit..limit)).collect();
        Self {
            input,
            output,
            weights,
            bias: vec![0.0; output],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.input)
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }

    /// Accumulates parameter gradients for upstream `dy`; returns `dx` when asked.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, want_dx: bool) -> Option<Vec<f64>> {
        let mut dx = want_dx.then(|| vec![0.0; self.input]);
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = o * self.input..(o + 1) * self.input;
            axpy(g, x, &mut grad.weights[row.clone()]);
            grad.bias[o] += g;
            if let Some(dx) = dx.as_mut() {
                axpy(g, &self.weights[row], dx);
            }
        }
        dx
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    pub config: VaeConfig,
    pub encoder: Vec<Dense>,
    pub mu_head: Dense,
    pub logvar_head: Dense,
    pub decoder: Vec<Dense>,
    pub output: Dense,
    /// 1-based epoch whose weights were kept; 0 for an untrained model.
    pub best_epoch: usize,
}

/// Latent code (encoder mean) of one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub values: Vec<f64>,
    pub function_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.reconstruction.is_finite() && self.kl.is_finite() && self.total.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub validation: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTrace {
    pub epochs: Vec<EpochLoss>,
    pub best_epoch: usize,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.epochs.iter().all(|e| e.train.is_finite() && e.validation.is_finite())
    }
}

/// Gradient with the same layer layout as the model.
#[derive(Debug, Clone)]
struct Grad(Vec<Dense>);

struct Activations {
    /// Input followed by each encoder hidden output.
    enc: Vec<Vec<f64>>,
    mu: Vec<f64>,
    logvar_raw: Vec<f64>,
    logvar: Vec<f64>,
    /// z followed by each decoder hidden output.
    dec: Vec<Vec<f64>>,
    out: Vec<f64>,
}

fn tanh_all(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = libm::tanh(*x));
    v
}

impl VaeModel {
    /// Xavier-uniform weights and zero biases drawn from `config.seed`.
    pub fn new(config: VaeConfig) -> Result<Self, LatentError> {
        config.validate()?;
        let mut rng = stream(config.seed, INIT_STREAM);
        Ok(Self::build(config, |i, o| Dense::xavier(i, o, &mut rng)))
    }

    /// All weights and biases zero.
    pub fn zeros(config: VaeConfig) -> Result<Self, LatentError> {
        config.validate()?;
        Ok(Self::build(config, Dense::zeros))
    }

    fn build(config: VaeConfig, mut make: impl FnMut(usize, usize) -> Dense) -> Self {
        let mut widths = vec![config.input_dim];
        widths.extend(&config.hidden_dims);
        let encoder: Vec<Dense> = widths.windows(2).map(|w| make(w[0], w[1])).collect();
        let trunk = *widths.last().unwrap();
        let mu_head = make(trunk, config.latent_dim);
        let logvar_head = make(trunk, config.latent_dim);
        let mut dwidths = vec![config.latent_dim];
        dwidths.extend(config.hidden_dims.iter().rev());
        let decoder: Vec<Dense> = dwidths.windows(2).map(|w| make(w[0], w[1])).collect();
        let output = make(*dwidths.last().unwrap(), config.input_dim);
        Self {
            config,
            encoder,
            mu_head,
            logvar_head,
            decoder,
            output,
            best_epoch: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    fn layers(&self) -> Vec<&Dense> {
        let mut v: Vec<&Dense> = self.encoder.iter().collect();
        v.push(&self.mu_head);
        v.push(&self.logvar_head);
        v.extend(self.decoder.iter());
        v.push(&self.output);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        let mut v: Vec<&mut Dense> = self.encoder.iter_mut().collect();
        v.push(&mut self.mu_head);
        v.push(&mut self.logvar_head);
        v.extend(self.decoder.iter_mut());
        v.push(&mut self.output);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Every parameter, layer by layer (weights then bias).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in self.layers() {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`VaeModel::parameters`].
    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<(), LatentError> {
        if flat.len() != self.parameter_count() {
            return Err(LatentError::DimensionMismatch {
                expected: self.parameter_count(),
                got: flat.len(),
            });
        }
        let mut at = 0;
        for l in self.layers_mut() {
            let w = l.weights.len();
            l.weights.copy_from_slice(&flat[at..at + w]);
            at += w;
            let b = l.bias.len();
            l.bias.copy_from_slice(&flat[at..at + b]);
            at += b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    fn check_width(&self, x: &[f64]) -> Result<(), LatentError> {
        if x.len() != self.config.input_dim {
            return Err(LatentError::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Encoder mean for a raw input row.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, LatentError> {
        self.check_width(x)?;
        let mut h = x.to_vec();
        for l in &self.encoder {
            h = tanh_all(l.forward(&h));
        }
        Ok(self.mu_head.forward(&h))
    }

    /// Decoder output for a latent code.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>, LatentError> {
        if z.len() != self.config.latent_dim {
            return Err(LatentError::DimensionMismatch {
                expected: self.config.latent_dim,
                got: z.len(),
            });
        }
        let mut h = z.to_vec();
        for l in &self.decoder {
            h = tanh_all(l.forward(&h));
        }
        Ok(self.output.forward(&h))
    }

    fn forward(&self, x: &[f64], eps: &[f64]) -> Activations {
        let mut enc = vec![x.to_vec()];
        for l in &self.encoder {
            let h = tanh_all(l.forward(enc.last().unwrap()));
            enc.push(h);
        }
        let trunk = enc.last().unwrap();
        let mu = self.mu_head.forward(trunk);
        let logvar_raw = self.logvar_head.forward(trunk);
        let logvar: Vec<f64> = logvar_raw.iter().map(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX)).collect();
        let z: Vec<f64> = mu
            .iter()
            .zip(&logvar)
            .zip(eps)
            .map(|((m, lv), e)| m + libm::exp(0.5 * lv) * e)
            .collect();
        let mut dec = vec![z];
        for l in &self.decoder {
            let h = tanh_all(l.forward(dec.last().unwrap()));
            dec.push(h);
        }
        let out = self.output.forward(dec.last().unwrap());
        Activations {
            enc,
            mu,
            logvar_raw,
            logvar,
            dec,
            out,
        }
    }

    fn zero_grad(&self) -> Grad {
        Grad(self.layers().iter().map(|l| Dense::zeros(l.input, l.output)).collect())
    }

    /// Loss over a batch, plus the gradient when `grad` is given.
    fn batch_loss<V: AsRef<[f64]>>(
        &self,
        batch: &[V],
        eps: &[Vec<f64>],
        mut grad: Option<&mut Grad>,
    ) -> Result<LossBreakdown, LatentError> {
        if batch.is_empty() {
            return Err(LatentError::EmptyBatch);
        }
        if eps.len() != batch.len() {
            return Err(LatentError::DimensionMismatch {
                expected: batch.len(),
                got: eps.len(),
            });
        }
        for (x, e) in batch.iter().zip(eps) {
            self.check_width(x.as_ref())?;
            if e.len() != self.config.latent_dim {
                return Err(LatentError::DimensionMismatch {
                    expected: self.config.latent_dim,
                    got: e.len(),
                });
            }
        }
        let inv_b = 1.0 / batch.len() as f64;
        let beta = self.config.kl_weight;
        let n_enc = self.encoder.len();
        let n_dec = self.decoder.len();
        let (mut rec_sum, mut kl_sum) = (0.0, 0.0);
        for (x, e) in batch.iter().zip(eps) {
            let x = x.as_ref();
            let a = self.forward(x, e);
            rec_sum += a.out.iter().zip(x).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
            kl_sum += 0.5
                * a.mu
                    .iter()
                    .zip(&a.logvar)
                    .map(|(m, lv)| m * m + libm::exp(*lv) - lv - 1.0)
                    .sum::<f64>();

            let Some(g) = grad.as_deref_mut() else { continue };
            let g = &mut g.0;
            // Layer slots in `g`: encoder, mu, logvar, decoder, output.
            let (i_mu, i_lv, i_dec0, i_out) = (n_enc, n_enc + 1, n_enc + 2, n_enc + 2 + n_dec);

            let dout: Vec<f64> = a.out.iter().zip(x).map(|(o, t)| 2.0 * (o - t) * inv_b).collect();
            let mut dh = self
                .output
                .backward(a.dec.last().unwrap(), &dout, &mut g[i_out], true)
                .unwrap();
            for li in (0..n_dec).rev() {
                let h = &a.dec[li + 1];
                let da: Vec<f64> = dh.iter().zip(h).map(|(d, y)| d * (1.0 - y * y)).collect();
                dh = self.decoder[li]
                    .backward(&a.dec[li], &da, &mut g[i_dec0 + li], true)
                    .unwrap();
            }
            let dz = dh;
            let dmu: Vec<f64> = dz.iter().zip(&a.mu).map(|(d, m)| d + beta * m * inv_b).collect();
            let dlv: Vec<f64> = (0..self.config.latent_dim)
                .map(|j| {
                    if a.logvar_raw[j] < LOGVAR_MIN || a.logvar_raw[j] > LOGVAR_MAX {
                        return 0.0;
                    }
                    let var = libm::exp(a.logvar[j]);
                    dz[j] * e[j] * 0.5 * libm::sqrt(var) + beta * 0.5 * (var - 1.0) * inv_b
                })
                .collect();
            let trunk = a.enc.last().unwrap();
            let mut dt = self.mu_head.backward(trunk, &dmu, &mut g[i_mu], n_enc > 0).unwrap_or_default();
            if let Some(d2) = self.logvar_head.backward(trunk, &dlv, &mut g[i_lv], n_enc > 0) {
                dt.iter_mut().zip(&d2).for_each(|(a, b)| *a += b);
            }
            for li in (0..n_enc).rev() {
                let h = &a.enc[li + 1];
                let da: Vec<f64> = dt.iter().zip(h).map(|(d, y)| d * (1.0 - y * y)).collect();
                dt = self.encoder[li]
                    .backward(&a.enc[li], &da, &mut g[li], li > 0)
                    .unwrap_or_default();
            }
        }
        let reconstruction = rec_sum * inv_b;
        let kl = kl_sum * inv_b;
        Ok(LossBreakdown {
            reconstruction,
            kl,
            total: reconstruction + beta * kl,
        })
    }
}

/// ELBO-style loss for `batch` with fixed reparameterization draws `eps`
/// (one `latent_dim` vector per sample).
pub fn elbo_loss<V: AsRef<[f64]>>(
    model: &VaeModel,
    batch: &[V],
    eps: &[Vec<f64>],
) -> Result<LossBreakdown, LatentError> {
    model.batch_loss(batch, eps, None)
}

/// Loss and its analytic gradient, flattened in [`VaeModel::parameters`] order.
pub fn elbo_gradient<V: AsRef<[f64]>>(
    model: &VaeModel,
    batch: &[V],
    eps: &[Vec<f64>],
) -> Result<(LossBreakdown, Vec<f64>), LatentError> {
    let mut g = model.zero_grad();
    let loss = model.batch_loss(batch, eps, Some(&mut g))?;
    let mut flat = Vec::with_capacity(model.parameter_count());
    for l in &g.0 {
        flat.extend_from_slice(&l.weights);
        flat.extend_from_slice(&l.bias);
    }
    Ok((loss, flat))
}

/// Minimum dataset size accepted by [`train_vae`].
pub const MIN_TRAINING_SAMPLES: usize = 10;

/// Minibatch gradient descent with momentum. The last
/// `ceil(validation_fraction * n)` rows of a seeded shuffle are held out;
/// validation loss is evaluated at the encoder mean (zero noise). Returns the
/// weights of the epoch with the lowest validation loss.
pub fn train_vae<V: AsRef<[f64]>>(data: &[V], cfg: &VaeConfig) -> Result<(VaeModel, LossTrace), LatentError> {
    cfg.validate()?;
    if data.len() < MIN_TRAINING_SAMPLES {
        return Err(LatentError::TooFewSamples {
            needed: MIN_TRAINING_SAMPLES,
            got: data.len(),
        });
    }
    for x in data {
        if x.as_ref().len() != cfg.input_dim {
            return Err(LatentError::DimensionMismatch {
                expected: cfg.input_dim,
                got: x.as_ref().len(),
            });
        }
    }
    let n = data.len();
    let n_val = libm::ceil(cfg.validation_fraction * n as f64) as usize;
    if n_val >= n {
        return Err(LatentError::InvalidConfig(
            "validation split leaves no training samples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = stream(cfg.seed, SHUFFLE_STREAM);
    let mut noise_rng = stream(cfg.seed, NOISE_STREAM);
    shuffle(&mut shuffle_rng, &mut order);
    let val: Vec<&[f64]> = order[n - n_val..].iter().map(|&i| data[i].as_ref()).collect();
    let mut train_idx: Vec<usize> = order[..n - n_val].to_vec();
    let val_eps = vec![vec![0.0; cfg.latent_dim]; val.len()];

    let mut model = VaeModel::new(cfg.clone())?;
    let mut velocity = model.zero_grad();
    let mut best = (f64::INFINITY, model.clone());
    let mut trace = LossTrace::default();

    for epoch in 1..=cfg.epochs {
        shuffle(&mut shuffle_rng, &mut train_idx);
        let mut acc = LossBreakdown::default();
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| data[i].as_ref()).collect();
            let eps: Vec<Vec<f64>> = batch
                .iter()
                .map(|_| (0..cfg.latent_dim).map(|_| gaussian(&mut noise_rng)).collect())
                .collect();
            let mut g = model.zero_grad();
            let loss = model.batch_loss(&batch, &eps, Some(&mut g))?;
            if !loss.is_finite() {
                return Err(LatentError::NonFiniteLoss {
                    epoch,
                    reconstruction: loss.reconstruction,
                    kl: loss.kl,
                });
            }
            let w = batch.len() as f64;
            acc.reconstruction += loss.reconstruction * w;
            acc.kl += loss.kl * w;
            acc.total += loss.total * w;
            for ((p, v), gr) in model.layers_mut().into_iter().zip(&mut velocity.0).zip(&g.0) {
                for ((pw, vw), gw) in p.weights.iter_mut().zip(&mut v.weights).zip(&gr.weights) {
                    *vw = cfg.momentum * *vw - cfg.learning_rate * gw;
                    *pw += *vw;
                }
                for ((pb, vb), gb) in p.bias.iter_mut().zip(&mut v.bias).zip(&gr.bias) {
                    *vb = cfg.momentum * *vb - cfg.learning_rate * gb;
                    *pb += *vb;
                }
            }
        }
        let m = train_idx.len() as f64;
        let train = LossBreakdown {
            reconstruction: acc.reconstruction / m,
            kl: acc.kl / m,
            total: acc.total / m,
        };
        let validation = model.batch_loss(&val, &val_eps, None)?;
        if !validation.is_finite() {
            return Err(LatentError::NonFiniteLoss {
                epoch,
                reconstruction: validation.reconstruction,
                kl: validation.kl,
            });
        }
        trace.epochs.push(EpochLoss {
            epoch,
            train,
            validation,
        });
        if validation.total < best.0 {
            best = (validation.total, model.clone());
            best.1.best_epoch = epoch;
        }
    }
    let model = best.1;
    trace.best_epoch = model.best_epoch;
    Ok((model, trace))
}

/// Encoder mean of a fused vector.
pub fn encode_latent(model: &VaeModel, v: &FusedVector) -> Result<LatentPoint, LatentError> {
    Ok(LatentPoint {
        values: model.encode(v.values())?,
        function_id: v.function_id.clone(),
    })
}
