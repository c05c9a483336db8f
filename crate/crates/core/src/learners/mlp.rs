use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_training_data, sigmoid};
use crate::error::{Error, Result};

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_sizes: [usize; 3],
    pub input_noise_sigma: f64,
    pub dropout_p: f64,
    pub use_batch_norm: bool,
    pub bn_momentum: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_sizes: [256, 128, 64],
            input_noise_sigma: 0.1,
            dropout_p: 0.3,
            use_batch_norm: true,
            bn_momentum: 0.9,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Parameter("hidden layer sizes must be positive".into()));
        }
        if !(self.input_noise_sigma >= 0.0) {
            return Err(Error::Parameter("input noise sigma must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Parameter("dropout probability must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Parameter("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::Parameter("batch-norm momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Fully connected layer, weights stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    n_in: usize,
    n_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn new(n_in: usize, n_out: usize, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        Dense {
            n_in,
            n_out,
            weights: (0..n_in * n_out).map(|_| normal.sample(rng)).collect(),
            bias: vec![0.0; n_out],
        }
    }

    fn forward(&self, input: &[f64], batch: usize) -> Vec<f64> {
        let mut out = vec![0.0; batch * self.n_out];
        for b in 0..batch {
            let x = &input[b * self.n_in..(b + 1) * self.n_in];
            for o in 0..self.n_out {
                let w = &self.weights[o * self.n_in..(o + 1) * self.n_in];
                out[b * self.n_out + o] = self.bias[o] + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        out
    }

    /// Returns `(dW, db, d_input)`.
    fn backward(&self, input: &[f64], grad_out: &[f64], batch: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; self.n_out];
        let mut dx = vec![0.0; batch * self.n_in];
        for b in 0..batch {
            let x = &input[b * self.n_in..(b + 1) * self.n_in];
            let dxb = &mut dx[b * self.n_in..(b + 1) * self.n_in];
            for o in 0..self.n_out {
                let g = grad_out[b * self.n_out + o];
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                let row = o * self.n_in;
                for i in 0..self.n_in {
                    dw[row + i] += g * x[i];
                    dxb[i] += g * self.weights[row + i];
                }
            }
        }
        (dw, db, dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BatchNorm {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

struct LayerCache {
    input: Vec<f64>,
    pre_activation: Vec<f64>,
    bn: Option<BnCache>,
    dropout_mask: Option<Vec<f64>>,
}

enum Mode<'a> {
    Inference,
    /// Batch statistics; noise and dropout drawn from `rng` when present.
    Training(Option<&'a mut ChaCha8Rng>),
}

/// Three-hidden-layer perceptron with a sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub feature_dim: usize,
    dense: Vec<Dense>,
    norms: Vec<BatchNorm>,
    pub epoch_losses: Vec<f64>,
}

struct Gradients {
    dense: Vec<(Vec<f64>, Vec<f64>)>,
    norms: Vec<(Vec<f64>, Vec<f64>)>,
}

fn flatten_rows(x: &[Vec<f64>]) -> Vec<f64> {
    x.iter().flatten().copied().collect()
}

/// Binary cross-entropy computed from the logit.
fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl MlpModel {
    fn init(feature_dim: usize, cfg: &MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut widths = vec![feature_dim];
        widths.extend_from_slice(&cfg.hidden_sizes);
        let mut dense = Vec::with_capacity(4);
        for w in widths.windows(2) {
            dense.push(Dense::new(w[0], w[1], (2.0 / w[0] as f64).sqrt(), &mut rng));
        }
        let last = cfg.hidden_sizes[2];
        dense.push(Dense::new(last, 1, (1.0 / last as f64).sqrt(), &mut rng));
        let norms = if cfg.use_batch_norm {
            cfg.hidden_sizes.iter().map(|&h| BatchNorm::new(h)).collect()
        } else {
            Vec::new()
        };
        MlpModel {
            config: cfg.clone(),
            feature_dim,
            dense,
            norms,
            epoch_losses: Vec::new(),
        }
    }

    /// Returns per-row logits plus the caches needed for backpropagation.
    fn forward(&self, x: &[f64], batch: usize, mode: &mut Mode<'_>) -> (Vec<f64>, Vec<LayerCache>) {
        let training = matches!(mode, Mode::Training(_));
        let mut act = x.to_vec();
        if let Mode::Training(Some(rng)) = mode {
            if self.config.input_noise_sigma > 0.0 {
                let normal = Normal::new(0.0, self.config.input_noise_sigma).expect("finite sigma");
                act.iter_mut().for_each(|v| *v += normal.sample(*rng));
            }
        }
        let mut caches = Vec::with_capacity(3);
        for l in 0..3 {
            let layer = &self.dense[l];
            let z = layer.forward(&act, batch);
            let width = layer.n_out;
            let mut y = z.clone();
            let mut bn_cache = None;
            if let Some(bn) = self.norms.get(l) {
                if training {
                    let mut mean = vec![0.0; width];
                    let mut var = vec![0.0; width];
                    for b in 0..batch {
                        for k in 0..width {
                            mean[k] += z[b * width + k] / batch as f64;
                        }
                    }
                    for b in 0..batch {
                        for k in 0..width {
                            var[k] += (z[b * width + k] - mean[k]).powi(2) / batch as f64;
                        }
                    }
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                    let mut xhat = vec![0.0; z.len()];
                    for b in 0..batch {
                        for k in 0..width {
                            let i = b * width + k;
                            xhat[i] = (z[i] - mean[k]) * inv_std[k];
                            y[i] = bn.gamma[k] * xhat[i] + bn.beta[k];
                        }
                    }
                    bn_cache = Some(BnCache { xhat, inv_std, batch_mean: mean, batch_var: var });
                } else {
                    for b in 0..batch {
                        for k in 0..width {
                            let i = b * width + k;
                            let xhat = (z[i] - bn.running_mean[k]) / (bn.running_var[k] + BN_EPS).sqrt();
                            y[i] = bn.gamma[k] * xhat + bn.beta[k];
                        }
                    }
                }
            }
            let mut h: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
            let mut dropout_mask = None;
            if let Mode::Training(Some(rng)) = mode {
                let p = self.config.dropout_p;
                if p > 0.0 {
                    let keep = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..h.len()).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
                    h.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    dropout_mask = Some(mask);
                }
            }
            caches.push(LayerCache {
                input: std::mem::replace(&mut act, h),
                pre_activation: y,
                bn: bn_cache,
                dropout_mask,
            });
        }
        let logits = self.dense[3].forward(&act, batch);
        caches.push(LayerCache { input: act, pre_activation: Vec::new(), bn: None, dropout_mask: None });
        (logits, caches)
    }

    fn backward(&self, logits: &[f64], y: &[u8], caches: &[LayerCache], batch: usize) -> (f64, Gradients) {
        let n = batch as f64;
        let loss = logits.iter().zip(y).map(|(&z, &t)| bce_with_logit(z, f64::from(t))).sum::<f64>() / n;
        let dlogit: Vec<f64> = logits.iter().zip(y).map(|(&z, &t)| (sigmoid(z) - f64::from(t)) / n).collect();

        let mut dense_grads = vec![(Vec::new(), Vec::new()); 4];
        let mut norm_grads = vec![(Vec::new(), Vec::new()); self.norms.len()];
        let (dw, db, mut grad) = self.dense[3].backward(&caches[3].input, &dlogit, batch);
        dense_grads[3] = (dw, db);

        for l in (0..3).rev() {
            let c = &caches[l];
            let width = self.dense[l].n_out;
            if let Some(mask) = &c.dropout_mask {
                grad.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            }
            grad.iter_mut().zip(&c.pre_activation).for_each(|(g, y)| if *y <= 0.0 { *g = 0.0 });
            if let (Some(bn), Some(cache)) = (self.norms.get(l), &c.bn) {
                let mut dgamma = vec![0.0; width];
                let mut dbeta = vec![0.0; width];
                let mut sum_dxhat = vec![0.0; width];
                let mut sum_dxhat_xhat = vec![0.0; width];
                let mut dxhat = vec![0.0; grad.len()];
                for b in 0..batch {
                    for k in 0..width {
                        let i = b * width + k;
                        dgamma[k] += grad[i] * cache.xhat[i];
                        dbeta[k] += grad[i];
                        dxhat[i] = grad[i] * bn.gamma[k];
                        sum_dxhat[k] += dxhat[i];
                        sum_dxhat_xhat[k] += dxhat[i] * cache.xhat[i];
                    }
                }
                for b in 0..batch {
                    for k in 0..width {
                        let i = b * width + k;
                        grad[i] = cache.inv_std[k] / n * (n * dxhat[i] - sum_dxhat[k] - cache.xhat[i] * sum_dxhat_xhat[k]);
                    }
                }
                norm_grads[l] = (dgamma, dbeta);
            }
            let (dw, db, dx) = self.dense[l].backward(&c.input, &grad, batch);
            dense_grads[l] = (dw, db);
            grad = dx;
        }
        (loss, Gradients { dense: dense_grads, norms: norm_grads })
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        for (layer, (dw, db)) in self.dense.iter_mut().zip(&g.dense) {
            layer.weights.iter_mut().zip(dw).for_each(|(w, d)| *w -= lr * d);
            layer.bias.iter_mut().zip(db).for_each(|(b, d)| *b -= lr * d);
        }
        for (bn, (dg, dbeta)) in self.norms.iter_mut().zip(&g.norms) {
            bn.gamma.iter_mut().zip(dg).for_each(|(w, d)| *w -= lr * d);
            bn.beta.iter_mut().zip(dbeta).for_each(|(b, d)| *b -= lr * d);
        }
    }

    fn update_running_stats(&mut self, caches: &[LayerCache], batch: usize) {
        let m = self.config.bn_momentum;
        let unbias = if batch > 1 { batch as f64 / (batch - 1) as f64 } else { 1.0 };
        for (bn, c) in self.norms.iter_mut().zip(caches) {
            if let Some(cache) = &c.bn {
                for k in 0..bn.gamma.len() {
                    bn.running_mean[k] = m * bn.running_mean[k] + (1.0 - m) * cache.batch_mean[k];
                    bn.running_var[k] = m * bn.running_var[k] + (1.0 - m) * cache.batch_var[k] * unbias;
                }
            }
        }
    }

    pub fn logits(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        super::check_dim(x, self.feature_dim)?;
        let (logits, _) = self.forward(&flatten_rows(x), x.len(), &mut Mode::Inference);
        Ok(logits)
    }

    /// Mean BCE and its gradient with respect to [`MlpModel::parameters`],
    /// using batch statistics and no noise or dropout.
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], y: &[u8]) -> Result<(f64, Vec<f64>)> {
        super::check_dim(x, self.feature_dim)?;
        let batch = x.len();
        let (logits, caches) = self.forward(&flatten_rows(x), batch, &mut Mode::Training(None));
        let (loss, g) = self.backward(&logits, y, &caches, batch);
        let mut flat = Vec::new();
        for (dw, db) in &g.dense {
            flat.extend_from_slice(dw);
            flat.extend_from_slice(db);
        }
        for (dg, dbeta) in &g.norms {
            flat.extend_from_slice(dg);
            flat.extend_from_slice(dbeta);
        }
        Ok((loss, flat))
    }

    /// Trainable parameters in a fixed order: each dense layer's weights and
    /// bias, then each batch-norm layer's scale and shift.
    pub fn parameters(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for d in &self.dense {
            flat.extend_from_slice(&d.weights);
            flat.extend_from_slice(&d.bias);
        }
        for bn in &self.norms {
            flat.extend_from_slice(&bn.gamma);
            flat.extend_from_slice(&bn.beta);
        }
        flat
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameters().len() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", self.parameters().len(), params.len())));
        }
        let mut it = params.iter().copied();
        for d in &mut self.dense {
            d.weights.iter_mut().chain(d.bias.iter_mut()).for_each(|w| *w = it.next().unwrap());
        }
        for bn in &mut self.norms {
            bn.gamma.iter_mut().chain(bn.beta.iter_mut()).for_each(|w| *w = it.next().unwrap());
        }
        Ok(())
    }

    /// Untrained network with the configured shape.
    pub fn untrained(feature_dim: usize, cfg: &MlpConfig) -> Result<Self> {
        cfg.validate()?;
        if feature_dim == 0 {
            return Err(Error::Dimension("feature dimension must be positive".into()));
        }
        Ok(Self::init(feature_dim, cfg))
    }
}

/// Mini-batch SGD on BCE. Noise and dropout are active only while training;
/// inference uses the batch-norm running statistics.
pub fn train_mlp(x: &[Vec<f64>], y: &[u8], cfg: &MlpConfig) -> Result<MlpModel> {
    cfg.validate()?;
    let d = check_training_data(x, y)?;
    let mut model = MlpModel::init(d, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..x.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            // Batch statistics over a single row are meaningless.
            if cfg.use_batch_norm && idx.len() < 2 {
                continue;
            }
            let bx: Vec<f64> = idx.iter().flat_map(|&i| x[i].iter().copied()).collect();
            let by: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
            let (logits, caches) = model.forward(&bx, idx.len(), &mut Mode::Training(Some(&mut rng)));
            let (loss, grads) = model.backward(&logits, &by, &caches, idx.len());
            if !loss.is_finite() {
                return Err(Error::Numeric("MLP training loss diverged".into()));
            }
            model.apply(&grads, cfg.learning_rate);
            model.update_running_stats(&caches, idx.len());
            total += loss * idx.len() as f64;
            seen += idx.len();
        }
        model.epoch_losses.push(if seen > 0 { total / seen as f64 } else { 0.0 });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(use_batch_norm: bool) -> MlpConfig {
        MlpConfig {
            hidden_sizes: [3, 3, 2],
            input_noise_sigma: 0.0,
            dropout_p: 0.0,
            use_batch_norm,
            seed: 7,
            ..MlpConfig::default()
        }
    }

    fn random_batch(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y = (0..n).map(|i| (i % 2) as u8).collect();
        (x, y)
    }

    /// First model whose ReLU inputs all stay clear of the kink, so central
    /// differences are valid.
    fn smooth_model(cfg: &MlpConfig, x: &[Vec<f64>]) -> MlpModel {
        (0..200u64)
            .map(|s| MlpModel::untrained(3, &MlpConfig { seed: cfg.seed + s, ..cfg.clone() }).unwrap())
            .find(|m| {
                let (_, caches) = m.forward(&flatten_rows(x), x.len(), &mut Mode::Training(None));
                caches[..3].iter().all(|c| c.pre_activation.iter().all(|v| v.abs() > 1e-3))
            })
            .expect("some seed avoids the ReLU kink")
    }

    fn finite_difference_check(cfg: &MlpConfig) {
        let (x, y) = random_batch(6, 3, 99);
        let model = smooth_model(cfg, &x);
        let (_, analytic) = model.loss_and_gradient(&x, &y).unwrap();
        let params = model.parameters();
        let h = 1e-5;
        for i in 0..params.len() {
            let mut m = model.clone();
            let mut p = params.clone();
            p[i] += h;
            m.set_parameters(&p).unwrap();
            let up = m.loss_and_gradient(&x, &y).unwrap().0;
            p[i] -= 2.0 * h;
            m.set_parameters(&p).unwrap();
            let down = m.loss_and_gradient(&x, &y).unwrap().0;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic[i] - numeric).abs() / denom;
            assert!(rel < 1e-4 || (analytic[i] - numeric).abs() < 1e-9, "param {i}: analytic {} numeric {numeric}", analytic[i]);
        }
    }

    #[test]
    fn gradient_check_plain() {
        finite_difference_check(&tiny(false));
    }

    #[test]
    fn gradient_check_with_batch_norm() {
        finite_difference_check(&tiny(true));
    }

    #[test]
    fn inference_is_deterministic_without_rng() {
        let m = MlpModel::untrained(3, &MlpConfig { hidden_sizes: [4, 3, 2], ..MlpConfig::default() }).unwrap();
        let (x, _) = random_batch(5, 3, 1);
        assert_eq!(m.logits(&x).unwrap(), m.logits(&x).unwrap());
    }
}
