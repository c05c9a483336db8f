use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_data, sigmoid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    /// L2 penalty on the weights (the bias is not penalized).
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Rows per update; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-3,
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn logits(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        super::check_dim(x, self.weights.len())?;
        Ok(x.iter()
            .map(|r| self.bias + r.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
            .collect())
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// Gradient descent on mean BCE plus `0.5 * l2 * |w|^2`, starting from zero.
pub fn train_logistic(x: &[Vec<f64>], y: &[u8], cfg: &LogisticConfig) -> Result<LogisticModel> {
    if !(cfg.l2 >= 0.0) || !(cfg.learning_rate > 0.0) {
        return Err(Error::Parameter("l2 must be >= 0 and learning rate positive".into()));
    }
    let d = check_training_data(x, y)?;
    let mut m = LogisticModel { weights: vec![0.0; d], bias: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let batch = if cfg.batch_size == 0 { x.len() } else { cfg.batch_size };
    for _ in 0..cfg.epochs {
        if batch < x.len() {
            order.shuffle(&mut rng);
        }
        for idx in order.chunks(batch) {
            let n = idx.len() as f64;
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for &i in idx {
                let z = m.bias + x[i].iter().zip(&m.weights).map(|(a, w)| a * w).sum::<f64>();
                let err = sigmoid(z) - f64::from(y[i]);
                gb += err / n;
                for (g, a) in gw.iter_mut().zip(&x[i]) {
                    *g += err * a / n;
                }
            }
            for (w, g) in m.weights.iter_mut().zip(&gw) {
                *w -= cfg.learning_rate * (g + cfg.l2 * *w);
            }
            m.bias -= cfg.learning_rate * gb;
        }
    }
    if m.weights.iter().any(|w| !w.is_finite()) || !m.bias.is_finite() {
        return Err(Error::Numeric("logistic regression diverged".into()));
    }
    Ok(m)
}
