//! Native probabilistic classifiers used to produce committee candidates.
//!
//! Tree ensembles are not trained here; their scores enter the committee as
//! external score files.

mod logistic;
mod mlp;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use logistic::{train_logistic, LogisticConfig, LogisticModel};
pub use mlp::{train_mlp, MlpConfig, MlpModel};

use crate::data_model::write_text;
use crate::error::{Error, Result};
use crate::metrics::PROB_EPS;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_dim(x: &[Vec<f64>], dim: usize) -> Result<()> {
    match x.iter().position(|r| r.len() != dim) {
        Some(i) => Err(Error::Shape(format!("row {i} has {} features, model expects {dim}", x[i].len()))),
        None => Ok(()),
    }
}

pub(crate) fn check_training_data(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("training needs at least 2 rows".into()));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Dimension("feature dimension must be positive".into()));
    }
    check_dim(x, d)?;
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if y.iter().any(|&v| v > 1) {
        return Err(Error::DegenerateLabels("labels must be 0 or 1".into()));
    }
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateLabels("training labels contain a single class".into()));
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Logistic,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Mlp(MlpModel),
    Logistic(LogisticModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Mlp(_) => ModelKind::Mlp,
            TrainedModel::Logistic(_) => ModelKind::Logistic,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            TrainedModel::Mlp(m) => m.feature_dim,
            TrainedModel::Logistic(m) => m.weights.len(),
        }
    }

    /// Sigmoid outputs clipped to `[1e-7, 1 - 1e-7]`.
    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        let logits = match self {
            TrainedModel::Mlp(m) => m.logits(x)?,
            TrainedModel::Logistic(m) => m.logits(x)?,
        };
        Ok(logits
            .into_iter()
            .map(|z| sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS))
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::json("model", e))?;
        write_text(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

pub fn predict_proba(model: &TrainedModel, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weight_logistic_predicts_half() {
        let m = TrainedModel::Logistic(LogisticModel { weights: vec![0.0; 3], bias: 0.0 });
        let p = m.predict_proba(&[vec![1.0, 2.0, 3.0], vec![-5.0, 0.0, 9.0]]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn extreme_logits_are_clipped() {
        let m = TrainedModel::Logistic(LogisticModel { weights: vec![1e6], bias: 0.0 });
        let p = m.predict_proba(&[vec![1.0], vec![-1.0]]).unwrap();
        assert!(p[0] < 1.0 && p[1] > 0.0);
        assert_eq!(p[0], 1.0 - PROB_EPS);
        assert_eq!(p[1], PROB_EPS);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let m = TrainedModel::Logistic(LogisticModel { weights: vec![1.0, 2.0], bias: 0.0 });
        assert!(matches!(m.predict_proba(&[vec![1.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train_mlp(&x, &[1, 1], &MlpConfig::default()), Err(Error::DegenerateLabels(_))));
        assert!(matches!(train_logistic(&x, &[0, 0], &LogisticConfig::default()), Err(Error::DegenerateLabels(_))));
        let bad = vec![vec![f64::NAN], vec![1.0]];
        assert!(matches!(train_logistic(&bad, &[0, 1], &LogisticConfig::default()), Err(Error::Numeric(_))));
    }

    #[test]
    fn model_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.2], vec![0.1, 0.9]];
        let y = [0, 1, 1, 0];
        let cfg = MlpConfig { hidden_sizes: [4, 3, 2], epochs: 3, batch_size: 2, ..MlpConfig::default() };
        let m = TrainedModel::Mlp(train_mlp(&x, &y, &cfg).unwrap());
        m.save(&p).unwrap();
        let back = TrainedModel::load(&p).unwrap();
        assert_eq!(back.kind(), ModelKind::Mlp);
        assert_eq!(m.predict_proba(&x).unwrap(), back.predict_proba(&x).unwrap());
    }
}
