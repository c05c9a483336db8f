//! Embedding post-processing.

mod pca;
mod scaler;

pub use pca::{apply_pca, fit_pca, PcaModel};
pub use scaler::{apply_scaler, fit_scaler, ScalerModel};

use serde::{Deserialize, Serialize};

use crate::data_model::EmbeddingSequence;
use crate::error::{Error, Result};

/// Default MAD threshold multiplier.
pub const DEFAULT_MAD_MULTIPLIER: f64 = 50.0;

/// Default temperature multiplier for [`softmax_temperature`].
pub const DEFAULT_TEMPERATURE: f64 = 10.0;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("non-finite entry at index {i}"))),
        None => Ok(()),
    }
}

/// Scales `v` to unit Euclidean length. The zero vector is returned unchanged.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    check_finite(v)?;
    let n = norm(v);
    if n == 0.0 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Cosine similarity clamped to `[-1, 1]`.
///
/// Exactly one zero vector yields 0; two zero vectors are an error.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cosine similarity of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 && nb == 0.0 {
        return Err(Error::UndefinedSimilarity { chunk: None });
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// How each chunk's consistency score is computed before MAD filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MadScoring {
    /// Mean cosine similarity to every other chunk.
    #[default]
    MeanPairwise,
    /// Cosine similarity to the mean of the unit-normalized chunks.
    ToMeanEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MadFilterReport {
    pub kept: Vec<bool>,
    pub scores: Vec<f64>,
    pub median: f64,
    pub mad: f64,
    pub multiplier: f64,
}

impl MadFilterReport {
    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// Absolute slack on the MAD comparison so that chunks sitting exactly on the
// median survive rounding when mad is zero.
const MAD_SLACK: f64 = 1e-12;

/// Flags chunks whose consistency score lies within `multiplier × MAD` of the
/// median score.
pub fn mad_filter(seq: &EmbeddingSequence, multiplier: f64, scoring: MadScoring) -> Result<MadFilterReport> {
    if !(multiplier > 0.0) {
        return Err(Error::Parameter(format!("MAD multiplier must be positive, got {multiplier}")));
    }
    let mut unit = Vec::with_capacity(seq.len());
    for (i, c) in seq.chunks().iter().enumerate() {
        check_finite(c)?;
        let n = norm(c);
        if n == 0.0 {
            return Err(Error::UndefinedSimilarity { chunk: Some(i) });
        }
        unit.push(c.iter().map(|x| x / n).collect::<Vec<f64>>());
    }

    let n = unit.len();
    let scores: Vec<f64> = if n == 1 {
        vec![1.0]
    } else {
        match scoring {
            MadScoring::MeanPairwise => {
                let mut sums = vec![0.0; n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let s = dot(&unit[i], &unit[j]).clamp(-1.0, 1.0);
                        sums[i] += s;
                        sums[j] += s;
                    }
                }
                sums.into_iter().map(|s| s / (n - 1) as f64).collect()
            }
            MadScoring::ToMeanEmbedding => {
                let d = seq.dim();
                let mut mean = vec![0.0; d];
                for u in &unit {
                    for (m, x) in mean.iter_mut().zip(u) {
                        *m += x / n as f64;
                    }
                }
                let mn = norm(&mean);
                unit.iter()
                    .map(|u| if mn == 0.0 { 0.0 } else { (dot(u, &mean) / mn).clamp(-1.0, 1.0) })
                    .collect()
            }
        }
    };

    let med = median(&scores);
    let deviations: Vec<f64> = scores.iter().map(|s| (s - med).abs()).collect();
    let mad = median(&deviations);
    let bound = multiplier * mad + MAD_SLACK;
    let kept = deviations.iter().map(|d| *d <= bound).collect();
    Ok(MadFilterReport {
        kept,
        scores,
        median: med,
        mad,
        multiplier,
    })
}

/// Concatenated means of the sequence, its first differences and its second
/// differences (`3 × dim` values). Missing derivative blocks are zero.
pub fn derivative_pool(seq: &EmbeddingSequence) -> Vec<f64> {
    let d = seq.dim();
    let chunks = seq.chunks();
    let n = chunks.len();
    let mut out = vec![0.0; 3 * d];

    for c in chunks {
        for (o, x) in out[..d].iter_mut().zip(c) {
            *o += x;
        }
    }
    out[..d].iter_mut().for_each(|o| *o /= n as f64);

    if n >= 2 {
        for w in chunks.windows(2) {
            for k in 0..d {
                out[d + k] += w[1][k] - w[0][k];
            }
        }
        out[d..2 * d].iter_mut().for_each(|o| *o /= (n - 1) as f64);
    }
    if n >= 3 {
        for w in chunks.windows(3) {
            for k in 0..d {
                out[2 * d + k] += w[2][k] - 2.0 * w[1][k] + w[0][k];
            }
        }
        out[2 * d..].iter_mut().for_each(|o| *o /= (n - 2) as f64);
    }
    out
}

/// Elementwise min / max / mean / population std of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PooledStats {
    pub fn zeros(width: usize) -> Self {
        PooledStats {
            min: vec![0.0; width],
            max: vec![0.0; width],
            mean: vec![0.0; width],
            std: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// `[min.., max.., mean.., std..]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.width());
        v.extend_from_slice(&self.min);
        v.extend_from_slice(&self.max);
        v.extend_from_slice(&self.mean);
        v.extend_from_slice(&self.std);
        v
    }

    /// Column names matching [`PooledStats::flatten`].
    pub fn column_names(fields: &[impl AsRef<str>]) -> Vec<String> {
        ["min", "max", "mean", "std"]
            .iter()
            .flat_map(|stat| fields.iter().map(move |f| format!("{}_{stat}", f.as_ref())))
            .collect()
    }
}

pub fn stat_pool(stream: &[Vec<f64>]) -> Result<PooledStats> {
    let first = stream
        .first()
        .ok_or_else(|| Error::EmptyInput("statistical pooling of an empty stream".into()))?;
    let d = first.len();
    if let Some(i) = stream.iter().position(|r| r.len() != d) {
        return Err(Error::Shape(format!("stream element {i} has length {}, expected {d}", stream[i].len())));
    }
    let n = stream.len() as f64;
    let mut out = PooledStats {
        min: first.clone(),
        max: first.clone(),
        mean: vec![0.0; d],
        std: vec![0.0; d],
    };
    for r in stream {
        for k in 0..d {
            out.min[k] = out.min[k].min(r[k]);
            out.max[k] = out.max[k].max(r[k]);
            out.mean[k] += r[k] / n;
        }
    }
    for r in stream {
        for k in 0..d {
            let dev = r[k] - out.mean[k];
            out.std[k] += dev * dev / n;
        }
    }
    for k in 0..d {
        out.std[k] = out.std[k].sqrt();
        // Rounding in the mean can step a hair outside [min, max].
        out.mean[k] = out.mean[k].clamp(out.min[k], out.max[k]);
    }
    Ok(out)
}

pub fn stat_pool_scalars(stream: &[f64]) -> Result<PooledStats> {
    let rows: Vec<Vec<f64>> = stream.iter().map(|v| vec![*v]).collect();
    stat_pool(&rows)
}

/// `softmax(scores × temperature)`, computed with max subtraction.
pub fn softmax_temperature(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Parameter(format!("temperature must be positive, got {temperature}")));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("softmax of an empty vector".into()));
    }
    check_finite(scores)?;
    let scaled: Vec<f64> = scores.iter().map(|s| s * temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}
