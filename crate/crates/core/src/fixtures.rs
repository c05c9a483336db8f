//! Deterministic synthetic dataset shaped like the real pipeline inputs.
//!
//! Every video has a binary label. Each modality sees the label through its
//! own noisy channel (an independent label flip plus Gaussian noise), so
//! modalities make partly independent mistakes and a vote across them can
//! beat any single one. The audio channel is nonlinear (the evidence sets
//! the vector norm), the others are linear.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::committee::{enumerate_combos, model_name};
use crate::data_model::{
    format_float_rows, write_feature_table, write_manifest, write_score_csv, write_text, FeatureTable, ManifestEntry,
    Split,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub text_dim: usize,
    pub audio_dim: usize,
    pub video_dim: usize,
    pub stats_dim: usize,
    /// Frames per video, inclusive range.
    pub frames: (usize, usize),
    /// Probability that a modality sees the wrong label.
    pub flip_prob: f64,
    /// Separation of the class means along each modality's signal direction.
    pub signal: f64,
    /// Fraction of videos with one corrupted frame.
    pub outlier_rate: f64,
    /// Noise added to the external candidates' logits.
    pub external_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            n_train: 144,
            n_val: 48,
            n_test: 48,
            text_dim: 16,
            audio_dim: 12,
            video_dim: 8,
            stats_dim: 10,
            frames: (5, 10),
            flip_prob: 0.25,
            signal: 1.2,
            outlier_rate: 0.3,
            external_noise: 1.0,
        }
    }
}

/// In-memory form of the fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub manifest: Vec<ManifestEntry>,
    pub text: FeatureTable,
    pub audio: FeatureTable,
    pub stats: FeatureTable,
    /// Frame embeddings per video, in manifest order.
    pub video: Vec<Vec<Vec<f64>>>,
    /// Tree-ensemble style scores per combination, in combination order.
    pub external: Vec<Vec<f64>>,
}

fn unit_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn table(prefix: &str, ids: &[String], rows: Vec<Vec<f64>>) -> FeatureTable {
    let width = rows.first().map_or(0, Vec::len);
    FeatureTable {
        columns: (0..width).map(|i| format!("{prefix}{i}")).collect(),
        ids: ids.to_vec(),
        rows,
    }
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = spec.n_train + spec.n_val + spec.n_test;
    let ids: Vec<String> = (0..n).map(|i| format!("vid{i:03}")).collect();

    let mut manifest = Vec::with_capacity(n);
    for (i, id) in ids.iter().enumerate() {
        let split = if i < spec.n_train {
            Split::Train
        } else if i < spec.n_train + spec.n_val {
            Split::Val
        } else {
            Split::Test
        };
        // Alternating labels keep every split balanced.
        let label = u8::from((i + i / 7) % 2 == 1);
        manifest.push(ManifestEntry { id: id.clone(), split, label });
    }

    let dims = [spec.text_dim, spec.audio_dim, spec.video_dim, spec.stats_dim];
    let directions: Vec<Vec<f64>> = dims.iter().map(|&d| unit_direction(d, &mut rng)).collect();
    // evidence[m][i]: signed label evidence seen by modality m for video i.
    let mut evidence = vec![vec![0.0; n]; 4];
    for (i, e) in manifest.iter().enumerate() {
        for ev in evidence.iter_mut() {
            let seen = if rng.gen::<f64>() < spec.flip_prob { 1 - e.label } else { e.label };
            ev[i] = (f64::from(seen) * 2.0 - 1.0) * spec.signal * 0.5 + normal.sample(&mut rng) * 0.5;
        }
    }

    let mut dense = |m: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                directions[m]
                    .iter()
                    .map(|d| round4(d * evidence[m][i] + normal.sample(&mut rng) * 0.6))
                    .collect()
            })
            .collect()
    };
    let text = table("t", &ids, dense(0));
    let stats = table("s", &ids, dense(3));
    // Audio carries its evidence in the vector norm, which no linear model can read.
    let audio_rows = (0..n)
        .map(|i| {
            let dir = unit_direction(spec.audio_dim, &mut rng);
            let r = (2.0 + evidence[1][i]).max(0.1);
            dir.iter().map(|d| round4(d * r + normal.sample(&mut rng) * 0.1)).collect()
        })
        .collect();
    let audio = table("a", &ids, audio_rows);

    let mut video = Vec::with_capacity(n);
    let offset = unit_direction(spec.video_dim, &mut rng);
    for i in 0..n {
        let frames = rng.gen_range(spec.frames.0..=spec.frames.1);
        let base: Vec<f64> = (0..spec.video_dim)
            .map(|k| 2.0 * offset[k] + directions[2][k] * evidence[2][i] + normal.sample(&mut rng) * 0.3)
            .collect();
        let mut seq: Vec<Vec<f64>> = (0..frames)
            .map(|_| base.iter().map(|b| round4(b + normal.sample(&mut rng) * 0.05)).collect())
            .collect();
        if rng.gen::<f64>() < spec.outlier_rate {
            let k = rng.gen_range(0..frames);
            seq[k] = base.iter().map(|b| round4(-b + normal.sample(&mut rng))).collect();
        }
        video.push(seq);
    }

    let external = enumerate_combos()
        .into_iter()
        .map(|combo| {
            let mods = combo.modalities();
            (0..n)
                .map(|i| {
                    let z: f64 = mods.iter().map(|m| evidence[m.bit().trailing_zeros() as usize][i]).sum::<f64>()
                        / (mods.len() as f64).sqrt()
                        + normal.sample(&mut rng) * spec.external_noise;
                    ((1.0 / (1.0 + (-z).exp())).clamp(0.01, 0.99) * 100.0).round() / 100.0
                })
                .collect()
        })
        .collect();

    SyntheticData { manifest, text, audio, stats, video, external }
}

/// Pipeline configuration matching the files written by [`write_fixture`].
pub fn fixture_config() -> serde_json::Value {
    json!({
        "manifest": "manifest.jsonl",
        "output_dir": "out",
        "seed": 42,
        "modalities": {
            "text": { "table": "features/text.csv" },
            "audio": { "table": "features/audio.csv" },
            "video": { "sequences": "sequences/video" },
            "stats": { "table": "features/stats.csv" }
        },
        "features": { "pca_dim": 16, "min_variance": 0.99, "mad_multiplier": 50.0 },
        "learners": ["mlp", "logistic"],
        "mlp": {
            "hidden_sizes": [32, 16, 8],
            "input_noise_sigma": 0.1,
            "dropout_p": 0.1,
            "learning_rate": 0.05,
            "epochs": 80,
            "batch_size": 16
        },
        "logistic": { "l2": 0.01, "epochs": 300, "learning_rate": 0.2 },
        "external_candidates": "external",
        "pso": { "particles": 50, "epochs": 100 },
        "lambdas": [0.0, 0.2, 0.4, 0.6, 0.8]
    })
}

/// Writes the dataset and a `config.json` for `pipeline run` under `dir`.
pub fn write_fixture(dir: &Path, spec: &SyntheticSpec) -> Result<()> {
    let data = generate(spec);
    write_manifest(&dir.join("manifest.jsonl"), &data.manifest)?;
    write_feature_table(&dir.join("features/text.csv"), &data.text)?;
    write_feature_table(&dir.join("features/audio.csv"), &data.audio)?;
    write_feature_table(&dir.join("features/stats.csv"), &data.stats)?;
    for (e, seq) in data.manifest.iter().zip(&data.video) {
        write_text(&dir.join(format!("sequences/video/{}.csv", e.id)), &format_float_rows(seq))?;
    }
    let ids: Vec<String> = data.manifest.iter().map(|e| e.id.clone()).collect();
    for (combo, scores) in enumerate_combos().into_iter().zip(&data.external) {
        let name = model_name(combo, "rf");
        write_score_csv(&dir.join(format!("external/{name}.csv")), &ids, scores)?;
    }
    let config = serde_json::to_string_pretty(&fixture_config()).expect("static json");
    write_text(&dir.join("config.json"), &(config + "\n"))
}
