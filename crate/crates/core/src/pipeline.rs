//! End-to-end run: features → candidates → committee → PSO λ sweep.
//!
//! Every stage records a content digest of its inputs in
//! `<output_dir>/cache.json`; a stage whose digest and outputs are unchanged
//! is skipped and reported as cached. All inputs are validated before the
//! output directory is touched.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::committee::{committee_predict, enumerate_combos, model_name, parse_model_name, Candidate, Committee, CommitteeMember};
use crate::data_model::{
    align_scores, read_feature_table, read_float_csv, read_manifest, write_feature_table, write_score_csv, write_text,
    ComboMask, EmbeddingSequence, FeatureTable, Modality, SampleSet, Split,
};
use crate::ensemble_pso::{lambda_sweep, EnsembleData, PsoConfig, PsoResult, DEFAULT_LAMBDAS};
use crate::error::{Error, Result};
use crate::feature_ops::{derivative_pool, fit_pca, fit_scaler, mad_filter, MadScoring, DEFAULT_MAD_MULTIPLIER};
use crate::learners::{train_logistic, train_mlp, LogisticConfig, MlpConfig, ModelKind, TrainedModel};

/// Where one modality's per-video features come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ModalityInput {
    /// Ready feature table (`id,<columns>`).
    Table(PathBuf),
    /// Directory of per-video embedding CSVs (`<id>.csv`), MAD-filtered and
    /// derivative-pooled.
    Sequences(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// PCA target for combinations wider than this; `None` disables PCA.
    pub pca_dim: Option<usize>,
    pub min_variance: f64,
    pub mad_multiplier: f64,
    pub mad_scoring: MadScoring,
    pub standardize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            pca_dim: None,
            min_variance: 0.99,
            mad_multiplier: DEFAULT_MAD_MULTIPLIER,
            mad_scoring: MadScoring::MeanPairwise,
            standardize: true,
        }
    }
}

fn default_learners() -> Vec<ModelKind> {
    vec![ModelKind::Mlp, ModelKind::Logistic]
}

fn default_lambdas() -> Vec<f64> {
    DEFAULT_LAMBDAS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub modalities: BTreeMap<Modality, ModalityInput>,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default = "default_learners")]
    pub learners: Vec<ModelKind>,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub logistic: LogisticConfig,
    /// Directory of `<combo>_<algo>.csv` scores from models trained elsewhere.
    #[serde(default)]
    pub external_candidates: Option<PathBuf>,
    #[serde(default)]
    pub pso: PsoConfig,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
}

impl PipelineConfig {
    /// Parses a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.output_dir);
        for input in self.modalities.values_mut() {
            match input {
                ModalityInput::Table(p) | ModalityInput::Sequences(p) => fix(p),
            }
        }
        if let Some(p) = &mut self.external_candidates {
            fix(p);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub status: StageStatus,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSingle {
    pub model: String,
    pub val_f1: f64,
}

/// Contents of `result.json`. Holds no paths or timings, so identical
/// inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub committee: Vec<CommitteeMember>,
    pub best_single: BestSingle,
    pub sweep: Vec<PsoResult>,
    /// Index into `sweep` of the run with the highest validation macro F1
    /// (the smallest λ on ties).
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub stages: Vec<StageReport>,
    pub result: PipelineResult,
    pub result_path: PathBuf,
    pub outputs: Vec<PathBuf>,
    /// Content digests of every input file read.
    pub inputs: BTreeMap<PathBuf, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

struct Hasher(Sha256);

impl Hasher {
    fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        Hasher(h)
    }

    fn field(&mut self, s: &str) -> &mut Self {
        self.0.update((s.len() as u64).to_le_bytes());
        self.0.update(s.as_bytes());
        self
    }

    fn json(&mut self, v: &impl Serialize) -> &mut Self {
        let s = serde_json::to_string(v).expect("config serializes");
        self.field(&s)
    }

    fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Everything read during validation.
struct Inputs {
    samples: SampleSet,
    raw_features: BTreeMap<Modality, FeatureTable>,
    external: Vec<(String, Vec<f64>)>,
    digests: BTreeMap<PathBuf, String>,
}

fn sequence_table(
    dir: &Path,
    samples: &SampleSet,
    features: &FeatureConfig,
    modality: Modality,
    digests: &mut BTreeMap<PathBuf, String>,
) -> Result<FeatureTable> {
    let mut rows = Vec::with_capacity(samples.len());
    for id in samples.ids() {
        let path = dir.join(format!("{id}.csv"));
        if !path.is_file() {
            return Err(Error::Alignment {
                file: dir.display().to_string(),
                missing: vec![id.clone()],
                unexpected: Vec::new(),
            });
        }
        digests.insert(path.clone(), digest_file(&path)?);
        let seq = EmbeddingSequence::new(id.clone(), modality, read_float_csv(&path)?)?;
        let report = mad_filter(&seq, features.mad_multiplier, features.mad_scoring)?;
        let kept = seq.retain(&report.kept).unwrap_or(seq);
        rows.push(derivative_pool(&kept));
    }
    let width = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Dimension(format!(
            "{}: video `{}` has embedding width {} but others have {}",
            dir.display(),
            samples.ids()[i],
            rows[i].len() / 3,
            width / 3
        )));
    }
    let columns = (0..width)
        .map(|j| {
            let block = ["mean", "d1", "d2"][j / (width / 3)];
            format!("{}_{block}_{}", modality.name(), j % (width / 3))
        })
        .collect();
    Ok(FeatureTable { columns, ids: samples.ids().to_vec(), rows })
}

fn check_split_labels(samples: &SampleSet) -> Result<()> {
    for split in [Split::Train, Split::Val] {
        let labels: Vec<u8> = samples
            .splits()
            .iter()
            .zip(samples.labels())
            .filter(|(s, _)| **s == split)
            .map(|(_, l)| *l)
            .collect();
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if labels.is_empty() {
            return Err(Error::InsufficientData(format!("manifest has no `{split}` rows")));
        }
        if pos == 0 || pos == labels.len() {
            return Err(Error::DegenerateLabels(format!("`{split}` labels contain a single class")));
        }
    }
    Ok(())
}

fn validate(cfg: &PipelineConfig) -> Result<Inputs> {
    if cfg.lambdas.is_empty() {
        return Err(Error::Parameter("`lambdas` is empty".into()));
    }
    if let Some(l) = cfg.lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::Parameter(format!("lambda {l} must be finite and >= 0")));
    }
    if cfg.modalities.is_empty() && cfg.external_candidates.is_none() {
        return Err(Error::Parameter("config lists neither modalities nor external candidates".into()));
    }
    if cfg.features.pca_dim == Some(0) {
        return Err(Error::Parameter("`pca_dim` must be positive".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if cfg.learners.iter().any(|l| !seen.insert(*l)) {
        return Err(Error::Parameter("`learners` lists a model kind twice".into()));
    }
    let mut digests = BTreeMap::new();
    digests.insert(cfg.manifest.clone(), digest_file(&cfg.manifest)?);
    let samples = SampleSet::from_entries(read_manifest(&cfg.manifest)?)?;
    check_split_labels(&samples)?;

    let mut raw_features = BTreeMap::new();
    for (&m, input) in &cfg.modalities {
        let table = match input {
            ModalityInput::Table(p) => {
                digests.insert(p.clone(), digest_file(p)?);
                let t = read_feature_table(p)?;
                let rows = t.aligned_to(samples.ids(), &p.display().to_string())?;
                FeatureTable { columns: t.columns, ids: samples.ids().to_vec(), rows }
            }
            ModalityInput::Sequences(dir) => {
                if !dir.is_dir() {
                    return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
                }
                sequence_table(dir, &samples, &cfg.features, m, &mut digests)?
            }
        };
        raw_features.insert(m, table);
    }

    let mut external = Vec::new();
    if let Some(dir) = &cfg.external_candidates {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        for p in paths {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let (combo, algo) = parse_model_name(&stem)?;
            if cfg.learners.iter().any(|l| l.name() == algo) && combo.modalities().iter().all(|m| raw_features.contains_key(m)) {
                return Err(Error::Parameter(format!(
                    "external candidate `{stem}` collides with a natively trained candidate"
                )));
            }
            digests.insert(p.clone(), digest_file(&p)?);
            external.push((model_name(combo, &algo), align_scores(&samples, &p)?));
        }
    }

    let covered: std::collections::HashSet<ComboMask> = enumerate_combos()
        .into_iter()
        .filter(|c| !cfg.learners.is_empty() && c.modalities().iter().all(|m| raw_features.contains_key(m)))
        .chain(external.iter().map(|(n, _)| parse_model_name(n).expect("validated").0))
        .collect();
    if let Some(c) = enumerate_combos().into_iter().find(|c| !covered.contains(c)) {
        return Err(Error::MissingCandidates(c.label()));
    }

    Ok(Inputs { samples, raw_features, external, digests })
}

struct Cache {
    path: PathBuf,
    digests: BTreeMap<String, String>,
}

impl Cache {
    fn open(dir: &Path) -> Cache {
        let path = dir.join("cache.json");
        let digests = fs::read_to_string(&path)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default();
        Cache { path, digests }
    }

    fn fresh(&self, stage: &str, digest: &str, outputs: &[PathBuf]) -> bool {
        self.digests.get(stage).is_some_and(|d| d == digest) && outputs.iter().all(|p| p.is_file())
    }

    fn record(&mut self, stage: &str, digest: &str) -> Result<()> {
        self.digests.insert(stage.to_string(), digest.to_string());
        let json = serde_json::to_string_pretty(&self.digests).map_err(|e| Error::json("cache", e))?;
        write_text(&self.path, &(json + "\n"))
    }
}

fn run_stage(
    cache: &mut Cache,
    reports: &mut Vec<StageReport>,
    stage: &str,
    digest: String,
    outputs: &[PathBuf],
    body: impl FnOnce() -> Result<()>,
) -> Result<()> {
    let status = if cache.fresh(stage, &digest, outputs) {
        StageStatus::Cached
    } else {
        body()?;
        cache.record(stage, &digest)?;
        StageStatus::Ran
    };
    reports.push(StageReport { stage: stage.to_string(), status, digest });
    Ok(())
}

fn train_indices(samples: &SampleSet) -> Vec<usize> {
    (0..samples.len()).filter(|&i| samples.splits()[i] == Split::Train).collect()
}

fn standardized(table: &FeatureTable, train: &[usize], on: bool) -> Result<FeatureTable> {
    if !on {
        return Ok(table.clone());
    }
    let fit_rows: Vec<Vec<f64>> = train.iter().map(|&i| table.rows[i].clone()).collect();
    let scaler = fit_scaler(&fit_rows)?;
    Ok(FeatureTable { rows: scaler.transform(&table.rows)?, ..table.clone() })
}

fn combo_matrix(combo: ComboMask, features: &BTreeMap<Modality, FeatureTable>, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| combo.modalities().iter().flat_map(|m| features[m].rows[i].iter().copied()).collect())
        .collect()
}

fn train_candidate(
    cfg: &PipelineConfig,
    combo: ComboMask,
    kind: ModelKind,
    features: &BTreeMap<Modality, FeatureTable>,
    samples: &SampleSet,
) -> Result<Vec<f64>> {
    let train = train_indices(samples);
    let mut x = combo_matrix(combo, features, samples.len());
    if let Some(k) = cfg.features.pca_dim.filter(|&k| x[0].len() > k) {
        let fit_rows: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        x = fit_pca(&fit_rows, k, cfg.features.min_variance)?.transform(&x)?;
    }
    let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    let yt: Vec<u8> = train.iter().map(|&i| samples.labels()[i]).collect();
    let seed = cfg.seed.wrapping_mul(1000).wrapping_add(u64::from(combo.bits()));
    let model = match kind {
        ModelKind::Mlp => TrainedModel::Mlp(train_mlp(&xt, &yt, &MlpConfig { seed, ..cfg.mlp.clone() })?),
        ModelKind::Logistic => {
            TrainedModel::Logistic(train_logistic(&xt, &yt, &LogisticConfig { seed, ..cfg.logistic.clone() })?)
        }
    };
    model.predict_proba(&x)
}

fn best_single(members: &[CommitteeMember]) -> BestSingle {
    let mut best = &members[0];
    for m in members {
        if m.val_f1 > best.val_f1 {
            best = m;
        }
    }
    BestSingle { model: best.model.clone(), val_f1: best.val_f1 }
}

fn select_run(sweep: &[PsoResult]) -> usize {
    let mut best = 0;
    for (i, r) in sweep.iter().enumerate() {
        if r.reports.val.f1_macro > sweep[best].reports.val.f1_macro {
            best = i;
        }
    }
    best
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    write_text(path, &(json + "\n"))
}

/// Runs every stage. `threads` bounds intra-stage parallelism (0 = default)
/// and does not affect results.
pub fn run_pipeline(cfg: &PipelineConfig, threads: usize) -> Result<PipelineOutcome> {
    let inputs = validate(cfg)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut cache = Cache::open(out);
    let mut reports = Vec::new();
    let samples = &inputs.samples;
    let manifest_digest = inputs.digests[&cfg.manifest].clone();

    // Features.
    let feature_paths: BTreeMap<Modality, PathBuf> =
        inputs.raw_features.keys().map(|m| (*m, out.join(format!("features/{}.csv", m.name())))).collect();
    let mut h = Hasher::new("features");
    h.field(&manifest_digest).json(&cfg.features);
    for (m, input) in &cfg.modalities {
        h.field(m.name()).json(input);
    }
    let external_dir = cfg.external_candidates.as_deref();
    for (p, d) in &inputs.digests {
        if external_dir.is_some_and(|dir| p.starts_with(dir)) {
            continue;
        }
        h.field(&p.display().to_string()).field(d);
    }
    let outputs: Vec<PathBuf> = feature_paths.values().cloned().collect();
    run_stage(&mut cache, &mut reports, "features", h.finish(), &outputs, || {
        let train = train_indices(samples);
        for (m, table) in &inputs.raw_features {
            write_feature_table(&feature_paths[m], &standardized(table, &train, cfg.features.standardize)?)?;
        }
        Ok(())
    })?;

    // Candidates.
    let candidates_dir = out.join("candidates");
    let mut native: Vec<(ComboMask, ModelKind)> = Vec::new();
    for combo in enumerate_combos() {
        if combo.modalities().iter().all(|m| inputs.raw_features.contains_key(m)) {
            native.extend(cfg.learners.iter().map(|k| (combo, *k)));
        }
    }
    let mut names: Vec<String> = native.iter().map(|(c, k)| model_name(*c, k.name())).collect();
    names.extend(inputs.external.iter().map(|(n, _)| n.clone()));
    let candidate_paths: Vec<PathBuf> = names.iter().map(|n| candidates_dir.join(format!("{n}.csv"))).collect();
    let mut h = Hasher::new("candidates");
    h.field(&manifest_digest)
        .json(&cfg.features.pca_dim)
        .json(&cfg.features.min_variance)
        .json(&cfg.learners)
        .json(&cfg.mlp)
        .json(&cfg.logistic)
        .json(&cfg.seed);
    for p in feature_paths.values() {
        h.field(&digest_file(p)?);
    }
    for (n, s) in &inputs.external {
        h.field(n).json(s);
    }
    run_stage(&mut cache, &mut reports, "candidates", h.finish(), &candidate_paths, || {
        let features = feature_paths
            .iter()
            .map(|(m, p)| Ok((*m, read_feature_table(p)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let run = || {
            native
                .par_iter()
                .map(|&(combo, kind)| train_candidate(cfg, combo, kind, &features, samples))
                .collect::<Result<Vec<_>>>()
        };
        let scores = crate::ensemble_pso::run_in_pool(threads, run)??;
        let all = scores.iter().chain(inputs.external.iter().map(|(_, s)| s));
        for (path, s) in candidate_paths.iter().zip(all) {
            write_score_csv(path, samples.ids(), s)?;
        }
        Ok(())
    })?;

    // Committee.
    let committee_path = out.join("committee.json");
    let mut h = Hasher::new("committee");
    h.field(&manifest_digest);
    for p in &candidate_paths {
        h.field(&digest_file(p)?);
    }
    run_stage(&mut cache, &mut reports, "committee", h.finish(), std::slice::from_ref(&committee_path), || {
        let candidates = names
            .iter()
            .zip(&candidate_paths)
            .map(|(n, p)| {
                let (combo, algorithm) = parse_model_name(n)?;
                let scores = align_scores(samples, p)?;
                Ok(Candidate { combo, algorithm, scores, source: Some(PathBuf::from(format!("candidates/{n}.csv"))) })
            })
            .collect::<Result<Vec<_>>>()?;
        Committee::select(&candidates, samples)?.save(&committee_path)
    })?;

    // Ensemble.
    let result_path = out.join("result.json");
    let mut h = Hasher::new("ensemble");
    h.field(&manifest_digest).field(&digest_file(&committee_path)?).json(&cfg.pso).json(&cfg.lambdas).json(&cfg.seed);
    for p in &candidate_paths {
        h.field(&digest_file(p)?);
    }
    run_stage(&mut cache, &mut reports, "ensemble", h.finish(), std::slice::from_ref(&result_path), || {
        let committee = Committee::load(&committee_path)?;
        let mut scored = samples.clone();
        for m in &committee.members {
            scored.insert_scores(m.model.clone(), align_scores(samples, &candidates_dir.join(format!("{}.csv", m.model)))?)?;
        }
        let votes = committee_predict(&committee.members, &scored)?;
        let data = EnsembleData::from_votes(&votes, &scored)?;
        let base = PsoConfig { seed: cfg.seed, threads, ..cfg.pso.clone() };
        let sweep = lambda_sweep(&data, &base, &cfg.lambdas)?;
        let result = PipelineResult {
            best_single: best_single(&committee.members),
            selected: select_run(&sweep),
            committee: committee.members,
            sweep,
        };
        write_json(&result_path, &result)
    })?;

    let text = fs::read_to_string(&result_path).map_err(|e| Error::io(&result_path, e))?;
    let result: PipelineResult =
        serde_json::from_str(&text).map_err(|e| Error::json(result_path.display().to_string(), e))?;
    let mut outputs = outputs;
    outputs.extend(candidate_paths);
    outputs.push(committee_path);
    outputs.push(result_path.clone());
    Ok(PipelineOutcome { stages: reports, result, result_path, outputs, inputs: inputs.digests })
}
