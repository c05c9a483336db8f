//! Command-line front end. Every stage is a subcommand; each written output
//! gets a `<output>.run.json` manifest next to it.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numeric error. Failures print one JSON line on standard error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::audio_stats::{format_chunk_csv, read_wav_mono, video_audio_stats, AudioChunkFeatures, AudioConfig, AudioFeatureExtractor};
use crate::committee::{committee_predict, fit_threshold, load_candidates, Committee, CommitteeMember};
use crate::data_model::{
    align_scores, format_float_rows, load_embedding_sequence, read_feature_table, read_float_csv, read_manifest,
    write_embedding_sequence, write_float_csv, write_score_csv, write_text, EmbeddingSequence, FeatureTable, Modality,
    SampleSet, Split,
};
use crate::ensemble_pso::{lambda_sweep, pso_optimize, EnsembleData, PsoConfig, DEFAULT_LAMBDAS};
use crate::error::{Error, Result};
use crate::feature_ops::{
    apply_pca, apply_scaler, derivative_pool, fit_pca, fit_scaler, mad_filter, stat_pool, MadScoring, PcaModel,
    PooledStats, ScalerModel, DEFAULT_MAD_MULTIPLIER, DEFAULT_TEMPERATURE,
};
use crate::learners::{train_logistic, train_mlp, LogisticConfig, MlpConfig, TrainedModel};
use crate::metrics::{bce, f1_scores, threshold_predictions, MetricReport};
use crate::pipeline::{digest_file, run_pipeline, PipelineConfig, StageReport};
use crate::text_behavior::{
    ambivalence_distribution, assemble_stats_row, compute_text_stats, hesitancy_scores, stats_modality_columns,
    visual_chunk_stats, AmbivalenceProbe, HesitancyLexicon, HesitancyScores, SentenceRecord, StatsModalityInputs,
};

#[derive(Debug, Parser)]
#[command(name = "ah-ensemble", version, about = "Multimodal ambivalence/hesitancy ensemble toolkit")]
struct Cli {
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Embedding post-processing.
    #[command(subcommand)]
    Features(FeaturesCmd),
    /// Handcrafted audio statistics.
    #[command(subcommand)]
    Audio(AudioCmd),
    /// Transcript statistics and embedding-similarity scores.
    #[command(subcommand)]
    Text(TextCmd),
    /// Train a native learner on a feature table.
    #[command(subcommand)]
    Learn(LearnCmd),
    /// Committee selection.
    #[command(subcommand)]
    Committee(CommitteeCmd),
    /// Decision-threshold tuning.
    #[command(subcommand)]
    Threshold(ThresholdCmd),
    /// PSO-weighted hard voting.
    #[command(subcommand)]
    Ensemble(EnsembleCmd),
    /// Metrics for one score file.
    Evaluate(EvaluateArgs),
    /// End-to-end runs.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scoring {
    MeanPairwise,
    MeanEmbedding,
}

impl From<Scoring> for MadScoring {
    fn from(s: Scoring) -> Self {
        match s {
            Scoring::MeanPairwise => MadScoring::MeanPairwise,
            Scoring::MeanEmbedding => MadScoring::ToMeanEmbedding,
        }
    }
}

#[derive(Debug, Args)]
struct InOut {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum FeaturesCmd {
    /// Drop chunks whose consistency score is a MAD outlier.
    MadFilter {
        #[command(flatten)]
        io: InOut,
        #[arg(long, default_value_t = DEFAULT_MAD_MULTIPLIER)]
        multiplier: f64,
        #[arg(long, value_enum, default_value_t = Scoring::MeanPairwise)]
        scoring: Scoring,
        /// Also write the per-chunk scores and flags as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Min / max / mean / std pooling into one row of 4 × dim values.
    Pool {
        #[command(flatten)]
        io: InOut,
    },
    /// Means of the sequence and its first and second differences (3 × dim).
    Derivs {
        #[command(flatten)]
        io: InOut,
    },
    ScaleFit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
    },
    ScaleApply {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: InOut,
    },
    PcaFit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0.99)]
        min_variance: f64,
    },
    PcaApply {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        io: InOut,
    },
}

#[derive(Debug, Subcommand)]
enum AudioCmd {
    /// Per-chunk features of a 16-bit PCM WAV file.
    Stats {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the video-level pooled row.
        #[arg(long)]
        pooled: Option<PathBuf>,
        /// JSON file overriding the default analysis settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum TextCmd {
    /// Transcript statistics; with `--manifest`, the full stats-modality table.
    Stats(TextStatsArgs),
    /// Per-sentence hesitancy scores.
    Hesitancy {
        /// JSONL of `{"text": ..., "embedding": [...]}` records.
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-category pole distributions for each embedding row.
    Ambivalence {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        probe: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
        temperature: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct TextStatsArgs {
    /// Single transcript; prints its statistics as JSON.
    #[arg(long, conflicts_with = "manifest")]
    transcript: Option<PathBuf>,
    /// Build one stats-modality row per manifest id.
    #[arg(long, requires = "out")]
    manifest: Option<PathBuf>,
    /// Directory of `<id>.txt` transcripts.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Directory of `<id>.jsonl` sentence records (needs `--lexicon`).
    #[arg(long, requires = "lexicon")]
    sentences: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Directory of `<id>.csv` whole-transcript embeddings (needs `--probe`).
    #[arg(long, requires = "probe")]
    text_embeddings: Option<PathBuf>,
    #[arg(long)]
    probe: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    temperature: f64,
    /// Directory of `<id>.wav` files.
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Directory of `<id>.csv` frame embeddings.
    #[arg(long)]
    video: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    frames_per_chunk: usize,
    #[arg(long, default_value_t = DEFAULT_MAD_MULTIPLIER)]
    mad_multiplier: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LearnArgs {
    /// Feature table (`id,<columns>`) covering every manifest id.
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_scores: PathBuf,
    /// JSON hyperparameters; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum LearnCmd {
    Mlp(LearnArgs),
    Logistic(LearnArgs),
}

#[derive(Debug, Subcommand)]
enum CommitteeCmd {
    /// Lowest-validation-BCE member per combination, with tuned thresholds.
    Select {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of `<combo>_<algo>.csv` score files.
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, default_value = "committee.json")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum ThresholdCmd {
    /// Macro-F1-optimal threshold on the validation split.
    Fit {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SwarmArgs {
    #[arg(long)]
    committee: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    particles: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.9)]
    inertia: f64,
    #[arg(long, default_value_t = 1.5)]
    c1: f64,
    #[arg(long, default_value_t = 2.1)]
    c2: f64,
    #[arg(long, default_value_t = 0.2)]
    velocity_clamp: f64,
}

#[derive(Debug, Subcommand)]
enum EnsembleCmd {
    /// One swarm at a fixed λ.
    Pso {
        #[command(flatten)]
        swarm: SwarmArgs,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Independent swarms over a λ list.
    Sweep {
        #[command(flatten)]
        swarm: SwarmArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDAS)]
        lambdas: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    split: SplitArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum PipelineCmd {
    /// Run every stage from a JSON config, reusing cached stages.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output_dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

/// What a command read and wrote, for the run manifest.
#[derive(Default)]
struct Outcome {
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    /// Printed on stdout even with `--quiet`.
    stdout: Option<String>,
    /// Where to put the run manifest; defaults to `<first output>.run.json`.
    manifest: Option<PathBuf>,
    stages: Option<Vec<StageReport>>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a [String],
    config: &'a Value,
    seed: Option<u64>,
    version: &'static str,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stages: Option<&'a [StageReport]>,
    wall_time_secs: f64,
}

struct Ctx {
    seed: Option<u64>,
    threads: usize,
    quiet: bool,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn progress(&self, line: &str) {
        if !self.quiet {
            out_line(line);
        }
    }
}

fn out_line(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn error_line(kind: &str, message: &str, code: i32) -> String {
    json!({ "error": kind, "message": message, "exit_code": code }).to_string()
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line("usage", &first, 1));
            return 1;
        }
    };
    let started = Instant::now();
    let command: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let ctx = Ctx { seed: cli.seed, threads: cli.threads, quiet: cli.quiet };
    let result = crate::ensemble_pso::run_in_pool(cli.threads, || dispatch(cli.command, &ctx))
        .and_then(|r| r)
        .and_then(|outcome| finish(&ctx, &command, outcome, started));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", error_line(e.kind(), &e.to_string(), code));
            code
        }
    }
}

fn finish(ctx: &Ctx, command: &[String], outcome: Outcome, started: Instant) -> Result<()> {
    if let Some(s) = &outcome.stdout {
        out_line(s);
    }
    let Some(path) = outcome
        .manifest
        .clone()
        .or_else(|| outcome.outputs.first().map(|p| manifest_path_for(p)))
    else {
        return Ok(());
    };
    let mut inputs = BTreeMap::new();
    for p in &outcome.inputs {
        if p.is_file() {
            inputs.insert(p.display().to_string(), digest_file(p)?);
        }
    }
    let manifest = RunManifest {
        command,
        config: &outcome.config,
        seed: ctx.seed,
        version: env!("CARGO_PKG_VERSION"),
        inputs,
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        stages: outcome.stages.as_deref(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&path, &manifest)?;
    ctx.progress(&json!({ "manifest": path.display().to_string() }).to_string());
    Ok(())
}

fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    output.with_file_name(name)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    write_text(path, &(s + "\n"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn dispatch(cmd: Command, ctx: &Ctx) -> Result<Outcome> {
    match cmd {
        Command::Features(c) => features(c),
        Command::Audio(AudioCmd::Stats { wav, out, pooled, config }) => audio_stats(wav, out, pooled, config),
        Command::Text(c) => text(c),
        Command::Learn(c) => learn(c, ctx),
        Command::Committee(CommitteeCmd::Select { manifest, candidates, out }) => committee_select(manifest, candidates, out),
        Command::Threshold(ThresholdCmd::Fit { scores, manifest, out }) => threshold_fit(scores, manifest, out),
        Command::Ensemble(c) => ensemble(c, ctx),
        Command::Evaluate(a) => evaluate(a),
        Command::Pipeline(PipelineCmd::Run { config, output_dir }) => pipeline(config, output_dir, ctx),
    }
}

fn read_sequence(path: &Path) -> Result<EmbeddingSequence> {
    load_embedding_sequence(path, Modality::Video)
}

fn features(cmd: FeaturesCmd) -> Result<Outcome> {
    match cmd {
        FeaturesCmd::MadFilter { io, multiplier, scoring, report } => {
            let seq = read_sequence(&io.input)?;
            let r = mad_filter(&seq, multiplier, scoring.into())?;
            let kept = seq
                .retain(&r.kept)
                .ok_or_else(|| Error::InsufficientData("MAD filter removed every chunk".into()))?;
            write_embedding_sequence(&io.out, &kept)?;
            let mut outputs = vec![io.out];
            if let Some(p) = report {
                write_json(&p, &r)?;
                outputs.push(p);
            }
            let config = json!({ "multiplier": multiplier, "scoring": to_value(&MadScoring::from(scoring)) });
            Ok(Outcome { config, inputs: vec![io.input], outputs, ..Outcome::default() })
        }
        FeaturesCmd::Pool { io } => {
            let rows = read_float_csv(&io.input)?;
            write_float_csv(&io.out, &[stat_pool(&rows)?.flatten()])?;
            Ok(Outcome { inputs: vec![io.input], outputs: vec![io.out], ..Outcome::default() })
        }
        FeaturesCmd::Derivs { io } => {
            let seq = read_sequence(&io.input)?;
            write_float_csv(&io.out, &[derivative_pool(&seq)])?;
            Ok(Outcome { inputs: vec![io.input], outputs: vec![io.out], ..Outcome::default() })
        }
        FeaturesCmd::ScaleFit { input, out_model } => {
            let model = fit_scaler(&read_float_csv(&input)?)?;
            write_json(&out_model, &model)?;
            Ok(Outcome { inputs: vec![input], outputs: vec![out_model], ..Outcome::default() })
        }
        FeaturesCmd::ScaleApply { model, io } => {
            let m: ScalerModel = read_json(&model)?;
            write_float_csv(&io.out, &apply_scaler(&m, &read_float_csv(&io.input)?)?)?;
            Ok(Outcome { inputs: vec![model, io.input], outputs: vec![io.out], ..Outcome::default() })
        }
        FeaturesCmd::PcaFit { input, out_model, dim, min_variance } => {
            let model = fit_pca(&read_float_csv(&input)?, dim, min_variance)?;
            write_json(&out_model, &model)?;
            let config = json!({ "dim": dim, "min_variance": min_variance, "k": model.k() });
            Ok(Outcome { config, inputs: vec![input], outputs: vec![out_model], ..Outcome::default() })
        }
        FeaturesCmd::PcaApply { model, io } => {
            let m: PcaModel = read_json(&model)?;
            write_float_csv(&io.out, &apply_pca(&m, &read_float_csv(&io.input)?)?)?;
            Ok(Outcome { inputs: vec![model, io.input], outputs: vec![io.out], ..Outcome::default() })
        }
    }
}

fn audio_config(path: Option<&Path>) -> Result<AudioConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(AudioConfig::default()),
    }
}

fn audio_stats(wav: PathBuf, out: PathBuf, pooled: Option<PathBuf>, config: Option<PathBuf>) -> Result<Outcome> {
    let cfg = audio_config(config.as_deref())?;
    let extractor = AudioFeatureExtractor::new(cfg.clone())?;
    let (samples, sr) = read_wav_mono(&wav)?;
    let feats = extractor.signal_features(&samples, sr)?;
    write_text(&out, &format_chunk_csv(&feats))?;
    let mut outputs = vec![out];
    if let Some(p) = pooled {
        let stats = video_audio_stats(&feats)?;
        let header = PooledStats::column_names(&AudioChunkFeatures::FIELDS).join(",");
        write_text(&p, &format!("{header}\n{}", format_float_rows(&[stats.flatten()])))?;
        outputs.push(p);
    }
    let mut inputs = vec![wav];
    inputs.extend(config);
    Ok(Outcome { config: to_value(&cfg), inputs, outputs, ..Outcome::default() })
}

fn read_sentences(path: &Path) -> Result<Vec<SentenceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse { path: path.to_path_buf(), line: i + 1, message: e.to_string() })
        })
        .collect()
}

fn csv_with_header(header: &[String], rows: &[(String, Vec<f64>)], first: &str) -> String {
    let mut out = format!("{first},{}\n", header.join(","));
    for (key, row) in rows {
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{key},{}\n", vals.join(",")));
    }
    out
}

fn text(cmd: TextCmd) -> Result<Outcome> {
    match cmd {
        TextCmd::Stats(a) => text_stats(a),
        TextCmd::Hesitancy { sentences, lexicon, out } => {
            let lex = HesitancyLexicon::load(&lexicon)?;
            let rows = read_sentences(&sentences)?
                .iter()
                .enumerate()
                .map(|(i, s)| Ok((i.to_string(), hesitancy_scores(s, &lex)?.to_vec())))
                .collect::<Result<Vec<_>>>()?;
            write_text(&out, &csv_with_header(&HesitancyScores::field_names(), &rows, "sentence"))?;
            Ok(Outcome { inputs: vec![sentences, lexicon], outputs: vec![out], ..Outcome::default() })
        }
        TextCmd::Ambivalence { embedding, probe, temperature, out } => {
            let p = AmbivalenceProbe::load(&probe, temperature)?;
            let rows = read_float_csv(&embedding)?
                .iter()
                .enumerate()
                .map(|(i, e)| Ok((i.to_string(), ambivalence_distribution(e, &p)?.concat())))
                .collect::<Result<Vec<_>>>()?;
            write_text(&out, &csv_with_header(&AmbivalenceProbe::field_names(), &rows, "row"))?;
            let config = json!({ "temperature": temperature });
            Ok(Outcome { config, inputs: vec![embedding, probe], outputs: vec![out], ..Outcome::default() })
        }
    }
}

fn existing(dir: Option<&Path>, id: &str, ext: &str) -> Option<PathBuf> {
    dir.map(|d| d.join(format!("{id}.{ext}"))).filter(|p| p.is_file())
}

fn text_stats(a: TextStatsArgs) -> Result<Outcome> {
    if let Some(t) = a.transcript {
        let text = std::fs::read_to_string(&t).map_err(|e| Error::io(&t, e))?;
        let stats = compute_text_stats(&text);
        let mut outcome = Outcome { inputs: vec![t], stdout: Some(to_value(&stats).to_string()), ..Outcome::default() };
        if let Some(out) = a.out {
            let header: Vec<String> = crate::text_behavior::TextStats::FIELDS.iter().map(|s| s.to_string()).collect();
            write_text(&out, &format!("{}\n{}", header.join(","), format_float_rows(&[stats.to_vec()])))?;
            outcome.outputs.push(out);
        }
        return Ok(outcome);
    }
    let manifest = a
        .manifest
        .ok_or_else(|| Error::Parameter("`text stats` needs --transcript or --manifest".into()))?;
    if a.frames_per_chunk == 0 {
        return Err(Error::Parameter("--frames-per-chunk must be positive".into()));
    }
    let out = a.out.expect("clap requires --out with --manifest");
    let entries = read_manifest(&manifest)?;
    let lexicon = a.lexicon.as_deref().map(HesitancyLexicon::load).transpose()?;
    let probe = a.probe.as_deref().map(|p| AmbivalenceProbe::load(p, a.temperature)).transpose()?;
    let extractor = AudioFeatureExtractor::new(AudioConfig::default())?;
    let mut inputs = vec![manifest.clone()];
    inputs.extend(a.lexicon.clone());
    inputs.extend(a.probe.clone());
    let mut table = FeatureTable { columns: stats_modality_columns(), ids: Vec::new(), rows: Vec::new() };
    for e in &entries {
        let transcript = match existing(a.transcripts.as_deref(), &e.id, "txt") {
            Some(p) => {
                let t = std::fs::read_to_string(&p).map_err(|err| Error::io(&p, err))?;
                inputs.push(p);
                Some(t)
            }
            None => None,
        };
        let mut hesitancy = Vec::new();
        if let (Some(p), Some(lex)) = (existing(a.sentences.as_deref(), &e.id, "jsonl"), &lexicon) {
            for s in read_sentences(&p)? {
                hesitancy.push(hesitancy_scores(&s, lex)?);
            }
            inputs.push(p);
        }
        let ambivalence = match (existing(a.text_embeddings.as_deref(), &e.id, "csv"), &probe) {
            (Some(p), Some(pr)) => {
                let rows = read_float_csv(&p)?;
                inputs.push(p);
                Some(ambivalence_distribution(&rows[0], pr)?)
            }
            _ => None,
        };
        let audio = match existing(a.audio.as_deref(), &e.id, "wav") {
            Some(p) => {
                let (samples, sr) = read_wav_mono(&p)?;
                inputs.push(p);
                Some(video_audio_stats(&extractor.signal_features(&samples, sr)?)?)
            }
            None => None,
        };
        let visual = match existing(a.video.as_deref(), &e.id, "csv") {
            Some(p) => {
                let seq = read_sequence(&p)?;
                inputs.push(p);
                let report = mad_filter(&seq, a.mad_multiplier, MadScoring::MeanPairwise)?;
                let chunk_of: Vec<usize> = (0..seq.len()).map(|i| i / a.frames_per_chunk).collect();
                Some(visual_chunk_stats(&seq, &report, &chunk_of)?)
            }
            None => None,
        };
        let row = assemble_stats_row(&StatsModalityInputs {
            visual_chunks: visual.as_deref(),
            audio_pooled: audio.as_ref(),
            transcript: transcript.as_deref(),
            hesitancy: &hesitancy,
            ambivalence: ambivalence.as_deref(),
        })?;
        table.ids.push(e.id.clone());
        table.rows.push(row);
    }
    crate::data_model::write_feature_table(&out, &table)?;
    let config = json!({
        "temperature": a.temperature,
        "frames_per_chunk": a.frames_per_chunk,
        "mad_multiplier": a.mad_multiplier,
    });
    Ok(Outcome { config, inputs, outputs: vec![out], ..Outcome::default() })
}

fn load_samples(manifest: &Path) -> Result<SampleSet> {
    SampleSet::from_entries(read_manifest(manifest)?)
}

fn split_indices(samples: &SampleSet, split: Split) -> Vec<usize> {
    (0..samples.len()).filter(|&i| samples.splits()[i] == split).collect()
}

fn learn(cmd: LearnCmd, ctx: &Ctx) -> Result<Outcome> {
    let (args, is_mlp) = match cmd {
        LearnCmd::Mlp(a) => (a, true),
        LearnCmd::Logistic(a) => (a, false),
    };
    let samples = load_samples(&args.manifest)?;
    let table = read_feature_table(&args.train)?;
    let x = table.aligned_to(samples.ids(), &args.train.display().to_string())?;
    let train = split_indices(&samples, Split::Train);
    let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    let yt: Vec<u8> = train.iter().map(|&i| samples.labels()[i]).collect();
    let (model, config) = if is_mlp {
        let mut cfg: MlpConfig = args.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
        if let Some(s) = ctx.seed {
            cfg.seed = s;
        }
        (TrainedModel::Mlp(train_mlp(&xt, &yt, &cfg)?), to_value(&cfg))
    } else {
        let mut cfg: LogisticConfig = args.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
        if let Some(s) = ctx.seed {
            cfg.seed = s;
        }
        (TrainedModel::Logistic(train_logistic(&xt, &yt, &cfg)?), to_value(&cfg))
    };
    model.save(&args.out_model)?;
    let scores = model.predict_proba(&x)?;
    write_score_csv(&args.out_scores, samples.ids(), &scores)?;
    let mut inputs = vec![args.train, args.manifest];
    inputs.extend(args.config);
    Ok(Outcome { config, inputs, outputs: vec![args.out_model, args.out_scores], ..Outcome::default() })
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

fn committee_select(manifest: PathBuf, candidates: PathBuf, out: PathBuf) -> Result<Outcome> {
    let samples = load_samples(&manifest)?;
    let cands = load_candidates(&candidates, &samples)?;
    let mut committee = Committee::select(&cands, &samples)?;
    let base = absolute(out.parent().unwrap_or(Path::new("")));
    for m in &mut committee.members {
        if let Some(p) = &m.scores_file {
            let abs = absolute(p);
            m.scores_file = Some(abs.strip_prefix(&base).map(Path::to_path_buf).unwrap_or(abs));
        }
    }
    committee.save(&out)?;
    let mut inputs = vec![manifest];
    inputs.extend(cands.iter().filter_map(|c| c.source.clone()));
    Ok(Outcome { inputs, outputs: vec![out], ..Outcome::default() })
}

fn threshold_fit(scores: PathBuf, manifest: PathBuf, out: Option<PathBuf>) -> Result<Outcome> {
    let samples = load_samples(&manifest)?;
    let s = align_scores(&samples, &scores)?;
    let val = split_indices(&samples, Split::Val);
    if val.is_empty() {
        return Err(Error::InsufficientData("validation split is empty".into()));
    }
    let vs: Vec<f64> = val.iter().map(|&i| s[i]).collect();
    let vy: Vec<u8> = val.iter().map(|&i| samples.labels()[i]).collect();
    let t = fit_threshold(&vs, &vy)?;
    let report = json!({
        "threshold": t,
        "val_f1": f1_scores(&vy, &threshold_predictions(&vs, t))?.f1_macro,
        "val_bce": bce(&vy, &vs)?,
    });
    let mut outcome = Outcome { inputs: vec![scores, manifest], stdout: Some(report.to_string()), ..Outcome::default() };
    if let Some(p) = out {
        write_json(&p, &report)?;
        outcome.outputs.push(p);
    }
    Ok(outcome)
}

fn committee_votes(committee_path: &Path, manifest: &Path) -> Result<(Vec<CommitteeMember>, EnsembleData, Vec<PathBuf>)> {
    let committee = Committee::load(committee_path)?;
    let mut samples = load_samples(manifest)?;
    let base = committee_path.parent().unwrap_or(Path::new(""));
    let mut inputs = Vec::new();
    for m in &committee.members {
        let file = m
            .scores_file
            .as_ref()
            .ok_or_else(|| Error::IncompleteCommittee(format!("member `{}` has no scores file", m.model)))?;
        let path = if file.is_relative() { base.join(file) } else { file.clone() };
        samples.insert_scores(m.model.clone(), align_scores(&samples, &path)?)?;
        inputs.push(path);
    }
    let votes = committee_predict(&committee.members, &samples)?;
    Ok((committee.members, EnsembleData::from_votes(&votes, &samples)?, inputs))
}

fn ensemble(cmd: EnsembleCmd, ctx: &Ctx) -> Result<Outcome> {
    let (swarm, lambdas, single) = match cmd {
        EnsembleCmd::Pso { swarm, lambda } => (swarm, vec![lambda], true),
        EnsembleCmd::Sweep { swarm, lambdas } => (swarm, lambdas, false),
    };
    let cfg = PsoConfig {
        particles: swarm.particles,
        epochs: swarm.epochs,
        inertia: swarm.inertia,
        c1: swarm.c1,
        c2: swarm.c2,
        lambda: lambdas[0],
        seed: ctx.seed(),
        velocity_clamp: swarm.velocity_clamp,
        threads: ctx.threads,
    };
    let (members, data, mut inputs) = committee_votes(&swarm.committee, &swarm.manifest)?;
    let body = if single {
        json!({ "committee": members, "result": pso_optimize(&data, &cfg)? })
    } else {
        json!({ "committee": members, "sweep": lambda_sweep(&data, &cfg, &lambdas)? })
    };
    write_json(&swarm.out, &body)?;
    inputs.insert(0, swarm.committee);
    inputs.insert(1, swarm.manifest);
    let config = json!({ "pso": to_value(&cfg), "lambdas": lambdas });
    Ok(Outcome { config, inputs, outputs: vec![swarm.out], ..Outcome::default() })
}

fn evaluate(a: EvaluateArgs) -> Result<Outcome> {
    let samples = load_samples(&a.manifest)?;
    let scores = align_scores(&samples, &a.scores)?;
    let idx: Vec<usize> = match a.split {
        SplitArg::All => (0..samples.len()).collect(),
        SplitArg::Train => split_indices(&samples, Split::Train),
        SplitArg::Val => split_indices(&samples, Split::Val),
        SplitArg::Test => split_indices(&samples, Split::Test),
    };
    let y: Vec<u8> = idx.iter().map(|&i| samples.labels()[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
    let report = MetricReport::from_scores(&y, &s, a.threshold)?;
    let text = serde_json::to_string(&report).map_err(|e| Error::json("metric report", e))?;
    let mut outcome = Outcome {
        config: json!({ "threshold": a.threshold }),
        inputs: vec![a.scores, a.manifest],
        stdout: Some(text),
        ..Outcome::default()
    };
    if let Some(p) = a.out {
        write_json(&p, &report)?;
        outcome.outputs.push(p);
    }
    Ok(outcome)
}

fn pipeline(config: PathBuf, output_dir: Option<PathBuf>, ctx: &Ctx) -> Result<Outcome> {
    let mut cfg = PipelineConfig::load(&config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let outcome = run_pipeline(&cfg, ctx.threads)?;
    for s in &outcome.stages {
        ctx.progress(&to_value(s).to_string());
    }
    let selected = &outcome.result.sweep[outcome.result.selected];
    ctx.progress(
        &json!({
            "result": outcome.result_path.display().to_string(),
            "selected_lambda": selected.lambda,
            "ensemble_val_f1": selected.reports.val.f1_macro,
            "best_single_val_f1": outcome.result.best_single.val_f1,
        })
        .to_string(),
    );
    let mut inputs = vec![config];
    inputs.extend(outcome.inputs.keys().cloned());
    Ok(Outcome {
        config: to_value(&cfg),
        inputs,
        manifest: Some(cfg.output_dir.join("run.json")),
        outputs: outcome.outputs,
        stages: Some(outcome.stages),
        stdout: None,
    })
}
