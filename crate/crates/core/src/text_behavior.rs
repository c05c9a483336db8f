//! Transcript statistics, hesitancy margins and ambivalence pole distributions.
//!
//! Sentence and prompt embeddings come from an external text encoder. This
//! module only compares them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_model::EmbeddingSequence;
use crate::error::{Error, Result};
use crate::feature_ops::{cosine_similarity, norm, softmax_temperature, stat_pool, MadFilterReport, PooledStats};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TextStats {
    pub word_count: usize,
    pub short_pauses: usize,
    pub long_pauses: usize,
    pub consecutive_repetitions: usize,
    pub lexical_diversity: f64,
}

impl TextStats {
    pub const FIELDS: [&'static str; 5] = [
        "word_count",
        "short_pauses",
        "long_pauses",
        "consecutive_repetitions",
        "lexical_diversity",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.word_count as f64,
            self.short_pauses as f64,
            self.long_pauses as f64,
            self.consecutive_repetitions as f64,
            self.lexical_diversity,
        ]
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Lowercased whitespace tokens with surrounding punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Sentences split on runs of terminal punctuation.
pub fn split_sentences(text: &str) -> Vec<String> {
    text.split(is_terminal)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn compute_text_stats(transcript: &str) -> TextStats {
    let words = tokenize(transcript);
    let short_pauses = transcript.chars().filter(|c| *c == ',').count();
    // An ellipsis or "?!" counts as one long pause.
    let mut long_pauses = 0;
    let mut prev_terminal = false;
    for c in transcript.chars() {
        let t = is_terminal(c);
        if t && !prev_terminal {
            long_pauses += 1;
        }
        prev_terminal = t;
    }
    let consecutive_repetitions = words.windows(2).filter(|w| w[0] == w[1]).count();
    let unique: std::collections::HashSet<&str> = words.iter().map(String::as_str).collect();
    let lexical_diversity = if words.is_empty() {
        0.0
    } else {
        unique.len() as f64 / words.len() as f64
    };
    TextStats {
        word_count: words.len(),
        short_pauses,
        long_pauses,
        consecutive_repetitions,
        lexical_diversity,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionSet {
    pub expressions: Vec<String>,
    pub embeddings: Vec<Vec<f64>>,
}

type SidecarFile = BTreeMap<String, ExpressionSet>;

fn read_sidecar(path: &Path) -> Result<SidecarFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn check_sets<'a>(sets: impl Iterator<Item = (&'a str, &'a ExpressionSet)>) -> Result<usize> {
    let mut dim = None;
    for (name, set) in sets {
        if set.embeddings.is_empty() {
            return Err(Error::EmptyInput(format!("category `{name}` has no embeddings")));
        }
        if set.expressions.len() != set.embeddings.len() {
            return Err(Error::Shape(format!(
                "category `{name}` has {} expressions but {} embeddings",
                set.expressions.len(),
                set.embeddings.len()
            )));
        }
        for e in &set.embeddings {
            match dim {
                None => dim = Some(e.len()),
                Some(d) if d != e.len() => {
                    return Err(Error::Dimension(format!(
                        "category `{name}` embedding has length {} but others have {d}",
                        e.len()
                    )))
                }
                _ => {}
            }
        }
    }
    dim.filter(|d| *d > 0)
        .ok_or_else(|| Error::Dimension("embeddings must be non-empty vectors".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HesitancyCategory {
    FillerWords,
    FillerSounds,
    Hedging,
    Corrections,
}

impl HesitancyCategory {
    pub const ALL: [HesitancyCategory; 4] = [
        HesitancyCategory::FillerWords,
        HesitancyCategory::FillerSounds,
        HesitancyCategory::Hedging,
        HesitancyCategory::Corrections,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HesitancyCategory::FillerWords => "filler_words",
            HesitancyCategory::FillerSounds => "filler_sounds",
            HesitancyCategory::Hedging => "hedging",
            HesitancyCategory::Corrections => "corrections",
        }
    }
}

/// Expression dictionaries for the four hesitancy categories.
#[derive(Debug, Clone, PartialEq)]
pub struct HesitancyLexicon {
    sets: [ExpressionSet; 4],
    dim: usize,
}

impl HesitancyLexicon {
    pub fn new(mut sets: BTreeMap<String, ExpressionSet>) -> Result<Self> {
        let mut ordered = Vec::with_capacity(4);
        for c in HesitancyCategory::ALL {
            let set = sets
                .remove(c.name())
                .ok_or_else(|| Error::Parameter(format!("lexicon lacks category `{}`", c.name())))?;
            ordered.push(set);
        }
        if let Some(extra) = sets.keys().next() {
            return Err(Error::Parameter(format!("unknown hesitancy category `{extra}`")));
        }
        let dim = check_sets(HesitancyCategory::ALL.iter().map(|c| c.name()).zip(ordered.iter()))?;
        let sets: [ExpressionSet; 4] = ordered.try_into().expect("four categories");
        Ok(HesitancyLexicon { sets, dim })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(read_sidecar(path)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn category(&self, c: HesitancyCategory) -> &ExpressionSet {
        &self.sets[c as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub text: String,
    pub embedding: Vec<f64>,
}

/// Best similarity per category and its margin over the other categories'
/// mean, both in [`HesitancyCategory::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HesitancyScores {
    pub raw: [f64; 4],
    pub margin: [f64; 4],
}

impl HesitancyScores {
    pub fn to_vec(&self) -> Vec<f64> {
        self.raw.iter().chain(&self.margin).copied().collect()
    }

    pub fn field_names() -> Vec<String> {
        let raw = HesitancyCategory::ALL.iter().map(|c| format!("hes_{}_raw", c.name()));
        let margin = HesitancyCategory::ALL.iter().map(|c| format!("hes_{}_margin", c.name()));
        raw.chain(margin).collect()
    }
}

fn require_nonzero(v: &[f64], expected_dim: usize) -> Result<()> {
    if v.len() != expected_dim {
        return Err(Error::Dimension(format!(
            "embedding has length {} but the reference embeddings have {expected_dim}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite embedding value".into()));
    }
    if norm(v) == 0.0 {
        return Err(Error::UndefinedSimilarity { chunk: None });
    }
    Ok(())
}

pub fn hesitancy_scores(sentence: &SentenceRecord, lex: &HesitancyLexicon) -> Result<HesitancyScores> {
    require_nonzero(&sentence.embedding, lex.dim())?;
    let mut raw = [0.0; 4];
    for (r, set) in raw.iter_mut().zip(&lex.sets) {
        let mut best = f64::NEG_INFINITY;
        for e in &set.embeddings {
            best = best.max(cosine_similarity(&sentence.embedding, e)?);
        }
        *r = best;
    }
    let total: f64 = raw.iter().sum();
    let mut margin = [0.0; 4];
    for (m, r) in margin.iter_mut().zip(&raw) {
        *m = r - (total - r) / 3.0;
    }
    Ok(HesitancyScores { raw, margin })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbivalenceCategory {
    Sentiment,
    Capability,
    Excuse,
    Success,
    Motivation,
    Opportunity,
}

impl AmbivalenceCategory {
    pub const ALL: [AmbivalenceCategory; 6] = [
        AmbivalenceCategory::Sentiment,
        AmbivalenceCategory::Capability,
        AmbivalenceCategory::Excuse,
        AmbivalenceCategory::Success,
        AmbivalenceCategory::Motivation,
        AmbivalenceCategory::Opportunity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AmbivalenceCategory::Sentiment => "sentiment",
            AmbivalenceCategory::Capability => "capability",
            AmbivalenceCategory::Excuse => "excuse",
            AmbivalenceCategory::Success => "success",
            AmbivalenceCategory::Motivation => "motivation",
            AmbivalenceCategory::Opportunity => "opportunity",
        }
    }
}

pub const POLES: [&str; 4] = ["neutral", "negative", "positive", "both"];

/// One prompt embedding per pole for each ambivalence category.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbivalenceProbe {
    /// `[category][pole]` embeddings in [`AmbivalenceCategory::ALL`] / [`POLES`] order.
    poles: Vec<[Vec<f64>; 4]>,
    pub temperature: f64,
    dim: usize,
}

impl AmbivalenceProbe {
    /// Builds a probe from the sidecar layout where each category's
    /// `expressions` name the poles.
    pub fn new(mut sets: BTreeMap<String, ExpressionSet>, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Parameter(format!("temperature must be positive, got {temperature}")));
        }
        let mut poles = Vec::with_capacity(6);
        let mut checked = Vec::with_capacity(6);
        for c in AmbivalenceCategory::ALL {
            let set = sets
                .remove(c.name())
                .ok_or_else(|| Error::Parameter(format!("probe lacks category `{}`", c.name())))?;
            let mut by_pole: [Option<Vec<f64>>; 4] = Default::default();
            for (expr, emb) in set.expressions.iter().zip(&set.embeddings) {
                let p = POLES
                    .iter()
                    .position(|p| p == expr)
                    .ok_or_else(|| Error::Parameter(format!("category `{}`: unknown pole `{expr}`", c.name())))?;
                if by_pole[p].replace(emb.clone()).is_some() {
                    return Err(Error::Parameter(format!("category `{}`: pole `{expr}` given twice", c.name())));
                }
            }
            let filled: Vec<Vec<f64>> = by_pole
                .into_iter()
                .enumerate()
                .map(|(i, e)| e.ok_or_else(|| Error::Parameter(format!("category `{}` lacks pole `{}`", c.name(), POLES[i]))))
                .collect::<Result<_>>()?;
            poles.push(filled.try_into().expect("four poles"));
            checked.push((c.name(), set));
        }
        if let Some(extra) = sets.keys().next() {
            return Err(Error::Parameter(format!("unknown ambivalence category `{extra}`")));
        }
        let dim = check_sets(checked.iter().map(|(n, s)| (*n, s)))?;
        Ok(AmbivalenceProbe { poles, temperature, dim })
    }

    pub fn load(path: &Path, temperature: f64) -> Result<Self> {
        Self::new(read_sidecar(path)?, temperature)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field_names() -> Vec<String> {
        AmbivalenceCategory::ALL
            .iter()
            .flat_map(|c| POLES.iter().map(move |p| format!("amb_{}_{p}", c.name())))
            .collect()
    }
}

/// Softmax over the four pole similarities for each category.
pub fn ambivalence_distribution(text_embedding: &[f64], probe: &AmbivalenceProbe) -> Result<Vec<[f64; 4]>> {
    require_nonzero(text_embedding, probe.dim())?;
    probe
        .poles
        .iter()
        .map(|poles| {
            let mut sims = [0.0; 4];
            for (s, p) in sims.iter_mut().zip(poles) {
                *s = cosine_similarity(text_embedding, p)?;
            }
            let dist = softmax_temperature(&sims, probe.temperature)?;
            Ok([dist[0], dist[1], dist[2], dist[3]])
        })
        .collect()
}

/// Pooled per-sentence scores plus a validity flag; an empty transcript
/// yields zeros with `valid == false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePool {
    pub stats: PooledStats,
    pub valid: bool,
}

pub fn sentence_level_pool(per_sentence: &[Vec<f64>], width: usize) -> Result<SentencePool> {
    if per_sentence.is_empty() {
        return Ok(SentencePool {
            stats: PooledStats::zeros(width),
            valid: false,
        });
    }
    Ok(SentencePool {
        stats: stat_pool(per_sentence)?,
        valid: true,
    })
}

/// Quality statistics for one time chunk of visual frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisualChunkStats {
    pub valid_chunk: f64,
    pub valid_ratio: f64,
    pub similarity_mean: f64,
}

impl VisualChunkStats {
    pub const FIELDS: [&'static str; 3] = ["valid_chunk", "valid_ratio", "similarity_mean"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.valid_chunk, self.valid_ratio, self.similarity_mean]
    }
}

/// Per-chunk visual statistics. `chunk_of_frame[i]` is the time chunk that
/// frame `i` belongs to; chunks are numbered from 0.
pub fn visual_chunk_stats(
    frames: &EmbeddingSequence,
    report: &MadFilterReport,
    chunk_of_frame: &[usize],
) -> Result<Vec<VisualChunkStats>> {
    if chunk_of_frame.len() != frames.len() || report.kept.len() != frames.len() {
        return Err(Error::Shape(format!(
            "{} frames, {} chunk assignments, {} filter flags",
            frames.len(),
            chunk_of_frame.len(),
            report.kept.len()
        )));
    }
    let n_chunks = chunk_of_frame.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_chunks];
    for (i, &c) in chunk_of_frame.iter().enumerate() {
        members[c].push(i);
    }
    let chunks = frames.chunks();
    members
        .iter()
        .map(|idx| {
            if idx.is_empty() {
                return Ok(VisualChunkStats { valid_chunk: 0.0, valid_ratio: 0.0, similarity_mean: 0.0 });
            }
            let kept = idx.iter().filter(|&&i| report.kept[i]).count();
            let similarity_mean = if idx.len() == 1 {
                1.0
            } else {
                let mut sum = 0.0;
                let mut pairs = 0usize;
                for (a, &i) in idx.iter().enumerate() {
                    for &j in &idx[a + 1..] {
                        sum += cosine_similarity(&chunks[i], &chunks[j])?;
                        pairs += 1;
                    }
                }
                sum / pairs as f64
            };
            Ok(VisualChunkStats {
                valid_chunk: if kept > 0 { 1.0 } else { 0.0 },
                valid_ratio: kept as f64 / idx.len() as f64,
                similarity_mean,
            })
        })
        .collect()
}

/// Inputs for one video's statistical-modality row. Absent parts are
/// zero-filled with their validity flag cleared.
#[derive(Debug, Clone, Default)]
pub struct StatsModalityInputs<'a> {
    pub visual_chunks: Option<&'a [VisualChunkStats]>,
    pub audio_pooled: Option<&'a PooledStats>,
    pub transcript: Option<&'a str>,
    pub hesitancy: &'a [HesitancyScores],
    pub ambivalence: Option<&'a [[f64; 4]]>,
}

pub fn stats_modality_columns() -> Vec<String> {
    let mut cols = Vec::new();
    cols.extend(PooledStats::column_names(&VisualChunkStats::FIELDS.map(|f| format!("vis_{f}"))));
    cols.push("vis_valid".into());
    cols.extend(PooledStats::column_names(&crate::audio_stats::AudioChunkFeatures::FIELDS.map(|f| format!("aud_{f}"))));
    cols.push("aud_valid".into());
    cols.extend(TextStats::FIELDS.iter().map(|f| format!("txt_{f}")));
    cols.extend(PooledStats::column_names(&HesitancyScores::field_names()));
    cols.push("hes_valid".into());
    cols.extend(AmbivalenceProbe::field_names());
    cols.push("amb_valid".into());
    cols
}

/// Assembles one row matching [`stats_modality_columns`].
pub fn assemble_stats_row(inputs: &StatsModalityInputs<'_>) -> Result<Vec<f64>> {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut row = Vec::new();

    let vis_rows: Vec<Vec<f64>> = inputs.visual_chunks.unwrap_or(&[]).iter().map(VisualChunkStats::to_vec).collect();
    let vis = sentence_level_pool(&vis_rows, VisualChunkStats::FIELDS.len())?;
    row.extend(vis.stats.flatten());
    row.push(flag(vis.valid));

    match inputs.audio_pooled {
        Some(p) if p.width() == 8 => {
            row.extend(p.flatten());
            row.push(1.0);
        }
        Some(p) => {
            return Err(Error::Shape(format!("pooled audio stats have width {}, expected 8", p.width())))
        }
        None => {
            row.extend(PooledStats::zeros(8).flatten());
            row.push(0.0);
        }
    }

    row.extend(compute_text_stats(inputs.transcript.unwrap_or("")).to_vec());

    let hes_rows: Vec<Vec<f64>> = inputs.hesitancy.iter().map(HesitancyScores::to_vec).collect();
    let hes = sentence_level_pool(&hes_rows, 8)?;
    row.extend(hes.stats.flatten());
    row.push(flag(hes.valid));

    match inputs.ambivalence {
        Some(d) if d.len() == 6 => {
            row.extend(d.iter().flatten());
            row.push(1.0);
        }
        Some(d) => return Err(Error::Shape(format!("{} ambivalence categories, expected 6", d.len()))),
        None => {
            row.extend([0.0; 24]);
            row.push(0.0);
        }
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Modality;
    use proptest::prelude::*;

    fn set(embs: Vec<Vec<f64>>) -> ExpressionSet {
        ExpressionSet {
            expressions: (0..embs.len()).map(|i| format!("e{i}")).collect(),
            embeddings: embs,
        }
    }

    fn axis(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn orthogonal_lexicon() -> HesitancyLexicon {
        let mut m = BTreeMap::new();
        for (i, c) in HesitancyCategory::ALL.iter().enumerate() {
            m.insert(c.name().to_string(), set(vec![axis(i, 4)]));
        }
        HesitancyLexicon::new(m).unwrap()
    }

    fn probe_with_both_axis(temperature: f64) -> AmbivalenceProbe {
        let mut m = BTreeMap::new();
        for c in AmbivalenceCategory::ALL {
            m.insert(
                c.name().to_string(),
                ExpressionSet {
                    expressions: POLES.iter().map(|p| p.to_string()).collect(),
                    embeddings: vec![axis(0, 4), axis(1, 4), axis(2, 4), axis(3, 4)],
                },
            );
        }
        AmbivalenceProbe::new(m, temperature).unwrap()
    }

    #[test]
    fn text_stats_examples() {
        let s = compute_text_stats("well well, I mean.");
        assert_eq!(s.word_count, 4);
        assert_eq!(s.short_pauses, 1);
        assert_eq!(s.long_pauses, 1);
        assert_eq!(s.consecutive_repetitions, 1);
        assert!((s.lexical_diversity - 0.75).abs() < 1e-12);

        assert_eq!(compute_text_stats(""), TextStats::default());

        let abc = compute_text_stats("a b c");
        assert_eq!(abc.lexical_diversity, 1.0);
        assert_eq!(abc.consecutive_repetitions, 0);

        assert_eq!(compute_text_stats("Wait... what?!").long_pauses, 2);
    }

    #[test]
    fn sentences_split_on_terminal_punctuation() {
        assert_eq!(split_sentences("I think so. Maybe not!  Um... ok"), vec!["I think so", "Maybe not", "Um", "ok"]);
    }

    #[test]
    fn hesitancy_exact_expression_match() {
        // 2-D toy: filler_words sits on the same direction as the sentence and
        // every other category is orthogonal to it.
        let mut m = BTreeMap::new();
        m.insert("filler_words".into(), set(vec![vec![1.0, 0.0], vec![0.6, 0.8]]));
        for c in ["filler_sounds", "hedging", "corrections"] {
            m.insert(c.into(), set(vec![vec![0.0, 1.0]]));
        }
        let lex = HesitancyLexicon::new(m).unwrap();
        let s = SentenceRecord { text: "um like".into(), embedding: vec![1.0, 0.0] };
        let h = hesitancy_scores(&s, &lex).unwrap();
        assert!((h.raw[0] - 1.0).abs() < 1e-12);
        assert!((h.margin[0] - 1.0).abs() < 1e-12);
        assert!(h.margin[1..].iter().all(|m| *m < 0.0));
    }

    #[test]
    fn hesitancy_orthogonal_axes() {
        let lex = orthogonal_lexicon();
        let h = hesitancy_scores(&SentenceRecord { text: String::new(), embedding: axis(0, 4) }, &lex).unwrap();
        let want = [1.0, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0];
        for (a, b) in h.margin.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let even = hesitancy_scores(&SentenceRecord { text: String::new(), embedding: vec![1.0; 4] }, &lex).unwrap();
        assert!(even.margin.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn hesitancy_zero_embedding_errors() {
        let lex = orthogonal_lexicon();
        let r = hesitancy_scores(&SentenceRecord { text: String::new(), embedding: vec![0.0; 4] }, &lex);
        assert!(matches!(r, Err(Error::UndefinedSimilarity { .. })));
    }

    #[test]
    fn ambivalence_examples() {
        let probe = probe_with_both_axis(10.0);
        let uniform = ambivalence_distribution(&[1.0, 1.0, 1.0, 1.0], &probe).unwrap();
        for d in &uniform {
            assert!(d.iter().all(|p| (p - 0.25).abs() < 1e-12));
        }
        let both = ambivalence_distribution(&axis(3, 4), &probe).unwrap();
        assert!(both.iter().all(|d| d[3] > 0.99));

        let x = [0.2, 0.1, 0.5, 0.3];
        let lo = ambivalence_distribution(&x, &probe).unwrap();
        let hi = ambivalence_distribution(&x, &probe_with_both_axis(20.0)).unwrap();
        assert!(hi[0][2] > lo[0][2]);
        assert!(ambivalence_distribution(&[0.0; 4], &probe).is_err());
    }

    #[test]
    fn probe_requires_all_poles() {
        let mut m = BTreeMap::new();
        for c in AmbivalenceCategory::ALL {
            m.insert(
                c.name().to_string(),
                ExpressionSet { expressions: vec!["neutral".into()], embeddings: vec![axis(0, 2)] },
            );
        }
        assert!(matches!(AmbivalenceProbe::new(m, 10.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn sentence_pool_examples() {
        let one = sentence_level_pool(&[vec![0.3, 0.1]], 2).unwrap();
        assert!(one.valid);
        assert_eq!(one.stats.min, one.stats.max);
        let two = sentence_level_pool(&[vec![0.2], vec![0.6]], 1).unwrap();
        assert!((two.stats.mean[0] - 0.4).abs() < 1e-12);
        assert!((two.stats.std[0] - 0.2).abs() < 1e-12);
        let empty = sentence_level_pool(&[], 3).unwrap();
        assert!(!empty.valid);
        assert_eq!(empty.stats.flatten(), vec![0.0; 12]);
    }

    #[test]
    fn visual_chunk_stats_from_filter() {
        let frames = EmbeddingSequence::new(
            "v",
            Modality::Video,
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let report = MadFilterReport {
            kept: vec![true, true, false, true],
            scores: vec![0.0; 4],
            median: 0.0,
            mad: 0.0,
            multiplier: 50.0,
        };
        let s = visual_chunk_stats(&frames, &report, &[0, 0, 1, 1]).unwrap();
        assert_eq!(s[0], VisualChunkStats { valid_chunk: 1.0, valid_ratio: 1.0, similarity_mean: 1.0 });
        assert_eq!(s[1], VisualChunkStats { valid_chunk: 1.0, valid_ratio: 0.5, similarity_mean: 0.0 });
    }

    #[test]
    fn stats_row_matches_columns() {
        let row = assemble_stats_row(&StatsModalityInputs::default()).unwrap();
        assert_eq!(row.len(), stats_modality_columns().len());
    }

    #[test]
    fn lexicon_json_schema() {
        let json = r#"{
            "filler_words": {"expressions": ["like"], "embeddings": [[1, 0]]},
            "filler_sounds": {"expressions": ["um", "uh"], "embeddings": [[0, 1], [0.5, 0.5]]},
            "hedging": {"expressions": ["maybe"], "embeddings": [[1, 1]]},
            "corrections": {"expressions": ["I mean"], "embeddings": [[1, -1]]}
        }"#;
        let sets: BTreeMap<String, ExpressionSet> = serde_json::from_str(json).unwrap();
        let lex = HesitancyLexicon::new(sets).unwrap();
        assert_eq!(lex.dim(), 2);
        assert_eq!(lex.category(HesitancyCategory::FillerSounds).expressions.len(), 2);
    }

    proptest! {
        #[test]
        fn margins_sum_to_zero(e in prop::collection::vec(-1.0f64..1.0, 4)) {
            prop_assume!(norm(&e) > 1e-6);
            let h = hesitancy_scores(&SentenceRecord { text: String::new(), embedding: e }, &orthogonal_lexicon()).unwrap();
            prop_assert!(h.margin.iter().sum::<f64>().abs() < 1e-9);
        }

        #[test]
        fn ambivalence_scale_free(e in prop::collection::vec(-1.0f64..1.0, 4), g in 0.01f64..100.0) {
            prop_assume!(norm(&e) > 1e-6);
            let probe = probe_with_both_axis(10.0);
            let scaled: Vec<f64> = e.iter().map(|x| x * g).collect();
            let a = ambivalence_distribution(&e, &probe).unwrap();
            let b = ambivalence_distribution(&scaled, &probe).unwrap();
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            for d in &a {
                prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn text_stats_whitespace_idempotent(words in prop::collection::vec("[a-c]{1,3}[,.]?", 0..12), sep in "[ \t\n]{1,3}") {
            let spaced = words.join(&sep);
            let normalized = spaced.split_whitespace().collect::<Vec<_>>().join(" ");
            let again = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
            prop_assert_eq!(compute_text_stats(&spaced), compute_text_stats(&normalized));
            prop_assert_eq!(compute_text_stats(&normalized), compute_text_stats(&again));
        }
    }
}
