//! Shared data types and the plain-text file formats used between stages.
//!
//! * Embedding CSV: no header, one chunk per row, `dim` float columns.
//! * Manifest JSONL: `{"id": "...", "split": "train"|"val"|"test", "label": 0|1}` per line.
//! * Score CSV: header `id,score`, one row per id.
//! * Feature matrix CSV: header `id,<feature names...>`, one row per id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Audio,
    Video,
    Stats,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Text,
        Modality::Audio,
        Modality::Video,
        Modality::Stats,
    ];

    pub fn bit(self) -> u8 {
        match self {
            Modality::Text => 1,
            Modality::Audio => 2,
            Modality::Video => 4,
            Modality::Stats => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Audio => "audio",
            Modality::Video => "video",
            Modality::Stats => "stats",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(Modality::Text),
            "audio" => Ok(Modality::Audio),
            "video" | "visual" => Ok(Modality::Video),
            "stats" => Ok(Modality::Stats),
            other => Err(Error::Parameter(format!("unknown modality `{other}`"))),
        }
    }
}

/// Non-empty subset of the four modalities, stored as a bit mask in `1..=15`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ComboMask(u8);

impl ComboMask {
    pub const COUNT: usize = 15;

    pub fn new(mask: u8) -> Result<Self> {
        if (1..=15).contains(&mask) {
            Ok(ComboMask(mask))
        } else {
            Err(Error::Parameter(format!(
                "combination mask {mask} outside [1, 15]"
            )))
        }
    }

    pub fn from_modalities(mods: &[Modality]) -> Result<Self> {
        Self::new(mods.iter().fold(0, |m, x| m | x.bit()))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Position of this combination in the canonical (ascending mask) order.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn contains(self, m: Modality) -> bool {
        self.0 & m.bit() != 0
    }

    pub fn modalities(self) -> Vec<Modality> {
        Modality::ALL
            .into_iter()
            .filter(|m| self.contains(*m))
            .collect()
    }

    /// `text+audio` style label.
    pub fn label(self) -> String {
        self.modalities()
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl TryFrom<u8> for ComboMask {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        ComboMask::new(v)
    }
}

impl From<ComboMask> for u8 {
    fn from(c: ComboMask) -> u8 {
        c.0
    }
}

impl fmt::Display for ComboMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ComboMask {
    type Err = Error;

    /// Accepts either the numeric mask (`"5"`) or a `+`-joined modality list
    /// (`"text+video"`).
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(n) = s.trim().parse::<u8>() {
            return ComboMask::new(n);
        }
        let mods = s
            .split('+')
            .map(Modality::from_str)
            .collect::<Result<Vec<_>>>()?;
        ComboMask::from_modalities(&mods)
    }
}

/// Ordered per-chunk feature vectors for one video and one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    pub video_id: String,
    pub modality: Modality,
    dim: usize,
    chunks: Vec<Vec<f64>>,
}

impl EmbeddingSequence {
    pub fn new(video_id: impl Into<String>, modality: Modality, chunks: Vec<Vec<f64>>) -> Result<Self> {
        let dim = chunks
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::EmptyInput("embedding sequence has no chunks".into()))?;
        if dim == 0 {
            return Err(Error::Dimension("embedding dimension must be positive".into()));
        }
        if let Some(i) = chunks.iter().position(|c| c.len() != dim) {
            return Err(Error::Dimension(format!(
                "chunk {i} has length {} but dim is {dim}",
                chunks[i].len()
            )));
        }
        Ok(EmbeddingSequence {
            video_id: video_id.into(),
            modality,
            dim,
            chunks,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[Vec<f64>] {
        &self.chunks
    }

    pub fn into_chunks(self) -> Vec<Vec<f64>> {
        self.chunks
    }

    /// Keeps only the chunks whose flag is set. Returns `None` if nothing survives.
    pub fn retain(&self, keep: &[bool]) -> Option<EmbeddingSequence> {
        let chunks: Vec<_> = self
            .chunks
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(c, _)| c.clone())
            .collect();
        if chunks.is_empty() {
            return None;
        }
        Some(EmbeddingSequence {
            video_id: self.video_id.clone(),
            modality: self.modality,
            dim: self.dim,
            chunks,
        })
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

fn parse_float_row(line: &str) -> Option<Vec<f64>> {
    line.split(',')
        .map(|t| t.trim().parse::<f64>().ok())
        .collect()
}

/// Reads a headerless float matrix. A leading non-numeric line is treated as
/// a header and skipped.
pub fn read_float_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some(row) = parse_float_row(line) else {
            if rows.is_empty() && width.is_none() && i == 0 {
                continue;
            }
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: "non-numeric value".into(),
            });
        };
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("non-finite value {v}"),
            });
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("expected {w} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())));
    }
    Ok(rows)
}

pub fn format_float_rows(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Writes a headerless float matrix using shortest round-trip decimal text.
pub fn write_float_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    write_text(path, &format_float_rows(rows))
}

/// Loads an embedding CSV. The video id is taken from the file stem.
pub fn load_embedding_sequence(path: &Path, modality: Modality) -> Result<EmbeddingSequence> {
    let rows = read_float_csv(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    EmbeddingSequence::new(id, modality, rows)
}

pub fn write_embedding_sequence(path: &Path, seq: &EmbeddingSequence) -> Result<()> {
    write_float_csv(path, seq.chunks())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Parameter(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub label: u8,
}

#[derive(Deserialize)]
struct RawManifestEntry {
    id: String,
    split: String,
    label: serde_json::Value,
}

/// Aligned ids, split tags, binary labels and per-model probability scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    ids: Vec<String>,
    splits: Vec<Split>,
    labels: Vec<u8>,
    scores: BTreeMap<String, Vec<f64>>,
}

impl SampleSet {
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut set = SampleSet::default();
        for e in entries {
            if e.label > 1 {
                return Err(Error::Label {
                    id: e.id,
                    value: e.label.to_string(),
                });
            }
            if !seen.insert(e.id.clone()) {
                return Err(Error::Duplicate {
                    file: "manifest".into(),
                    id: e.id,
                });
            }
            set.ids.push(e.id);
            set.splits.push(e.split);
            set.labels.push(e.label);
        }
        Ok(set)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn scores(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.scores
    }

    pub fn model_scores(&self, model: &str) -> Option<&[f64]> {
        self.scores.get(model).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn entries(&self) -> Vec<ManifestEntry> {
        self.ids
            .iter()
            .zip(&self.splits)
            .zip(&self.labels)
            .map(|((id, split), label)| ManifestEntry {
                id: id.clone(),
                split: *split,
                label: *label,
            })
            .collect()
    }

    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Adds a score vector aligned with `ids`.
    pub fn insert_scores(&mut self, model: impl Into<String>, scores: Vec<f64>) -> Result<()> {
        let model = model.into();
        if scores.len() != self.ids.len() {
            return Err(Error::Shape(format!(
                "scores for `{model}` have {} entries, expected {}",
                scores.len(),
                self.ids.len()
            )));
        }
        if let Some(row) = scores
            .iter()
            .position(|p| !(0.0..=1.0).contains(p) || p.is_nan())
        {
            return Err(Error::Range {
                file: model,
                row: row + 1,
                value: scores[row],
            });
        }
        self.scores.insert(model, scores);
        Ok(())
    }

    /// Restriction to one split, preserving order.
    pub fn split_view(&self, split: Split) -> SampleSet {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.splits[i] == split).collect();
        self.select(&keep)
    }

    fn select(&self, keep: &[usize]) -> SampleSet {
        SampleSet {
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            splits: keep.iter().map(|&i| self.splits[i]).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            scores: self
                .scores
                .iter()
                .map(|(k, v)| (k.clone(), keep.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let raw: RawManifestEntry =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let split = raw
            .split
            .parse::<Split>()
            .map_err(|e| parse_err(e.to_string()))?;
        let label = match raw.label.as_u64() {
            Some(v @ (0 | 1)) => v as u8,
            _ => {
                return Err(Error::Label {
                    id: raw.id,
                    value: raw.label.to_string(),
                })
            }
        };
        out.push(ManifestEntry {
            id: raw.id,
            split,
            label,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no entries", path.display())));
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        let line = serde_json::to_string(e).map_err(|err| Error::json("manifest", err))?;
        out.push_str(&line);
        out.push('\n');
    }
    write_text(path, &out)
}

/// Reads an `id,score` CSV, returning `(id, score, file line)` triples.
pub fn read_score_csv(path: &Path) -> Result<Vec<(String, f64, usize)>> {
    let text = read_text(path)?;
    let file = path.display().to_string();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim().replace(' ', "") == "id,score" => {}
        Some((i, _)) => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected header `id,score`".into(),
            })
        }
        None => return Err(Error::EmptyInput(format!("{file} is empty"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let mut parts = line.splitn(2, ',');
        let id = parts.next().unwrap_or_default().trim().to_string();
        let value = parts
            .next()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected `id,score`".into(),
            })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Range {
                file: file.clone(),
                row: i + 1,
                value,
            });
        }
        out.push((id, value, i + 1));
    }
    Ok(out)
}

pub fn write_score_csv(path: &Path, ids: &[String], scores: &[f64]) -> Result<()> {
    let mut out = String::from("id,score\n");
    for (id, s) in ids.iter().zip(scores) {
        out.push_str(&format!("{id},{s}\n"));
    }
    write_text(path, &out)
}

/// Joins one score file onto the manifest order by id.
pub fn align_scores(set: &SampleSet, path: &Path) -> Result<Vec<f64>> {
    let file = path.display().to_string();
    let rows = read_score_csv(path)?;
    let index = set.index_of();
    let mut out = vec![f64::NAN; set.len()];
    let mut filled = vec![false; set.len()];
    let mut unexpected = Vec::new();
    for (id, score, _) in rows {
        match index.get(id.as_str()) {
            Some(&i) => {
                if filled[i] {
                    return Err(Error::Duplicate { file, id });
                }
                filled[i] = true;
                out[i] = score;
            }
            None => unexpected.push(id),
        }
    }
    let missing: Vec<String> = filled
        .iter()
        .enumerate()
        .filter(|(_, f)| !**f)
        .map(|(i, _)| set.ids[i].clone())
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() {
        return Err(Error::Alignment {
            file,
            missing,
            unexpected,
        });
    }
    Ok(out)
}

/// Loads the manifest and joins every score file by id. Model names are the
/// score files' stems.
pub fn load_sample_set(manifest: &Path, score_files: &[impl AsRef<Path>]) -> Result<SampleSet> {
    let mut set = SampleSet::from_entries(read_manifest(manifest)?)?;
    for f in score_files {
        let f = f.as_ref();
        let scores = align_scores(&set, f)?;
        let name = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        set.scores.insert(name, scores);
    }
    Ok(set)
}

/// Per-id feature rows with named columns (`id,<names...>` CSV).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Rows reordered to the given id order.
    pub fn aligned_to(&self, ids: &[String], context: &str) -> Result<Vec<Vec<f64>>> {
        let index: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut missing = Vec::new();
        let rows: Vec<Vec<f64>> = ids
            .iter()
            .filter_map(|id| match index.get(id.as_str()) {
                Some(&i) => Some(self.rows[i].clone()),
                None => {
                    missing.push(id.clone());
                    None
                }
            })
            .collect();
        if !missing.is_empty() {
            return Err(Error::Alignment {
                file: context.to_string(),
                missing,
                unexpected: Vec::new(),
            });
        }
        Ok(rows)
    }
}

pub fn read_feature_table(path: &Path) -> Result<FeatureTable> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::EmptyInput(format!("{} is empty", path.display())))?;
    let mut cols = header.split(',').map(|s| s.trim().to_string());
    if cols.next().as_deref() != Some("id") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "feature table header must start with `id`".into(),
        });
    }
    let columns: Vec<String> = cols.collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let mut parts = line.split(',');
        let id = parts.next().unwrap_or_default().trim().to_string();
        let row: Option<Vec<f64>> = parts.map(|t| t.trim().parse::<f64>().ok()).collect();
        let row = row
            .filter(|r| r.len() == columns.len() && r.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected {} finite feature columns", columns.len()),
            })?;
        if !seen.insert(id.clone()) {
            return Err(Error::Duplicate {
                file: path.display().to_string(),
                id,
            });
        }
        ids.push(id);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no data rows", path.display())));
    }
    Ok(FeatureTable { columns, ids, rows })
}

pub fn write_feature_table(path: &Path, table: &FeatureTable) -> Result<()> {
    let mut out = String::from("id");
    for c in &table.columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (id, row) in table.ids.iter().zip(&table.rows) {
        out.push_str(id);
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    write_text(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn manifest_lines(n: usize) -> String {
        (0..n)
            .map(|i| {
                let split = if i < 3 { "train" } else { "val" };
                format!("{{\"id\":\"v{i}\",\"split\":\"{split}\",\"label\":{}}}\n", i % 2)
            })
            .collect()
    }

    #[test]
    fn combo_mask_bounds_and_labels() {
        assert!(ComboMask::new(0).is_err());
        assert!(ComboMask::new(16).is_err());
        assert_eq!(ComboMask::new(1).unwrap().label(), "text");
        assert_eq!(ComboMask::new(15).unwrap().label(), "text+audio+video+stats");
        assert_eq!("text+video".parse::<ComboMask>().unwrap().bits(), 5);
        assert_eq!("12".parse::<ComboMask>().unwrap().label(), "video+stats");
    }

    #[test]
    fn embedding_csv_parses() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("vid.csv");
        fs::write(&p, "1,2,3,4\n5,6,7,8\n9,10,11,12\n").unwrap();
        let seq = load_embedding_sequence(&p, Modality::Video).unwrap();
        assert_eq!(seq.dim(), 4);
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.video_id, "vid");
    }

    #[test]
    fn embedding_csv_wrong_width_names_line() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("vid.csv");
        fs::write(&p, "1,2,3,4\n5,6,7\n").unwrap();
        match load_embedding_sequence(&p, Modality::Video) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn embedding_csv_header_only_is_empty() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("vid.csv");
        fs::write(&p, "f0,f1,f2,f3\n").unwrap();
        assert!(matches!(
            load_embedding_sequence(&p, Modality::Video),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn sample_set_joins_by_id() {
        let dir = tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        fs::write(&m, manifest_lines(5)).unwrap();
        let s = dir.path().join("text_mlp.csv");
        fs::write(&s, "id,score\nv4,0.4\nv0,0.0\nv2,0.2\nv1,0.1\nv3,0.3\n").unwrap();
        let set = load_sample_set(&m, &[&s]).unwrap();
        assert_eq!(set.scores().len(), 1);
        assert_eq!(set.model_scores("text_mlp").unwrap(), &[0.0, 0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn sample_set_missing_id_is_alignment_error() {
        let dir = tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        fs::write(&m, manifest_lines(5)).unwrap();
        let s = dir.path().join("a.csv");
        fs::write(&s, "id,score\nv0,0.1\nv1,0.1\nv2,0.1\nv4,0.1\n").unwrap();
        match load_sample_set(&m, &[&s]) {
            Err(Error::Alignment { missing, .. }) => assert_eq!(missing, vec!["v3".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_set_range_error_reports_row() {
        let dir = tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        fs::write(&m, manifest_lines(5)).unwrap();
        let s = dir.path().join("a.csv");
        fs::write(&s, "id,score\nv0,0.1\nv1,0.1\nv2,1.3\nv3,0.1\nv4,0.1\n").unwrap();
        match load_sample_set(&m, &[&s]) {
            Err(Error::Range { row, value, .. }) => {
                assert_eq!(row, 4);
                assert_eq!(value, 1.3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        fs::write(
            &m,
            "{\"id\":\"a\",\"split\":\"train\",\"label\":0}\n{\"id\":\"a\",\"split\":\"val\",\"label\":1}\n",
        )
        .unwrap();
        assert!(matches!(read_manifest(&m).and_then(SampleSet::from_entries), Err(Error::Duplicate { .. })));

        fs::write(&m, manifest_lines(2)).unwrap();
        let s = dir.path().join("a.csv");
        fs::write(&s, "id,score\nv0,0.1\nv0,0.2\nv1,0.3\n").unwrap();
        assert!(matches!(load_sample_set(&m, &[&s]), Err(Error::Duplicate { .. })));
    }

    #[test]
    fn non_binary_label_rejected() {
        let dir = tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        fs::write(&m, "{\"id\":\"a\",\"split\":\"train\",\"label\":2}\n").unwrap();
        assert!(matches!(read_manifest(&m), Err(Error::Label { .. })));
    }

    #[test]
    fn split_views_partition() {
        let mut entries = Vec::new();
        for i in 0..5 {
            entries.push(ManifestEntry {
                id: format!("v{i}"),
                split: if i < 3 { Split::Train } else { Split::Val },
                label: (i % 2) as u8,
            });
        }
        let set = SampleSet::from_entries(entries).unwrap();
        assert_eq!(set.split_view(Split::Val).len(), 2);
        assert!(set.split_view(Split::Test).is_empty());
        let mut union: Vec<String> = Split::ALL
            .iter()
            .flat_map(|s| set.split_view(*s).ids().to_vec())
            .collect();
        union.sort();
        assert_eq!(union, set.ids().to_vec());
    }
}
