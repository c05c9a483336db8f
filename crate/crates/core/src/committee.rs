//! One calibrated representative per modality combination.
//!
//! For each of the 15 combinations the candidate with the lowest validation
//! BCE wins; its decision threshold is then tuned on validation macro F1.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data_model::{ComboMask, SampleSet, Split};
use crate::error::{Error, Result};
use crate::metrics::{bce, f1_scores, threshold_predictions};

/// All 15 combinations in ascending mask order.
pub fn enumerate_combos() -> Vec<ComboMask> {
    (1..=15u8).map(|m| ComboMask::new(m).expect("1..=15")).collect()
}

/// Scores of one trained candidate, aligned with a [`SampleSet`]'s ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub combo: ComboMask,
    pub algorithm: String,
    pub scores: Vec<f64>,
    /// Where the scores came from, if they were loaded from disk.
    pub source: Option<PathBuf>,
}

impl Candidate {
    /// Score key used in [`SampleSet`] maps and file names: `<combo>_<algo>`.
    pub fn model_name(&self) -> String {
        model_name(self.combo, &self.algorithm)
    }
}

pub fn model_name(combo: ComboMask, algorithm: &str) -> String {
    format!("{}_{algorithm}", combo.label())
}

/// Splits a `<combo>_<algo>` file stem.
pub fn parse_model_name(stem: &str) -> Result<(ComboMask, String)> {
    let (combo, algo) = stem
        .rsplit_once('_')
        .ok_or_else(|| Error::Parameter(format!("candidate name `{stem}` is not `<combo>_<algo>`")))?;
    if algo.is_empty() {
        return Err(Error::Parameter(format!("candidate name `{stem}` has no algorithm")));
    }
    Ok((combo.parse()?, algo.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitteeMember {
    pub combo: ComboMask,
    pub combo_label: String,
    pub algorithm: String,
    pub threshold: f64,
    pub val_bce: f64,
    pub val_f1: f64,
    /// Key of this member's scores in the sample set.
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scores_file: Option<PathBuf>,
}

fn val_indices(samples: &SampleSet) -> Vec<usize> {
    samples
        .splits()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == Split::Val)
        .map(|(i, _)| i)
        .collect()
}

/// Index of the lowest value; the first wins ties.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] <= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Picks the candidate with the lowest validation BCE and fits its threshold.
pub fn select_member(candidates: &[Candidate], samples: &SampleSet) -> Result<CommitteeMember> {
    let first = candidates
        .first()
        .ok_or_else(|| Error::MissingCandidates("(empty candidate list)".into()))?;
    let val = val_indices(samples);
    if val.is_empty() {
        return Err(Error::InsufficientData("validation split is empty".into()));
    }
    let labels: Vec<u8> = val.iter().map(|&i| samples.labels()[i]).collect();
    let mut losses = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.combo != first.combo {
            return Err(Error::Parameter(format!(
                "candidate `{}` belongs to {} but the group is {}",
                c.algorithm, c.combo, first.combo
            )));
        }
        if c.scores.len() != samples.len() {
            return Err(Error::Shape(format!(
                "candidate `{}` has {} scores for {} samples",
                c.model_name(),
                c.scores.len(),
                samples.len()
            )));
        }
        let p: Vec<f64> = val.iter().map(|&i| c.scores[i]).collect();
        losses.push(bce(&labels, &p)?);
    }
    let win = argmin_first(&losses).expect("non-empty");
    let winner = &candidates[win];
    let val_scores: Vec<f64> = val.iter().map(|&i| winner.scores[i]).collect();
    let threshold = fit_threshold(&val_scores, &labels)?;
    let val_f1 = f1_scores(&labels, &threshold_predictions(&val_scores, threshold))?.f1_macro;
    Ok(CommitteeMember {
        combo: winner.combo,
        combo_label: winner.combo.label(),
        algorithm: winner.algorithm.clone(),
        threshold,
        val_bce: losses[win],
        val_f1,
        model: winner.model_name(),
        scores_file: winner.source.clone(),
    })
}

/// Threshold maximizing macro F1 (`score >= t` is positive). Candidates are
/// the midpoints between consecutive distinct scores plus 0.5; ties go to
/// the smallest threshold.
pub fn fit_threshold(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::DegenerateLabels("threshold fitting needs both classes".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut thresholds: Vec<f64> = sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    thresholds.push(0.5);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut best = (f64::NEG_INFINITY, 0.5);
    for t in thresholds {
        let f = f1_scores(labels, &threshold_predictions(scores, t))?.f1_macro;
        if f > best.0 {
            best = (f, t);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Committee {
    pub members: Vec<CommitteeMember>,
}

impl Committee {
    /// Selects one member per combination present in `candidates`; all 15
    /// combinations must be covered.
    pub fn select(candidates: &[Candidate], samples: &SampleSet) -> Result<Committee> {
        let mut groups: BTreeMap<ComboMask, Vec<Candidate>> = BTreeMap::new();
        for c in candidates {
            groups.entry(c.combo).or_default().push(c.clone());
        }
        let mut members = Vec::with_capacity(15);
        for combo in enumerate_combos() {
            let group = groups
                .get(&combo)
                .ok_or_else(|| Error::MissingCandidates(combo.label()))?;
            members.push(select_member(group, samples)?);
        }
        Ok(Committee { members })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::json("committee", e))?;
        crate::data_model::write_text(path, &(json + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

/// Binary votes, one row per committee member in combination order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteMatrix {
    votes: Vec<Vec<u8>>,
}

impl VoteMatrix {
    pub fn new(votes: Vec<Vec<u8>>) -> Result<Self> {
        let n = votes.first().map_or(0, Vec::len);
        if votes.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("vote rows differ in length".into()));
        }
        if votes.iter().flatten().any(|v| *v > 1) {
            return Err(Error::Parameter("votes must be 0 or 1".into()));
        }
        Ok(VoteMatrix { votes })
    }

    pub fn n_models(&self) -> usize {
        self.votes.len()
    }

    pub fn n_samples(&self) -> usize {
        self.votes.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.votes
    }

    /// Votes of every member for one sample.
    pub fn column(&self, j: usize) -> Vec<u8> {
        self.votes.iter().map(|r| r[j]).collect()
    }

    /// Column subset, in the given order.
    pub fn select_samples(&self, idx: &[usize]) -> VoteMatrix {
        VoteMatrix {
            votes: self.votes.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect(),
        }
    }
}

/// `vote[i][j] = 1` iff member i's score for sample j is at least its threshold.
pub fn committee_predict(members: &[CommitteeMember], samples: &SampleSet) -> Result<VoteMatrix> {
    let combos = enumerate_combos();
    if members.len() != combos.len() || members.iter().zip(&combos).any(|(m, c)| m.combo != *c) {
        let have: Vec<String> = members.iter().map(|m| m.combo.label()).collect();
        return Err(Error::IncompleteCommittee(format!(
            "expected one member per combination in mask order, got [{}]",
            have.join(", ")
        )));
    }
    let votes = members
        .iter()
        .map(|m| {
            let s = samples
                .model_scores(&m.model)
                .ok_or_else(|| Error::IncompleteCommittee(format!("no scores for member `{}`", m.model)))?;
            Ok(threshold_predictions(s, m.threshold))
        })
        .collect::<Result<Vec<_>>>()?;
    VoteMatrix::new(votes)
}

/// Loads every `<combo>_<algo>.csv` in `dir` as a candidate aligned with `samples`.
pub fn load_candidates(dir: &Path, samples: &SampleSet) -> Result<Vec<Candidate>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let (combo, algorithm) = parse_model_name(&stem)?;
        let scores = crate::data_model::align_scores(samples, &p)?;
        out.push(Candidate { combo, algorithm, scores, source: Some(p) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::ManifestEntry;

    fn samples(labels: &[u8], split: Split) -> SampleSet {
        SampleSet::from_entries(
            labels
                .iter()
                .enumerate()
                .map(|(i, &label)| ManifestEntry { id: format!("s{i}"), split, label })
                .collect(),
        )
        .unwrap()
    }

    /// Brute force over every cut of the sorted scores.
    fn oracle_best_f1(scores: &[f64], labels: &[u8]) -> f64 {
        let mut best = 0.0f64;
        let mut cuts: Vec<f64> = scores.to_vec();
        cuts.push(f64::INFINITY);
        for c in cuts {
            let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= c)).collect();
            best = best.max(f1_scores(labels, &pred).unwrap().f1_macro);
        }
        best
    }

    #[test]
    fn combos_in_mask_order() {
        let c = enumerate_combos();
        assert_eq!(c.len(), 15);
        assert_eq!(c[0].label(), "text");
        assert_eq!(c[14].label(), "text+audio+video+stats");
        let mut d = c.clone();
        d.dedup();
        assert_eq!(d.len(), 15);
    }

    #[test]
    fn threshold_two_points() {
        assert_eq!(fit_threshold(&[0.1, 0.9], &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn threshold_matches_brute_force() {
        let scores = [0.2, 0.4, 0.6, 0.8];
        let labels = [0, 1, 0, 1];
        let t = fit_threshold(&scores, &labels).unwrap();
        let got = f1_scores(&labels, &threshold_predictions(&scores, t)).unwrap().f1_macro;
        assert!((got - oracle_best_f1(&scores, &labels)).abs() < 1e-12);
        // Midpoints 0.3 and 0.7 both reach the optimum; the smaller wins.
        assert!((t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn threshold_single_class_rejected() {
        assert!(matches!(fit_threshold(&[0.2, 0.3], &[1, 1]), Err(Error::DegenerateLabels(_))));
    }

    #[test]
    fn selection_prefers_lowest_bce_then_first() {
        let set = samples(&[1, 0, 1, 0], Split::Val);
        let combo = ComboMask::new(1).unwrap();
        let mk = |algo: &str, s: [f64; 4]| Candidate { combo, algorithm: algo.into(), scores: s.to_vec(), source: None };
        let good = mk("mlp", [0.8, 0.2, 0.7, 0.3]);
        let bad = mk("rf", [0.6, 0.4, 0.6, 0.4]);
        let m = select_member(&[bad.clone(), good.clone()], &set).unwrap();
        assert_eq!(m.algorithm, "mlp");
        let twin = mk("gbdt", [0.8, 0.2, 0.7, 0.3]);
        let m = select_member(&[good, twin], &set).unwrap();
        assert_eq!(m.algorithm, "mlp");
        assert!(matches!(select_member(&[], &set), Err(Error::MissingCandidates(_))));
    }

    #[test]
    fn votes_use_inclusive_threshold() {
        let mut set = samples(&[1, 0, 1], Split::Val);
        let mut members = Vec::new();
        for combo in enumerate_combos() {
            let name = model_name(combo, "mlp");
            set.insert_scores(name.clone(), vec![0.5, 0.0, 0.7]).unwrap();
            members.push(CommitteeMember {
                combo,
                combo_label: combo.label(),
                algorithm: "mlp".into(),
                threshold: 0.5,
                val_bce: 0.0,
                val_f1: 0.0,
                model: name,
                scores_file: None,
            });
        }
        let v = committee_predict(&members, &set).unwrap();
        assert_eq!((v.n_models(), v.n_samples()), (15, 3));
        assert!(v.rows().iter().all(|r| r == &vec![1, 0, 1]));
        assert!(matches!(committee_predict(&members[..14], &set), Err(Error::IncompleteCommittee(_))));
    }

    #[test]
    fn model_names_roundtrip() {
        let c = ComboMask::new(13).unwrap();
        let (back, algo) = parse_model_name(&model_name(c, "gbdt")).unwrap();
        assert_eq!((back, algo.as_str()), (c, "gbdt"));
        assert_eq!(parse_model_name("5_rf").unwrap().0.bits(), 5);
        assert!(parse_model_name("nonsense").is_err());
    }
}
