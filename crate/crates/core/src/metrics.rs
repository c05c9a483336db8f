//! Binary classification metrics: BCE, macro/weighted F1, confusion matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability clip applied before taking logarithms.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(y_true: &[u8], y_pred: &[u8]) -> Self {
        let mut c = ConfusionMatrix::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t != 0, p != 0) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    /// Per-class F1 as `[negative, positive]`.
    pub fn class_f1(&self) -> [f64; 2] {
        [
            Self::f1(self.tn, self.fn_, self.fp),
            Self::f1(self.tp, self.fp, self.fn_),
        ]
    }

    pub fn f1_macro(&self) -> f64 {
        let [f0, f1] = self.class_f1();
        0.5 * (f0 + f1)
    }

    pub fn f1_weighted(&self) -> f64 {
        let [f0, f1] = self.class_f1();
        let neg = (self.tn + self.fp) as f64;
        let pos = (self.tp + self.fn_) as f64;
        let total = neg + pos;
        if total == 0.0 {
            0.0
        } else {
            (f0 * neg + f1 * pos) / total
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("label/prediction lengths differ: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::EmptyInput("metric over zero samples".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy with probabilities clipped to `[1e-7, 1 - 1e-7]`.
pub fn bce(y: &[u8], p: &[f64]) -> Result<f64> {
    check_lengths(y.len(), p.len())?;
    let total: f64 = y
        .iter()
        .zip(p)
        .map(|(&yi, &pi)| {
            let q = pi.clamp(PROB_EPS, 1.0 - PROB_EPS);
            if yi != 0 {
                -q.ln()
            } else {
                -(1.0 - q).ln()
            }
        })
        .sum();
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub confusion: ConfusionMatrix,
}

pub fn f1_scores(y_true: &[u8], y_pred: &[u8]) -> Result<F1Scores> {
    check_lengths(y_true.len(), y_pred.len())?;
    let confusion = ConfusionMatrix::from_predictions(y_true, y_pred);
    Ok(F1Scores {
        f1_macro: confusion.f1_macro(),
        f1_weighted: confusion.f1_weighted(),
        confusion,
    })
}

/// Row-normalized confusion matrix: `[[tn, fp], [fn, tp]]` divided by each
/// true-class total. An empty class gives a zero row.
pub fn normalize_confusion(c: &ConfusionMatrix) -> [[f64; 2]; 2] {
    let row = |a: usize, b: usize| {
        let t = (a + b) as f64;
        if t == 0.0 {
            [0.0, 0.0]
        } else {
            [a as f64 / t, b as f64 / t]
        }
    };
    [row(c.tn, c.fp), row(c.fn_, c.tp)]
}

/// Scores for one split. `bce` is absent when only hard predictions exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bce: Option<f64>,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub confusion: ConfusionMatrix,
    pub confusion_normalized: [[f64; 2]; 2],
    pub n: usize,
}

impl MetricReport {
    pub fn from_predictions(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        let f = f1_scores(y_true, y_pred)?;
        Ok(MetricReport {
            bce: None,
            f1_macro: f.f1_macro,
            f1_weighted: f.f1_weighted,
            confusion: f.confusion,
            confusion_normalized: normalize_confusion(&f.confusion),
            n: y_true.len(),
        })
    }

    /// Thresholds probabilities with the `score >= threshold` convention.
    pub fn from_scores(y_true: &[u8], scores: &[f64], threshold: f64) -> Result<Self> {
        let pred = threshold_predictions(scores, threshold);
        let mut r = Self::from_predictions(y_true, &pred)?;
        r.bce = Some(bce(y_true, scores)?);
        Ok(r)
    }
}

pub fn threshold_predictions(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bce_examples() {
        assert!((bce(&[1], &[0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-4);
        assert!(bce(&[1], &[1.0]).unwrap() <= 1e-6);
        assert!((bce(&[1, 0], &[0.9, 0.1]).unwrap() - 0.10536).abs() < 1e-4);
        assert!(matches!(bce(&[], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn f1_examples() {
        let perfect = f1_scores(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((perfect.f1_macro, perfect.f1_weighted), (1.0, 1.0));

        let s = f1_scores(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!(s.confusion, ConfusionMatrix { tp: 1, fp: 0, tn: 2, fn_: 1 });
        assert!((s.confusion.class_f1()[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.confusion.class_f1()[0] - 0.8).abs() < 1e-12);
        assert!((s.f1_macro - 11.0 / 15.0).abs() < 1e-12);
        assert!((s.f1_weighted - 11.0 / 15.0).abs() < 1e-12);

        let wrong = f1_scores(&[1, 0, 1, 0], &[0, 1, 0, 1]).unwrap();
        assert_eq!(wrong.f1_macro, 0.0);
    }

    #[test]
    fn normalize_examples() {
        let c = ConfusionMatrix { tp: 3, fn_: 1, tn: 2, fp: 2 };
        assert_eq!(normalize_confusion(&c), [[0.5, 0.5], [0.25, 0.75]]);
        let diag = ConfusionMatrix { tp: 4, fn_: 0, tn: 7, fp: 0 };
        assert_eq!(normalize_confusion(&diag), [[1.0, 0.0], [0.0, 1.0]]);
        let no_pos = ConfusionMatrix { tp: 0, fn_: 0, tn: 3, fp: 1 };
        assert_eq!(normalize_confusion(&no_pos)[1], [0.0, 0.0]);
    }

    #[test]
    fn confusion_matches_brute_force_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let t: Vec<u8> = (0..20).map(|_| rng.gen_range(0..2)).collect();
            let p: Vec<u8> = (0..20).map(|_| rng.gen_range(0..2)).collect();
            let c = ConfusionMatrix::from_predictions(&t, &p);
            let count = |a: u8, b: u8| t.iter().zip(&p).filter(|(x, y)| **x == a && **y == b).count();
            assert_eq!(c, ConfusionMatrix { tp: count(1, 1), fp: count(0, 1), tn: count(0, 0), fn_: count(1, 0) });
            assert_eq!(c.total(), 20);
        }
    }

    proptest! {
        #[test]
        fn f1_permutation_invariant(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..40), seed in 0u64..500) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (t1, p1): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let (t2, p2): (Vec<u8>, Vec<u8>) = shuffled.into_iter().unzip();
            prop_assert_eq!(f1_scores(&t1, &p1).unwrap(), f1_scores(&t2, &p2).unwrap());
        }

        #[test]
        fn equal_support_macro_equals_weighted(half in prop::collection::vec((0u8..2, 0u8..2), 1..20)) {
            // First half are positives, second half negatives with the same count.
            let mut t = vec![1u8; half.len()];
            t.extend(vec![0u8; half.len()]);
            let mut p: Vec<u8> = half.iter().map(|x| x.0).collect();
            p.extend(half.iter().map(|x| x.1));
            let s = f1_scores(&t, &p).unwrap();
            prop_assert!((s.f1_macro - s.f1_weighted).abs() < 1e-15);
        }

        #[test]
        fn bce_nonnegative_and_improves_toward_label(
            y in prop::collection::vec(0u8..2, 1..20),
            p in prop::collection::vec(0.01f64..0.99, 20),
            i in 0usize..20,
        ) {
            let p = &p[..y.len()];
            let base = bce(&y, p).unwrap();
            prop_assert!(base >= 0.0);
            let i = i % y.len();
            let mut moved = p.to_vec();
            let target = f64::from(y[i]);
            moved[i] += 0.5 * (target - moved[i]);
            prop_assert!(bce(&y, &moved).unwrap() < base);
        }
    }
}
