//! Weighted hard voting over the committee and a particle swarm search for
//! the voting weights.
//!
//! The swarm maximizes the harmonic mean of train and validation macro F1
//! minus a squared penalty on their gap, `(λ·|f1_train − f1_val|)²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::committee::VoteMatrix;
use crate::data_model::{SampleSet, Split};
use crate::error::{Error, Result};
use crate::metrics::{f1_scores, MetricReport};

pub const DEFAULT_LAMBDAS: [f64; 5] = [0.0, 0.2, 0.4, 0.6, 0.8];

fn check_weights(w: &[f64]) -> Result<f64> {
    if let Some(v) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Parameter(format!("weight {v} is not a finite non-negative number")));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::UnusableEnsemble);
    }
    Ok(total)
}

/// 1 iff the weighted vote sum strictly exceeds half the total weight.
pub fn hard_vote(votes: &[u8], w: &[f64]) -> Result<u8> {
    if votes.len() != w.len() {
        return Err(Error::Shape(format!("{} votes for {} weights", votes.len(), w.len())));
    }
    let total = check_weights(w)?;
    let s: f64 = votes.iter().zip(w).filter(|(v, _)| **v == 1).map(|(_, w)| w).sum();
    Ok(u8::from(s > 0.5 * total))
}

/// [`hard_vote`] applied to every sample (column) of a vote matrix.
pub fn ensemble_predict(votes: &VoteMatrix, w: &[f64]) -> Result<Vec<u8>> {
    if votes.n_models() != w.len() {
        return Err(Error::Shape(format!("{} members for {} weights", votes.n_models(), w.len())));
    }
    let half = 0.5 * check_weights(w)?;
    let mut sums = vec![0.0; votes.n_samples()];
    for (row, wi) in votes.rows().iter().zip(w) {
        for (s, v) in sums.iter_mut().zip(row) {
            if *v == 1 {
                *s += wi;
            }
        }
    }
    Ok(sums.into_iter().map(|s| u8::from(s > half)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub f1_train: f64,
    pub f1_val: f64,
    pub harmonic_mean: f64,
    pub penalty: f64,
    pub fitness: f64,
}

pub fn fitness(f1_train: f64, f1_val: f64, lambda: f64) -> Result<FitnessReport> {
    for (name, v) in [("f1_train", f1_train), ("f1_val", f1_val)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Parameter(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Parameter(format!("lambda = {lambda} must be finite and >= 0")));
    }
    let harmonic_mean = if f1_train + f1_val > 0.0 {
        2.0 * f1_train * f1_val / (f1_train + f1_val)
    } else {
        0.0
    };
    let penalty = (lambda * (f1_train - f1_val).abs()).powi(2);
    Ok(FitnessReport { f1_train, f1_val, harmonic_mean, penalty, fitness: harmonic_mean - penalty })
}

/// Votes and labels for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVotes {
    pub votes: VoteMatrix,
    pub labels: Vec<u8>,
}

impl SplitVotes {
    pub fn new(votes: VoteMatrix, labels: Vec<u8>) -> Result<Self> {
        if votes.n_samples() != labels.len() {
            return Err(Error::Shape(format!(
                "{} vote columns for {} labels",
                votes.n_samples(),
                labels.len()
            )));
        }
        Ok(SplitVotes { votes, labels })
    }

    pub fn macro_f1(&self, w: &[f64]) -> Result<f64> {
        Ok(f1_scores(&self.labels, &ensemble_predict(&self.votes, w)?)?.f1_macro)
    }

    pub fn report(&self, w: &[f64]) -> Result<MetricReport> {
        MetricReport::from_predictions(&self.labels, &ensemble_predict(&self.votes, w)?)
    }
}

/// Committee votes partitioned by split.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleData {
    pub train: SplitVotes,
    pub val: SplitVotes,
    pub test: Option<SplitVotes>,
}

impl EnsembleData {
    /// Splits a full vote matrix (columns aligned with `samples`) by split tag.
    pub fn from_votes(votes: &VoteMatrix, samples: &SampleSet) -> Result<Self> {
        if votes.n_samples() != samples.len() {
            return Err(Error::Shape(format!(
                "{} vote columns for {} samples",
                votes.n_samples(),
                samples.len()
            )));
        }
        let part = |split: Split| -> Result<Option<SplitVotes>> {
            let idx: Vec<usize> = (0..samples.len()).filter(|&i| samples.splits()[i] == split).collect();
            if idx.is_empty() {
                return Ok(None);
            }
            let labels = idx.iter().map(|&i| samples.labels()[i]).collect();
            SplitVotes::new(votes.select_samples(&idx), labels).map(Some)
        };
        let need = |s: Option<SplitVotes>, name: &str| {
            s.ok_or_else(|| Error::InsufficientData(format!("{name} split is empty")))
        };
        Ok(EnsembleData {
            train: need(part(Split::Train)?, "train")?,
            val: need(part(Split::Val)?, "validation")?,
            test: part(Split::Test)?,
        })
    }

    pub fn n_models(&self) -> usize {
        self.train.votes.n_models()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_models();
        if n == 0 {
            return Err(Error::Shape("ensemble has no members".into()));
        }
        let splits = [Some(&self.train), Some(&self.val), self.test.as_ref()];
        if splits.iter().flatten().any(|s| s.votes.n_models() != n) {
            return Err(Error::Shape("splits have different member counts".into()));
        }
        for (name, s) in [("train", &self.train), ("validation", &self.val)] {
            let pos = s.labels.iter().filter(|&&l| l == 1).count();
            if pos == 0 || pos == s.labels.len() {
                return Err(Error::DegenerateLabels(format!("{name} labels contain a single class")));
            }
        }
        Ok(())
    }
}

/// Hard-votes each split and scores the result with [`fitness`].
pub fn evaluate_weights(w: &[f64], data: &EnsembleData, lambda: f64) -> Result<FitnessReport> {
    fitness(data.train.macro_f1(w)?, data.val.macro_f1(w)?, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub particles: usize,
    pub epochs: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub seed: u64,
    pub velocity_clamp: f64,
    /// Worker threads for fitness evaluation; 0 uses the global pool.
    /// Results do not depend on it.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            particles: 50,
            epochs: 100,
            inertia: 0.9,
            c1: 1.5,
            c2: 2.1,
            lambda: 0.0,
            seed: 0,
            velocity_clamp: 0.2,
            threads: 0,
        }
    }
}

impl PsoConfig {
    fn validate(&self) -> Result<()> {
        if self.particles == 0 || self.epochs == 0 {
            return Err(Error::Parameter("particles and epochs must be at least 1".into()));
        }
        for (name, v) in [("inertia", self.inertia), ("c1", self.c1), ("c2", self.c2), ("lambda", self.lambda)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !(self.velocity_clamp > 0.0) || !self.velocity_clamp.is_finite() {
            return Err(Error::Parameter("velocity clamp must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReports {
    pub train: MetricReport,
    pub val: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test: Option<MetricReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub lambda: f64,
    pub seed: u64,
    pub best_weights: Vec<f64>,
    pub best: FitnessReport,
    /// 0 is the initial swarm; `k` is the k-th update.
    pub best_epoch: usize,
    /// Global best fitness after initialization and after each epoch.
    pub fitness_trace: Vec<f64>,
    pub zero_weight_count: usize,
    pub reports: SplitReports,
}

impl PsoResult {
    pub fn best_fitness(&self) -> f64 {
        self.best.fitness
    }
}

struct Particle {
    rng: ChaCha8Rng,
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best_f: f64,
    f: f64,
}

/// Fitness used inside the swarm; an all-zero position is never selected.
fn swarm_fitness(x: &[f64], data: &EnsembleData, lambda: f64) -> Result<f64> {
    match evaluate_weights(x, data, lambda) {
        Ok(r) => Ok(r.fitness),
        Err(Error::UnusableEnsemble) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub(crate) fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Global-best PSO over the box `[0, 1]^n`, `n` = number of members.
///
/// Each particle owns an RNG stream derived from the seed, and the global
/// best is updated in particle order after every epoch, so the outcome is
/// identical for any thread count.
pub fn pso_optimize(data: &EnsembleData, cfg: &PsoConfig) -> Result<PsoResult> {
    cfg.validate()?;
    data.validate()?;
    run_in_pool(cfg.threads, || optimize(data, cfg))?
}

fn optimize(data: &EnsembleData, cfg: &PsoConfig) -> Result<PsoResult> {
    let dim = data.n_models();
    let mut swarm: Vec<Particle> = (0..cfg.particles)
        .map(|i| {
            let mut rng = particle_rng(cfg.seed, i);
            let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
            Particle { rng, best_x: x.clone(), x, v: vec![0.0; dim], best_f: f64::NEG_INFINITY, f: f64::NEG_INFINITY }
        })
        .collect();

    let evaluate = |swarm: &mut Vec<Particle>| -> Result<()> {
        swarm
            .par_iter_mut()
            .map(|p| {
                p.f = swarm_fitness(&p.x, data, cfg.lambda)?;
                Ok(())
            })
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    };

    let mut gbest_x = swarm[0].x.clone();
    let mut gbest_f = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        if epoch > 0 {
            let g = &gbest_x;
            swarm.par_iter_mut().for_each(|p| {
                for d in 0..dim {
                    let r1: f64 = p.rng.gen();
                    let r2: f64 = p.rng.gen();
                    let v = cfg.inertia * p.v[d] + cfg.c1 * r1 * (p.best_x[d] - p.x[d]) + cfg.c2 * r2 * (g[d] - p.x[d]);
                    p.v[d] = v.clamp(-cfg.velocity_clamp, cfg.velocity_clamp);
                    p.x[d] = (p.x[d] + p.v[d]).clamp(0.0, 1.0);
                }
            });
        }
        evaluate(&mut swarm)?;
        for p in &mut swarm {
            if p.f > p.best_f {
                p.best_f = p.f;
                p.best_x.clone_from(&p.x);
            }
            if p.f > gbest_f {
                gbest_f = p.f;
                gbest_x.clone_from(&p.x);
                best_epoch = epoch;
            }
        }
        trace.push(gbest_f);
    }
    if gbest_f == f64::NEG_INFINITY {
        return Err(Error::UnusableEnsemble);
    }
    let best = evaluate_weights(&gbest_x, data, cfg.lambda)?;
    let reports = SplitReports {
        train: data.train.report(&gbest_x)?,
        val: data.val.report(&gbest_x)?,
        test: data.test.as_ref().map(|t| t.report(&gbest_x)).transpose()?,
    };
    Ok(PsoResult {
        lambda: cfg.lambda,
        seed: cfg.seed,
        zero_weight_count: gbest_x.iter().filter(|w| **w == 0.0).count(),
        best_weights: gbest_x,
        best,
        best_epoch,
        fitness_trace: trace,
        reports,
    })
}

/// One independent swarm per λ; run `i` uses seed `base.seed + i`.
pub fn lambda_sweep(data: &EnsembleData, base: &PsoConfig, lambdas: &[f64]) -> Result<Vec<PsoResult>> {
    if lambdas.is_empty() {
        return Err(Error::Parameter("lambda list is empty".into()));
    }
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let cfg = PsoConfig { lambda, seed: base.seed.wrapping_add(i as u64), ..base.clone() };
            pso_optimize(data, &cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, prop_assume, proptest};

    fn split(rows: Vec<Vec<u8>>, labels: Vec<u8>) -> SplitVotes {
        SplitVotes::new(VoteMatrix::new(rows).unwrap(), labels).unwrap()
    }

    /// Integer oracle: weights are `k / 1024`, so sums compare exactly.
    fn oracle_vote(votes: &[u8], k: &[u32]) -> u8 {
        let s: u32 = votes.iter().zip(k).filter(|(v, _)| **v == 1).map(|(_, k)| k).sum();
        let total: u32 = k.iter().sum();
        u8::from(2 * s > total)
    }

    #[test]
    fn vote_examples() {
        assert_eq!(hard_vote(&[1; 15], &[1.0; 15]).unwrap(), 1);
        let mut w = vec![0.0; 15];
        w[..3].copy_from_slice(&[0.5, 0.3, 0.2]);
        let mut v = vec![0; 15];
        v[0] = 1;
        v[2] = 1;
        assert_eq!(hard_vote(&v, &w).unwrap(), 1);
        let mut w = vec![0.0; 15];
        w[..2].copy_from_slice(&[0.5, 0.5]);
        let mut v = vec![0; 15];
        v[0] = 1;
        assert_eq!(hard_vote(&v, &w).unwrap(), 0);
        assert!(matches!(hard_vote(&v, &[0.0; 15]), Err(Error::UnusableEnsemble)));
    }

    #[test]
    fn vote_matches_integer_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k: Vec<u32> = (0..4).map(|_| rng.gen_range(0..=1024)).collect();
            if k.iter().all(|&x| x == 0) {
                continue;
            }
            let mut w = vec![0.0; 15];
            for (i, &ki) in k.iter().enumerate() {
                w[i] = f64::from(ki) / 1024.0;
            }
            for pattern in 0..16u8 {
                let mut votes = vec![0u8; 15];
                for (b, v) in votes.iter_mut().take(4).enumerate() {
                    *v = (pattern >> b) & 1;
                }
                assert_eq!(hard_vote(&votes, &w).unwrap(), oracle_vote(&votes[..4], &k));
            }
        }
    }

    #[test]
    fn fitness_examples() {
        let r = fitness(0.9820, 0.7355, 0.2).unwrap();
        assert!((r.harmonic_mean - 0.84107).abs() < 1e-4);
        assert!((r.penalty - 0.00243).abs() < 1e-5);
        assert!((r.fitness - 0.83864).abs() < 1e-4);
        assert!((fitness(0.8, 0.8, 0.6).unwrap().fitness - 0.8).abs() < 1e-12);
        let r = fitness(0.7, 0.4, 0.0).unwrap();
        assert_eq!(r.fitness, r.harmonic_mean);
        assert_eq!(fitness(0.0, 0.0, 0.5).unwrap().fitness, 0.0);
    }

    #[test]
    fn evaluate_perfect_and_flipped() {
        let labels = vec![1, 0];
        let data = EnsembleData {
            train: split(vec![vec![1, 0], vec![0, 1]], labels.clone()),
            val: split(vec![vec![1, 0], vec![0, 1]], labels),
            test: None,
        };
        let r = evaluate_weights(&[1.0, 0.0], &data, 0.4).unwrap();
        assert_eq!((r.f1_train, r.f1_val, r.fitness), (1.0, 1.0, 1.0));
        // Member 1 inverts every label: tp = tn = 0, both class F1 are 0.
        let r = evaluate_weights(&[0.0, 1.0], &data, 0.4).unwrap();
        assert_eq!((r.f1_train, r.f1_val, r.fitness), (0.0, 0.0, 0.0));
        assert_eq!(r, evaluate_weights(&[0.0, 1.0], &data, 0.4).unwrap());
    }

    fn three_model_task() -> EnsembleData {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let make = |n: usize, rng: &mut ChaCha8Rng, acc: [f64; 3]| {
            let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
            let rows = acc
                .iter()
                .map(|&a| labels.iter().map(|&l| if rng.gen::<f64>() < a { l } else { 1 - l }).collect())
                .collect();
            split(rows, labels)
        };
        EnsembleData {
            train: make(60, &mut rng, [0.9, 0.7, 0.65]),
            val: make(40, &mut rng, [0.7, 0.75, 0.7]),
            test: None,
        }
    }

    #[test]
    fn pso_is_deterministic_and_monotone() {
        let data = three_model_task();
        let cfg = PsoConfig { particles: 10, epochs: 15, lambda: 0.4, seed: 5, ..PsoConfig::default() };
        let a = pso_optimize(&data, &cfg).unwrap();
        let b = pso_optimize(&data, &PsoConfig { threads: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fitness_trace.len(), 16);
        assert!(a.fitness_trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.best_fitness(), *a.fitness_trace.last().unwrap());
        assert!(a.best_weights.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn sweep_uses_derived_seeds() {
        let data = three_model_task();
        let base = PsoConfig { particles: 6, epochs: 5, seed: 9, ..PsoConfig::default() };
        let all = lambda_sweep(&data, &base, &DEFAULT_LAMBDAS).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(all.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![9, 10, 11, 12, 13]);
        let one = lambda_sweep(&data, &base, &[0.3]).unwrap();
        let direct = pso_optimize(&data, &PsoConfig { lambda: 0.3, ..base.clone() }).unwrap();
        assert_eq!(one, vec![direct]);
        assert!(lambda_sweep(&data, &base, &[]).is_err());
    }

    #[test]
    fn degenerate_validation_labels_rejected() {
        let mut data = three_model_task();
        data.val.labels.iter_mut().for_each(|l| *l = 1);
        assert!(matches!(pso_optimize(&data, &PsoConfig::default()), Err(Error::DegenerateLabels(_))));
    }

    proptest! {
        #[test]
        fn fitness_identity_and_symmetry(a in 0.0f64..=1.0, b in 0.0f64..=1.0, l in 0.0f64..2.0, dl in 0.0f64..2.0) {
            if a > 0.0 {
                prop_assert!((fitness(a, a, l).unwrap().fitness - a).abs() < 1e-12);
            }
            let ab = fitness(a, b, l).unwrap().fitness;
            prop_assert_eq!(ab, fitness(b, a, l).unwrap().fitness);
            prop_assert!(fitness(a, b, l + dl).unwrap().fitness <= ab);
        }

        #[test]
        fn vote_scale_invariant(
            w in proptest::collection::vec(0.0f64..1.0, 15),
            votes in proptest::collection::vec(0u8..=1, 15),
            g in 0.01f64..100.0,
        ) {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            let s: f64 = votes.iter().zip(&w).map(|(v, w)| f64::from(*v) * w).sum();
            let total: f64 = w.iter().sum();
            // Skip near-ties where rounding, not the rule, decides.
            prop_assume!((s - 0.5 * total).abs() > 1e-9 * total);
            let scaled: Vec<f64> = w.iter().map(|x| x * g).collect();
            prop_assert_eq!(hard_vote(&votes, &w).unwrap(), hard_vote(&votes, &scaled).unwrap());
        }

        #[test]
        fn gbest_beats_initial_swarm(seed in 0u64..50) {
            let data = three_model_task();
            let cfg = PsoConfig { particles: 8, epochs: 4, lambda: 0.2, seed, ..PsoConfig::default() };
            let r = pso_optimize(&data, &cfg).unwrap();
            for i in 0..cfg.particles {
                let mut rng = particle_rng(seed, i);
                let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
                prop_assert!(r.best_fitness() >= swarm_fitness(&x, &data, 0.2).unwrap());
            }
        }
    }
}
