//! Transcript statistics plus hesitancy and ambivalence scores from
//! precomputed sentence embeddings.
//!
//!     cargo run --example text_behavior

use std::collections::BTreeMap;

use ah_ensemble::text_behavior::{
    ambivalence_distribution, compute_text_stats, hesitancy_scores, AmbivalenceCategory, AmbivalenceProbe,
    ExpressionSet, HesitancyCategory, HesitancyLexicon, HesitancyScores, SentenceRecord, TextStats, POLES,
};

fn axis(dim: usize, k: usize, tilt: f64) -> Vec<f64> {
    (0..dim).map(|i| if i == k { 1.0 } else { tilt }).collect()
}

fn run_example() -> ah_ensemble::Result<()> {
    let transcript = "Well, um, I I want to quit... but, you know, maybe not yet. I guess it is hard.";
    let stats = compute_text_stats(transcript);
    for (name, value) in TextStats::FIELDS.iter().zip(stats.to_vec()) {
        println!("{name:>24}: {value:.3}");
    }

    // Toy 6-dimensional embeddings: each category owns one axis.
    let dim = 6;
    let lexicon = HesitancyLexicon::new(
        HesitancyCategory::ALL
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let set = ExpressionSet {
                    expressions: vec![format!("{} a", c.name()), format!("{} b", c.name())],
                    embeddings: vec![axis(dim, k, 0.0), axis(dim, k, 0.1)],
                };
                (c.name().to_string(), set)
            })
            .collect::<BTreeMap<_, _>>(),
    )?;
    let sentence = SentenceRecord { text: "um, I guess".into(), embedding: vec![0.2, 0.9, 0.6, 0.0, 0.1, 0.1] };
    let h = hesitancy_scores(&sentence, &lexicon)?;
    for (name, v) in HesitancyScores::field_names().iter().zip(h.to_vec()) {
        println!("{name:>24}: {v:+.3}");
    }

    let probe = AmbivalenceProbe::new(
        AmbivalenceCategory::ALL
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                let set = ExpressionSet {
                    expressions: POLES.iter().map(|p| p.to_string()).collect(),
                    embeddings: (0..4).map(|k| axis(dim, (k + ci) % dim, 0.05)).collect(),
                };
                (c.name().to_string(), set)
            })
            .collect(),
        5.0,
    )?;
    let dist = ambivalence_distribution(&sentence.embedding, &probe)?;
    for (c, d) in AmbivalenceCategory::ALL.iter().zip(&dist) {
        println!("{:>24}: {:.3?} over {:?}", c.name(), d, POLES);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
