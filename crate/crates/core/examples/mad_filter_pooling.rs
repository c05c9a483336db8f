//! Cleans a frame-embedding sequence with the MAD filter, then summarizes it
//! with derivative pooling and min/max/mean/std pooling.
//!
//!     cargo run --example mad_filter_pooling

use ah_ensemble::data_model::{EmbeddingSequence, Modality};
use ah_ensemble::feature_ops::{derivative_pool, mad_filter, stat_pool, MadScoring};

fn run_example() -> ah_ensemble::Result<()> {
    // Six frames pointing roughly the same way and one that points elsewhere.
    let mut frames: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, 0.1 * i as f64, 0.2]).collect();
    frames.insert(3, vec![-1.0, 0.5, -0.8]);
    let seq = EmbeddingSequence::new("vid000", Modality::Video, frames)?;

    let report = mad_filter(&seq, 5.0, MadScoring::MeanPairwise)?;
    println!("median score {:.3}, MAD {:.3}", report.median, report.mad);
    for (i, (s, k)) in report.scores.iter().zip(&report.kept).enumerate() {
        println!("frame {i}: score {s:+.3} {}", if *k { "kept" } else { "dropped" });
    }

    let clean = seq.retain(&report.kept).expect("at least one frame survives");
    println!("derivative pool ({} values): {:.3?}", 3 * clean.dim(), derivative_pool(&clean));
    println!("stat pool: {:.3?}", stat_pool(clean.chunks())?.flatten());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
