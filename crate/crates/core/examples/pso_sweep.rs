//! Builds a committee from score files, then searches hard-voting weights
//! with PSO for each gap-penalty value.
//!
//!     cargo run --example pso_sweep

use std::path::PathBuf;

use ah_ensemble::committee::{committee_predict, load_candidates, Committee};
use ah_ensemble::data_model::{read_manifest, SampleSet};
use ah_ensemble::ensemble_pso::{lambda_sweep, EnsembleData, PsoConfig, DEFAULT_LAMBDAS};

fn run_example() -> ah_ensemble::Result<()> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let mut samples = SampleSet::from_entries(read_manifest(&fixture.join("manifest.jsonl"))?)?;
    let candidates = load_candidates(&fixture.join("external"), &samples)?;
    let committee = Committee::select(&candidates, &samples)?;
    for c in candidates {
        samples.insert_scores(c.model_name(), c.scores)?;
    }

    let votes = committee_predict(&committee.members, &samples)?;
    let data = EnsembleData::from_votes(&votes, &samples)?;
    let sweep = lambda_sweep(&data, &PsoConfig { seed: 42, ..PsoConfig::default() }, &DEFAULT_LAMBDAS)?;
    println!("{:>6} {:>8} {:>8} {:>8} {:>6}", "lambda", "train F1", "val F1", "fitness", "zeros");
    for r in &sweep {
        println!(
            "{:>6.1} {:>8.4} {:>8.4} {:>8.4} {:>6}",
            r.lambda, r.best.f1_train, r.best.f1_val, r.best.fitness, r.zero_weight_count
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
