//! Runs the full pipeline on the bundled synthetic fixture.
//!
//!     cargo run --example pipeline_fixture -- [output_dir]

use std::path::PathBuf;

use ah_ensemble::pipeline::{run_pipeline, PipelineConfig};

fn run_example() -> ah_ensemble::Result<()> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let mut cfg = PipelineConfig::load(&fixture.join("config.json"))?;
    let tmp = tempfile::tempdir().map_err(|e| ah_ensemble::Error::io("temp dir", e))?;
    let keep = std::env::args().nth(1).map(PathBuf::from);
    cfg.output_dir = keep.clone().unwrap_or_else(|| tmp.path().join("out"));

    let outcome = run_pipeline(&cfg, 0)?;
    for s in &outcome.stages {
        println!("{:<10} {:?}", s.stage, s.status);
    }
    let r = &outcome.result;
    println!("best single member: {} (val F1 {:.4})", r.best_single.model, r.best_single.val_f1);
    let chosen = &r.sweep[r.selected];
    println!(
        "ensemble at lambda {}: val F1 {:.4}, {} zero weights",
        chosen.lambda, chosen.reports.val.f1_macro, chosen.zero_weight_count
    );
    if keep.is_some() {
        println!("wrote {}", outcome.result_path.display());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
