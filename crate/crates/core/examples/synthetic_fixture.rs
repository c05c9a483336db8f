//! Writes the synthetic dataset and pipeline config bundled under
//! `fixtures/synthetic/`.
//!
//!     cargo run --example synthetic_fixture -- [output_dir]

use std::path::PathBuf;

use ah_ensemble::fixtures::{write_fixture, SyntheticSpec};

fn run_example() -> ah_ensemble::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic"));
    write_fixture(&dir, &SyntheticSpec::default())?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
