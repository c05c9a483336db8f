//! Picks one member per modality combination by validation BCE from a
//! directory of `<combo>_<algo>.csv` score files.
//!
//!     cargo run --example committee_selection -- [manifest.jsonl candidates_dir]

use std::path::PathBuf;

use ah_ensemble::committee::{load_candidates, Committee};
use ah_ensemble::data_model::{read_manifest, SampleSet};

fn run_example() -> ah_ensemble::Result<()> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let mut args = std::env::args().skip(1);
    let manifest = args.next().map(PathBuf::from).unwrap_or_else(|| fixture.join("manifest.jsonl"));
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| fixture.join("external"));

    let samples = SampleSet::from_entries(read_manifest(&manifest)?)?;
    let candidates = load_candidates(&dir, &samples)?;
    let committee = Committee::select(&candidates, &samples)?;
    println!("{:<24} {:<6} {:>8} {:>8} {:>9}", "combination", "algo", "val BCE", "val F1", "threshold");
    for m in &committee.members {
        println!("{:<24} {:<6} {:>8.4} {:>8.4} {:>9.3}", m.combo_label, m.algorithm, m.val_bce, m.val_f1, m.threshold);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
