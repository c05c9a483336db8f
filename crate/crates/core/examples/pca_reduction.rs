//! Standardizes a feature table on its training rows and reduces it with PCA.
//!
//!     cargo run --example pca_reduction

use ah_ensemble::data_model::Split;
use ah_ensemble::feature_ops::{apply_pca, apply_scaler, fit_pca, fit_scaler};
use ah_ensemble::fixtures::{generate, SyntheticSpec};

fn run_example() -> ah_ensemble::Result<()> {
    let data = generate(&SyntheticSpec::default());
    let train: Vec<Vec<f64>> = data
        .manifest
        .iter()
        .zip(&data.text.rows)
        .filter(|(e, _)| e.split == Split::Train)
        .map(|(_, r)| r.clone())
        .collect();

    let scaler = fit_scaler(&train)?;
    let scaled = apply_scaler(&scaler, &data.text.rows)?;
    let pca = fit_pca(&apply_scaler(&scaler, &train)?, 8, 0.9)?;
    let reduced = apply_pca(&pca, &scaled)?;

    println!("{} rows, {} -> {} columns", reduced.len(), pca.dim(), pca.k());
    println!("explained variance ratio: {:.3?}", pca.explained_variance_ratio);
    println!("retained {:.1}% of the variance", 100.0 * pca.retained_ratio());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
