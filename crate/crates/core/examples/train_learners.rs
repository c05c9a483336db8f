//! Trains the MLP and the logistic baseline on one modality of the synthetic
//! data and reports validation BCE and macro F1.
//!
//!     cargo run --example train_learners

use ah_ensemble::data_model::Split;
use ah_ensemble::feature_ops::{apply_scaler, fit_scaler};
use ah_ensemble::fixtures::{generate, SyntheticSpec};
use ah_ensemble::learners::{train_logistic, train_mlp, LogisticConfig, MlpConfig, TrainedModel};
use ah_ensemble::metrics::MetricReport;

fn run_example() -> ah_ensemble::Result<()> {
    let data = generate(&SyntheticSpec::default());
    let pick = |split: Split| {
        let (x, y): (Vec<Vec<f64>>, Vec<u8>) = data
            .manifest
            .iter()
            .zip(&data.text.rows)
            .filter(|(e, _)| e.split == split)
            .map(|(e, r)| (r.clone(), e.label))
            .unzip();
        (x, y)
    };
    let (train_x, train_y) = pick(Split::Train);
    let (val_x, val_y) = pick(Split::Val);
    let scaler = fit_scaler(&train_x)?;
    let (train_x, val_x) = (apply_scaler(&scaler, &train_x)?, apply_scaler(&scaler, &val_x)?);

    let mlp_cfg = MlpConfig { hidden_sizes: [32, 16, 8], epochs: 80, batch_size: 16, learning_rate: 0.05, ..MlpConfig::default() };
    let models = [
        TrainedModel::Mlp(train_mlp(&train_x, &train_y, &mlp_cfg)?),
        TrainedModel::Logistic(train_logistic(&train_x, &train_y, &LogisticConfig::default())?),
    ];
    for model in &models {
        let p = model.predict_proba(&val_x)?;
        let report = MetricReport::from_scores(&val_y, &p, 0.5)?;
        println!(
            "{:>8}: val BCE {:.4}, macro F1 {:.4}",
            model.kind().name(),
            report.bce.unwrap_or(f64::NAN),
            report.f1_macro
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
