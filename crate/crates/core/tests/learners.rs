use ah_ensemble::learners::{train_logistic, train_mlp, LogisticConfig, MlpConfig, TrainedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let c = if label == 1 { 2.0 } else { -2.0 };
        x.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
        y.push(label);
    }
    (x, y)
}

fn xor(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        if a.abs() < 0.1 || b.abs() < 0.1 {
            continue;
        }
        y.push(u8::from((a > 0.0) != (b > 0.0)));
        x.push(vec![a, b]);
    }
    (x, y)
}

fn accuracy(model: &TrainedModel, x: &[Vec<f64>], y: &[u8]) -> f64 {
    let p = model.predict_proba(x).unwrap();
    p.iter().zip(y).filter(|(p, &l)| u8::from(**p >= 0.5) == l).count() as f64 / y.len() as f64
}

fn small_mlp() -> MlpConfig {
    MlpConfig {
        hidden_sizes: [16, 8, 4],
        input_noise_sigma: 0.0,
        dropout_p: 0.0,
        learning_rate: 0.05,
        epochs: 150,
        batch_size: 16,
        seed: 1,
        ..MlpConfig::default()
    }
}

#[test]
fn mlp_separates_blobs() {
    let (x, y) = blobs(200, 1);
    let model = TrainedModel::Mlp(train_mlp(&x, &y, &small_mlp()).unwrap());
    let (tx, ty) = blobs(200, 2);
    assert!(accuracy(&model, &tx, &ty) >= 0.95);
}

#[test]
fn mlp_learns_xor() {
    let (x, y) = xor(400, 3);
    let cfg = MlpConfig { epochs: 300, ..small_mlp() };
    let model = TrainedModel::Mlp(train_mlp(&x, &y, &cfg).unwrap());
    let (tx, ty) = xor(400, 4);
    let acc = accuracy(&model, &tx, &ty);
    assert!(acc >= 0.9, "xor accuracy {acc}");
}

#[test]
fn mlp_training_is_deterministic() {
    let (x, y) = blobs(64, 5);
    let cfg = MlpConfig { epochs: 10, input_noise_sigma: 0.1, dropout_p: 0.2, ..small_mlp() };
    assert_eq!(train_mlp(&x, &y, &cfg).unwrap(), train_mlp(&x, &y, &cfg).unwrap());
    let other = MlpConfig { seed: 2, ..cfg.clone() };
    assert_ne!(train_mlp(&x, &y, &cfg).unwrap(), train_mlp(&x, &y, &other).unwrap());
}

#[test]
fn full_batch_loss_decreases() {
    let (x, y) = blobs(64, 6);
    let cfg = MlpConfig {
        use_batch_norm: false,
        learning_rate: 0.01,
        epochs: 10,
        batch_size: x.len(),
        ..small_mlp()
    };
    let model = train_mlp(&x, &y, &cfg).unwrap();
    for w in model.epoch_losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{:?}", model.epoch_losses);
    }
}

#[test]
fn logistic_weight_follows_the_signal() {
    let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0 - 2.0]).collect();
    let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
    let m = train_logistic(&x, &y, &LogisticConfig::default()).unwrap();
    assert!(m.weights[0] > 0.0);
    let flipped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
    let m = train_logistic(&x, &flipped, &LogisticConfig::default()).unwrap();
    assert!(m.weights[0] < 0.0);
}

#[test]
fn stronger_penalty_shrinks_weights() {
    let (x, y) = blobs(100, 7);
    let norms: Vec<f64> = [0.0, 1.0, 10.0]
        .iter()
        .map(|&l2| train_logistic(&x, &y, &LogisticConfig { l2, ..LogisticConfig::default() }).unwrap().weight_norm())
        .collect();
    assert!(norms[0] >= norms[1] && norms[1] >= norms[2], "{norms:?}");
}

#[test]
fn logistic_separates_blobs() {
    let (x, y) = blobs(200, 8);
    let model = TrainedModel::Logistic(train_logistic(&x, &y, &LogisticConfig::default()).unwrap());
    let (tx, ty) = blobs(200, 9);
    assert!(accuracy(&model, &tx, &ty) >= 0.95);
}
