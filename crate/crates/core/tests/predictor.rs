//! Backpropagation against central finite differences, and model persistence.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srcsel_core::features::{PairFeatures, N_FEATURES};
use srcsel_core::predictor::{MlpRegressor, TppModel, TrainConfig, HIDDEN};

fn layer_sizes() -> Vec<usize> {
    let mut sizes = vec![N_FEATURES];
    sizes.extend(HIDDEN);
    sizes.push(1);
    sizes
}

#[test]
fn backprop_matches_central_differences() {
    let h = 1e-6;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = MlpRegressor::init(&layer_sizes(), &mut rng).unwrap();
        let x = DMatrix::from_fn(16, N_FEATURES, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(16, |_, _| rng.random_range(0.0..1.0));
        let (_, grads) = net.loss_and_gradient(&x, &y);
        for _ in 0..10 {
            let k = rng.random_range(0..net.n_params());
            let analytic = net.gradient_entry(&grads, k);
            let base = net.param(k);
            net.set_param(k, base + h);
            let up = net.mse(&x, &y);
            net.set_param(k, base - h);
            let down = net.mse(&x, &y);
            net.set_param(k, base);
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / scale <= 1e-5,
                "seed {seed}, parameter {k}: {analytic} vs {numeric}"
            );
        }
    }
}

#[test]
fn saved_model_predicts_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let features: Vec<PairFeatures> = (0..60)
        .map(|_| PairFeatures(std::array::from_fn(|_| rng.random_range(0.0..3.0))))
        .collect();
    let acc: Vec<f64> = features.iter().map(|f| 0.5 + 0.1 * f.0[0] - 0.05 * f.0[3]).collect();
    let cfg = TrainConfig {
        max_epochs: 50,
        ..Default::default()
    };
    let model = TppModel::fit(&features, &acc, &cfg).unwrap();
    let restored = TppModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(restored, model);
    for f in &features {
        assert_eq!(restored.predict(f), model.predict(f));
    }
}
