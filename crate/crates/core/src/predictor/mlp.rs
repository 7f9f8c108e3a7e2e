use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widths of the two hidden layers.
pub const HIDDEN: [usize; 2] = [50, 50];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Share of the samples held out for early stopping.
    pub validation_fraction: f64,
    /// Smallest decrease of the validation loss that counts as an improvement.
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 1000,
            patience: 50,
            validation_fraction: 0.1,
            min_delta: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs and patience must be positive".into(),
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        if self.min_delta.is_nan() || self.min_delta < 0.0 {
            return Err(Error::Config("min_delta must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Feed-forward regressor: ReLU hidden layers, identity output.
///
/// `weights[l]` has shape `(fan_in, fan_out)`, so a batch `X` (one sample per
/// row) maps to `relu(X W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpRegressor {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

/// Gradient of the loss with respect to every weight matrix and bias vector.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

fn add_bias(z: &mut DMatrix<f64>, b: &DVector<f64>) {
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col.add_scalar_mut(b[j]);
    }
}

impl MlpRegressor {
    /// Glorot-uniform initialization of weights and biases,
    /// bound `√(6 / (fan_in + fan_out))`.
    pub fn init(layer_sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {layer_sizes:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_in, fan_out, |_, _| {
                rng.random_range(-bound..bound)
            }));
            biases.push(DVector::from_fn(fan_out, |_, _| rng.random_range(-bound..bound)));
        }
        Ok(MlpRegressor { weights, biases })
    }

    /// Builds a network from explicit parameters, checking that shapes chain.
    pub fn from_parts(weights: Vec<DMatrix<f64>>, biases: Vec<DVector<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::input("need one bias vector per weight matrix"));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != b.len() {
                return Err(Error::input(format!("layer {l}: bias length differs from width")));
            }
            if l > 0 && weights[l - 1].ncols() != w.nrows() {
                return Err(Error::input(format!("layer {l}: input width does not chain")));
            }
            if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::input(format!("layer {l}: non-finite parameter")));
            }
        }
        if weights.last().map(|w| w.ncols()) != Some(1) {
            return Err(Error::input("output layer must have width 1"));
        }
        Ok(MlpRegressor { weights, biases })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.weights[0].nrows()];
        sizes.extend(self.weights.iter().map(|w| w.ncols()));
        sizes
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    pub fn input_width(&self) -> usize {
        self.weights[0].nrows()
    }

    /// Pre-activations of every layer for a batch.
    fn pre_activations(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.weights.len());
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = &a * w;
            add_bias(&mut z, b);
            if l + 1 < self.weights.len() {
                a = z.map(|v| v.max(0.0));
            }
            out.push(z);
        }
        out
    }

    /// Predictions for a batch, one per row of `x`.
    pub fn forward(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let z = self.pre_activations(x).pop().expect("at least one layer");
        z.column(0).into_owned()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.forward(&DMatrix::from_row_slice(1, x.len(), x))[0]
    }

    /// Mean squared error on a batch.
    pub fn mse(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        (self.forward(x) - y).norm_squared() / y.len() as f64
    }

    /// Mean squared error and its gradient by backpropagation.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> (f64, Gradients) {
        let zs = self.pre_activations(x);
        let n = y.len() as f64;
        let residual = zs.last().expect("at least one layer").column(0) - y;
        let loss = residual.norm_squared() / n;
        let mut delta = DMatrix::from_column_slice(residual.len(), 1, residual.as_slice()) * (2.0 / n);
        let depth = self.weights.len();
        let mut gw = vec![DMatrix::zeros(0, 0); depth];
        let mut gb = vec![DVector::zeros(0); depth];
        for l in (0..depth).rev() {
            let input = if l == 0 {
                x.clone()
            } else {
                zs[l - 1].map(|v| v.max(0.0))
            };
            gw[l] = input.transpose() * &delta;
            gb[l] = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if l > 0 {
                let mut back = &delta * self.weights[l].transpose();
                back.zip_apply(&zs[l - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        (
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }

    /// Number of scalar parameters.
    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Layer and position of flat parameter `k`: per layer, the weights in
    /// row-major order followed by the biases.
    fn locate(&self, mut k: usize) -> (usize, Option<(usize, usize)>, usize) {
        for l in 0..self.weights.len() {
            let w = &self.weights[l];
            if k < w.len() {
                return (l, Some((k / w.ncols(), k % w.ncols())), 0);
            }
            k -= w.len();
            if k < self.biases[l].len() {
                return (l, None, k);
            }
            k -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, k: usize) -> f64 {
        match self.locate(k) {
            (l, Some(ij), _) => self.weights[l][ij],
            (l, None, j) => self.biases[l][j],
        }
    }

    pub fn set_param(&mut self, k: usize, v: f64) {
        match self.locate(k) {
            (l, Some(ij), _) => self.weights[l][ij] = v,
            (l, None, j) => self.biases[l][j] = v,
        }
    }

    /// Flat parameter `k` of a gradient, same layout as [`MlpRegressor::param`].
    pub fn gradient_entry(&self, g: &Gradients, k: usize) -> f64 {
        match self.locate(k) {
            (l, Some(ij), _) => g.weights[l][ij],
            (l, None, j) => g.biases[l][j],
        }
    }
}

struct Adam {
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<DVector<f64>>,
    v_b: Vec<DVector<f64>>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(net: &MlpRegressor) -> Self {
        let zw = |w: &DMatrix<f64>| DMatrix::zeros(w.nrows(), w.ncols());
        let zb = |b: &DVector<f64>| DVector::zeros(b.len());
        Adam {
            m_w: net.weights.iter().map(zw).collect(),
            v_w: net.weights.iter().map(zw).collect(),
            m_b: net.biases.iter().map(zb).collect(),
            v_b: net.biases.iter().map(zb).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut MlpRegressor, g: &Gradients, lr: f64) {
        self.t += 1;
        let rate = lr * (1.0 - BETA2.powi(self.t)).sqrt() / (1.0 - BETA1.powi(self.t));
        let update = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                p[i] -= rate * m[i] / (v[i].sqrt() + ADAM_EPS);
            }
        };
        for l in 0..net.weights.len() {
            update(
                net.weights[l].as_mut_slice(),
                self.m_w[l].as_mut_slice(),
                self.v_w[l].as_mut_slice(),
                g.weights[l].as_slice(),
            );
            update(
                net.biases[l].as_mut_slice(),
                self.m_b[l].as_mut_slice(),
                self.v_b[l].as_mut_slice(),
                g.biases[l].as_slice(),
            );
        }
    }
}

/// Trains a `[width, 50, 50, 1]` network with Adam on the mean squared error.
///
/// A seeded `validation_fraction` of the samples (at least one) is held out;
/// training stops after `patience` epochs without improvement of the validation
/// loss and the best-validation parameters are returned.
pub fn mlp_train(x: &[Vec<f64>], y: &[f64], cfg: &TrainConfig) -> Result<MlpRegressor> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::input(format!("{} samples but {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::input("training needs at least 2 samples"));
    }
    let width = x[0].len();
    if x.iter().any(|r| r.len() != width) {
        return Err(Error::input("samples have different lengths"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sizes = vec![width];
    sizes.extend(HIDDEN);
    sizes.push(1);
    let mut net = MlpRegressor::init(&sizes, &mut rng)?;

    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let rows = |idx: &[usize]| DMatrix::from_fn(idx.len(), width, |i, j| x[idx[i]][j]);
    let targets = |idx: &[usize]| DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i]));
    let (x_val, y_val) = (rows(val_idx), targets(val_idx));
    let x_train = rows(train_idx);
    let y_train = targets(train_idx);

    let mut adam = Adam::new(&net);
    let mut best = (net.mse(&x_val, &y_val), net.clone());
    let mut stale = 0;
    let mut perm: Vec<usize> = (0..train_idx.len()).collect();
    for _ in 0..cfg.max_epochs {
        perm.shuffle(&mut rng);
        for batch in perm.chunks(cfg.batch_size) {
            let xb = x_train.select_rows(batch);
            let yb = DVector::from_iterator(batch.len(), batch.iter().map(|&i| y_train[i]));
            let (loss, grad) = net.loss_and_gradient(&xb, &yb);
            if !loss.is_finite() {
                return Err(Error::Training("training loss became non-finite".into()));
            }
            adam.step(&mut net, &grad, cfg.learning_rate);
        }
        let val = net.mse(&x_val, &y_val);
        if !val.is_finite() {
            return Err(Error::Training("validation loss became non-finite".into()));
        }
        if val < best.0 - cfg.min_delta {
            best = (val, net.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_data(seed: u64, n: usize, width: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, width, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
        (x, y)
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = MlpRegressor::init(&[6, 8, 5, 1], &mut rng).unwrap();
        let (x, y) = random_data(2, 12, 6);
        let (_, g) = net.loss_and_gradient(&x, &y);
        let h = 1e-5;
        for k in 0..net.n_params() {
            let mut plus = net.clone();
            plus.set_param(k, net.param(k) + h);
            let mut minus = net.clone();
            minus.set_param(k, net.param(k) - h);
            let fd = (plus.mse(&x, &y) - minus.mse(&x, &y)) / (2.0 * h);
            let analytic = net.gradient_entry(&g, k);
            let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-6);
            assert!(rel <= 1e-5, "param {k}: {analytic} vs {fd}");
        }
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let net = MlpRegressor::from_parts(
            vec![DMatrix::zeros(3, 4), DMatrix::zeros(4, 1)],
            vec![DVector::from_element(4, 0.3), DVector::from_element(1, 0.42)],
        )
        .unwrap();
        assert_eq!(net.predict_row(&[1.0, -5.0, 2.0]), 0.42);
    }

    #[test]
    fn flat_parameter_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = MlpRegressor::init(&[2, 3, 1], &mut rng).unwrap();
        assert_eq!(net.n_params(), 2 * 3 + 3 + 3 + 1);
        net.set_param(1, 9.0);
        assert_eq!(net.weights()[0][(0, 1)], 9.0);
        net.set_param(6, 8.0);
        assert_eq!(net.biases()[0][0], 8.0);
        net.set_param(12, 7.0);
        assert_eq!(net.biases()[1][0], 7.0);
    }

    #[test]
    fn fits_a_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 0.5 + 0.2 * r[0] - 0.1 * r[1] + 0.05 * r[3]).collect();
        let cfg = TrainConfig {
            max_epochs: 3000,
            patience: 3000,
            ..TrainConfig::default()
        };
        let net = mlp_train(&x, &y, &cfg).unwrap();
        let xm = DMatrix::from_fn(50, 4, |i, j| x[i][j]);
        let mse = net.mse(&xm, &DVector::from_vec(y.clone()));
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = random_data(5, 40, 3);
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        let cfg = TrainConfig {
            max_epochs: 20,
            ..TrainConfig::default()
        };
        let a = mlp_train(&rows, y.as_slice(), &cfg).unwrap();
        let b = mlp_train(&rows, y.as_slice(), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
