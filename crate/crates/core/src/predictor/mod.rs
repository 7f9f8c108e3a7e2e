//! Transfer-performance prediction: robust scaling followed by a small MLP
//! regressing cross-subject accuracy from [`PairFeatures`].

mod mlp;
mod scaler;

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{PairFeatures, N_FEATURES};

pub use mlp::{mlp_train, Gradients, MlpRegressor, TrainConfig, HIDDEN};
pub use scaler::{quantile_sorted, RobustScaler, PASS_THROUGH_IQR};

pub const MODEL_VERSION: u32 = 1;

/// A fitted scaler + network pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TppModel {
    pub scaler: RobustScaler,
    pub network: MlpRegressor,
    pub train_seed: u64,
}

/// On-disk model layout; `weights[l]` is the `(fan_in, fan_out)` matrix in
/// row-major order.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    scaler_median: Vec<f64>,
    scaler_iqr: Vec<f64>,
    train_seed: u64,
}

impl TppModel {
    /// Fits the scaler on `features` and trains the network on the scaled rows.
    pub fn fit(features: &[PairFeatures], accuracies: &[f64], cfg: &TrainConfig) -> Result<Self> {
        let raw: Vec<&[f64]> = features.iter().map(|f| &f.0[..]).collect();
        let scaler = RobustScaler::fit(&raw)?;
        let scaled: Vec<Vec<f64>> = raw.iter().map(|r| scaler.apply(r)).collect();
        let network = mlp_train(&scaled, accuracies, cfg)?;
        Ok(TppModel {
            scaler,
            network,
            train_seed: cfg.seed,
        })
    }

    /// Raw (unclipped) predicted accuracy, used for ranking.
    pub fn predict(&self, f: &PairFeatures) -> f64 {
        self.network.predict_row(&self.scaler.apply(&f.0))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            layer_sizes: self.network.layer_sizes(),
            weights: self
                .network
                .weights()
                .iter()
                .map(|w| w.transpose().iter().copied().collect())
                .collect(),
            biases: self
                .network
                .biases()
                .iter()
                .map(|b| b.iter().copied().collect())
                .collect(),
            scaler_median: self.scaler.median.clone(),
            scaler_iqr: self.scaler.iqr.clone(),
            train_seed: self.train_seed,
        };
        let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::input(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.version != MODEL_VERSION {
            return Err(Error::input(format!("unsupported model version {}", file.version)));
        }
        let sizes = &file.layer_sizes;
        let expected: Vec<usize> = [N_FEATURES].into_iter().chain(HIDDEN).chain([1]).collect();
        if *sizes != expected {
            return Err(Error::input(format!("layer sizes {sizes:?}, expected {expected:?}")));
        }
        if file.weights.len() != sizes.len() - 1 || file.biases.len() != sizes.len() - 1 {
            return Err(Error::input("weight/bias count does not match layer sizes"));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if file.weights[l].len() != fan_in * fan_out || file.biases[l].len() != fan_out {
                return Err(Error::input(format!("layer {l} has the wrong number of parameters")));
            }
            weights.push(DMatrix::from_row_slice(fan_in, fan_out, &file.weights[l]));
            biases.push(DVector::from_column_slice(&file.biases[l]));
        }
        if file.scaler_median.len() != N_FEATURES || file.scaler_iqr.len() != N_FEATURES {
            return Err(Error::input("scaler parameters must have one entry per feature"));
        }
        if file.scaler_iqr.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::input("scaler IQR entries must be nonnegative"));
        }
        Ok(TppModel {
            scaler: RobustScaler {
                median: file.scaler_median,
                iqr: file.scaler_iqr,
            },
            network: MlpRegressor::from_parts(weights, biases)?,
            train_seed: file.train_seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Raw predicted transfer accuracy of a pair.
pub fn predict_accuracy(model: &TppModel, f: &PairFeatures) -> f64 {
    model.predict(f)
}

/// Clip to `[0, 1]` for reporting. Rankings use the raw value.
pub fn clip_accuracy(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}
