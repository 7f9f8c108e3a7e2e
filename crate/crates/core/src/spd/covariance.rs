use nalgebra::DMatrix;

use super::{SpdMatrix, SymEigen};
use crate::error::{Error, Result};

/// Smallest eigenvalue, relative to the trace, below which a covariance is
/// treated as rank deficient.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Sample covariance options. Ridge regularization is off by default.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CovarianceConfig {
    /// When set, rank-deficient covariances get `λ · trace/ch · I` added.
    pub ridge: Option<f64>,
}

impl CovarianceConfig {
    pub const DEFAULT_RIDGE: f64 = 1e-8;

    pub fn with_ridge() -> Self {
        CovarianceConfig {
            ridge: Some(Self::DEFAULT_RIDGE),
        }
    }
}

/// `(1/s) X Xᵀ` for a `ch × s` trial.
pub fn trial_covariance(x: &DMatrix<f64>, cfg: &CovarianceConfig) -> Result<SpdMatrix> {
    let (ch, s) = x.shape();
    if ch == 0 || s == 0 {
        return Err(Error::input("empty trial"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("trial has non-finite samples"));
    }
    if s < ch && cfg.ridge.is_none() {
        return Err(Error::Rank(format!(
            "{s} samples for {ch} channels gives a singular covariance"
        )));
    }
    let mut c = (x * x.transpose()) / s as f64;
    let trace = c.trace();
    let min = SymEigen::new(&c)?.values.min();
    if min < RANK_THRESHOLD * trace {
        match cfg.ridge {
            Some(lambda) => {
                for i in 0..ch {
                    c[(i, i)] += lambda * trace / ch as f64;
                }
            }
            None => {
                return Err(Error::Rank(format!(
                    "smallest eigenvalue {min:e} below {RANK_THRESHOLD:e} · trace"
                )))
            }
        }
    }
    SpdMatrix::from_symmetrized(c)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::testutil::*;
    use super::*;

    #[test]
    fn identity_trial() {
        let c = trial_covariance(&DMatrix::identity(4, 4), &CovarianceConfig::default()).unwrap();
        assert_relative_eq!(c.matrix().clone(), DMatrix::identity(4, 4) / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn orthogonal_rows_of_norm_sqrt_s_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = 6;
        let q = orthogonal(&mut rng, s);
        let x = q.rows(0, 3).into_owned() * (s as f64).sqrt();
        let c = trial_covariance(&x, &CovarianceConfig::default()).unwrap();
        assert_relative_eq!(c.matrix().clone(), DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn matches_two_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gaussian(&mut rng, 9, 161);
        let c = trial_covariance(&x, &CovarianceConfig::default()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let mut acc = 0.0;
                for t in 0..161 {
                    acc += x[(i, t)] * x[(j, t)];
                }
                acc /= 161.0;
                assert!((c.matrix()[(i, j)] - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn short_trials_need_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian(&mut rng, 5, 3);
        assert!(matches!(
            trial_covariance(&x, &CovarianceConfig::default()),
            Err(Error::Rank(_))
        ));
        let c = trial_covariance(&x, &CovarianceConfig::with_ridge()).unwrap();
        assert!(c.eigen().unwrap().values.min() > 0.0);
    }

    #[test]
    fn duplicated_channel_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = gaussian(&mut rng, 3, 50);
        let row = x.row(0).into_owned();
        x.row_mut(1).copy_from(&row);
        assert!(matches!(
            trial_covariance(&x, &CovarianceConfig::default()),
            Err(Error::Rank(_))
        ));
        assert!(trial_covariance(&x, &CovarianceConfig::with_ridge()).is_ok());
    }
}
