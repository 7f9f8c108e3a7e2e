use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{airm_distance_sq, dim_mismatch, sym_map, Label, MatrixFunction, SpdMatrix, Trial};
use crate::error::{Error, Result};

/// Fixed-point iteration settings for the Karcher mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KarcherConfig {
    /// Step along the mean tangent direction.
    pub step: f64,
    /// Convergence threshold on the Frobenius norm of the whitened tangent mean.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KarcherConfig {
    fn default() -> Self {
        KarcherConfig {
            step: 1.0,
            tol: 1e-8,
            max_iter: 64,
        }
    }
}

fn check_common_dim(set: &[SpdMatrix]) -> Result<usize> {
    let first = set.first().ok_or_else(|| Error::input("mean of an empty set"))?.dim();
    if let Some(bad) = set.iter().find(|c| c.dim() != first) {
        return Err(dim_mismatch(bad.dim(), first));
    }
    Ok(first)
}

/// Whitened tangent mean `(1/N) Σ log(M^{-1/2} C_i M^{-1/2})`.
pub(crate) fn tangent_mean(set: &[SpdMatrix], m: &SpdMatrix) -> Result<DMatrix<f64>> {
    let w = m.inv_sqrt()?;
    let mut acc = DMatrix::zeros(m.dim(), m.dim());
    for c in set {
        acc += sym_map(&(w * c.matrix() * w), MatrixFunction::Log)?;
    }
    Ok(acc / set.len() as f64)
}

/// Geometric (Karcher) mean: the minimizer of `Σ δ²(M, C_i)`.
///
/// Starts from the arithmetic mean and iterates
/// `M ← M^{1/2} exp(step · T̄) M^{1/2}` until `‖T̄‖_F < tol`.
pub fn karcher_mean(set: &[SpdMatrix], cfg: &KarcherConfig) -> Result<SpdMatrix> {
    let dim = check_common_dim(set)?;
    if set.len() == 1 {
        return Ok(set[0].clone());
    }
    let mut sum = DMatrix::zeros(dim, dim);
    for c in set {
        sum += c.matrix();
    }
    let mut m = SpdMatrix::from_symmetrized(sum / set.len() as f64)?;
    let mut residual = f64::INFINITY;
    for iter in 0..=cfg.max_iter {
        let t = tangent_mean(set, &m)?;
        residual = t.norm();
        if !residual.is_finite() {
            return Err(Error::numerical("Karcher iteration produced a non-finite tangent mean"));
        }
        if residual < cfg.tol {
            return Ok(m);
        }
        if iter == cfg.max_iter {
            break;
        }
        let s = m.sqrt()?;
        let step = sym_map(&(t * cfg.step), MatrixFunction::Exp)?;
        m = SpdMatrix::from_symmetrized(s * step * s)?;
    }
    Err(Error::KarcherNotConverged {
        iterations: cfg.max_iter,
        residual,
        last: Box::new(m),
    })
}

/// Karcher mean of each label's covariances.
pub fn class_means(trials: &[Trial], cfg: &KarcherConfig) -> Result<BTreeMap<Label, SpdMatrix>> {
    if trials.is_empty() {
        return Err(Error::input("class means of an empty trial set"));
    }
    let mut groups: BTreeMap<Label, Vec<SpdMatrix>> = BTreeMap::new();
    for t in trials {
        groups.entry(t.label).or_default().push(t.cov.clone());
    }
    groups
        .into_iter()
        .map(|(label, set)| karcher_mean(&set, cfg).map(|m| (label, m)))
        .collect()
}

/// Mean squared distance of `set` about `m`.
pub fn dispersion(set: &[SpdMatrix], m: &SpdMatrix) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::input("dispersion of an empty set"));
    }
    let mut total = 0.0;
    for c in set {
        total += airm_distance_sq(m, c)?;
    }
    Ok(total / set.len() as f64)
}
