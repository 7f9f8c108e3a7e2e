//! Riemannian Procrustes alignment of a source user's trials to a target user.
//!
//! Three steps: recenter both datasets at the identity, optionally stretch the
//! source to the target's dispersion, then rotate the source so its class means
//! match the target's.

mod rotation;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{
    class_means, dim_mismatch, dispersion, karcher_mean, KarcherConfig, Label, MatrixFunction, SpdMatrix, Trial,
};

pub use rotation::{
    descend, find_rotation, random_orthogonal, retract, riemannian_gradient, spectral_start, DescentRun, RotationFit,
    RotationObjective,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpaConfig {
    /// Dispersion equalization (step two). Off by default: with little target data
    /// the target dispersion is too poorly estimated to be useful.
    pub equalize_dispersion: bool,
    pub rotation_tol: f64,
    pub rotation_max_iter: usize,
    pub rotation_restarts: usize,
    /// Seed for the random restarts of the rotation search.
    pub seed: u64,
}

impl Default for RpaConfig {
    fn default() -> Self {
        RpaConfig {
            equalize_dispersion: false,
            rotation_tol: 1e-8,
            rotation_max_iter: 500,
            rotation_restarts: 4,
            seed: 0,
        }
    }
}

impl RpaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rotation_tol.is_nan() || self.rotation_tol <= 0.0 {
            return Err(Error::Config("rotation_tol must be positive".into()));
        }
        if self.rotation_max_iter == 0 {
            return Err(Error::Config("rotation_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to map source and target data into the aligned frame.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub aligned_source: Vec<Trial>,
    pub recentered_target_train: Vec<Trial>,
    /// `M_T^{-1/2}` of the target training data.
    pub target_whitener: DMatrix<f64>,
    pub rotation: DMatrix<f64>,
    pub rotation_objective: f64,
    /// False when no rotation start converged and the best iterate was kept.
    pub rotation_converged: bool,
}

impl AlignmentResult {
    /// Maps target trials (e.g. the test split) into the aligned frame. Labels are
    /// carried along untouched and never used.
    pub fn transform_target(&self, trials: &[Trial]) -> Result<Vec<Trial>> {
        trials
            .iter()
            .map(|t| Ok(Trial::new(t.cov.whiten(&self.target_whitener)?, t.label)))
            .collect()
    }
}

/// Replaces each covariance `C` by `M^{-1/2} C M^{-1/2}`.
pub fn recenter(trials: &[Trial], m: &SpdMatrix) -> Result<Vec<Trial>> {
    let w = m.inv_sqrt()?;
    trials
        .iter()
        .map(|t| {
            if t.cov.dim() != m.dim() {
                return Err(dim_mismatch(t.cov.dim(), m.dim()));
            }
            Ok(Trial::new(t.cov.whiten(w)?, t.label))
        })
        .collect()
}

/// Moves recentered trials along their geodesics to the identity, `C ↦ C^s` with
/// `s = √(d_reference / d_current)`, which scales the dispersion about the identity
/// from `d_current` to `d_reference`.
pub fn equalize_dispersion(trials: &[Trial], d_current: f64, d_reference: f64) -> Result<Vec<Trial>> {
    if d_current.is_nan() || d_current <= 0.0 {
        return Err(Error::input(format!(
            "current dispersion must be positive, got {d_current}"
        )));
    }
    if d_reference.is_nan() || d_reference < 0.0 {
        return Err(Error::input(format!(
            "reference dispersion must be nonnegative, got {d_reference}"
        )));
    }
    let s = (d_reference / d_current).sqrt();
    if s == 1.0 {
        return Ok(trials.to_vec());
    }
    trials
        .iter()
        .map(|t| {
            let powered = t.cov.eigen()?.apply(MatrixFunction::Power(s))?;
            Ok(Trial::new(SpdMatrix::from_symmetrized(powered)?, t.label))
        })
        .collect()
}

fn covs(trials: &[Trial]) -> Vec<SpdMatrix> {
    trials.iter().map(|t| t.cov.clone()).collect()
}

fn label_set(trials: &[Trial]) -> BTreeSet<Label> {
    trials.iter().map(|t| t.label).collect()
}

/// Target training data recentered at its own mean, reusable across sources.
#[derive(Debug, Clone)]
pub struct PreparedTarget {
    pub recentered: Vec<Trial>,
    /// `M_T^{-1/2}` of the training data.
    pub whitener: DMatrix<f64>,
    pub labels: BTreeSet<Label>,
    /// Class means of the recentered trials.
    pub class_means: BTreeMap<Label, SpdMatrix>,
}

impl PreparedTarget {
    pub fn new(target_train: &[Trial]) -> Result<Self> {
        if target_train.is_empty() {
            return Err(Error::input("empty target training data"));
        }
        let karcher = KarcherConfig::default();
        let mean = karcher_mean(&covs(target_train), &karcher)?;
        let recentered = recenter(target_train, &mean)?;
        let class_means = class_means(&recentered, &karcher)?;
        Ok(PreparedTarget {
            whitener: mean.inv_sqrt()?.clone(),
            labels: label_set(target_train),
            recentered,
            class_means,
        })
    }

    pub fn dim(&self) -> usize {
        self.whitener.nrows()
    }

    /// Maps further target trials (e.g. the test split) into the aligned frame.
    pub fn transform(&self, trials: &[Trial]) -> Result<Vec<Trial>> {
        trials
            .iter()
            .map(|t| Ok(Trial::new(t.cov.whiten(&self.whitener)?, t.label)))
            .collect()
    }
}

/// Source data recentered at its own mean, reusable across targets.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    pub recentered: Vec<Trial>,
    pub mean: SpdMatrix,
    pub labels: BTreeSet<Label>,
    /// Class means of the recentered trials.
    pub class_means: BTreeMap<Label, SpdMatrix>,
}

/// Outcome of the dispersion and rotation steps for one source-target pair.
#[derive(Debug, Clone)]
pub struct SourceRotation {
    pub rotation: DMatrix<f64>,
    pub objective: f64,
    /// False when no rotation start converged and the best iterate was kept.
    pub converged: bool,
    /// Source class means in the aligned frame.
    pub class_means: BTreeMap<Label, SpdMatrix>,
    /// Source trials after dispersion equalization, if it was applied.
    stretched: Option<Vec<Trial>>,
}

impl PreparedSource {
    pub fn new(source: &[Trial]) -> Result<Self> {
        let karcher = KarcherConfig::default();
        let labels = label_set(source);
        if labels.len() < 2 {
            return Err(Error::input("source data needs at least two classes"));
        }
        let mean = karcher_mean(&covs(source), &karcher)?;
        let recentered = recenter(source, &mean)?;
        let class_means = class_means(&recentered, &karcher)?;
        Ok(PreparedSource {
            recentered,
            mean,
            labels,
            class_means,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    /// Steps two and three against a prepared target. With `best_effort`, a
    /// rotation search that converges from no start yields its best iterate
    /// instead of an error.
    pub fn rotation_to(&self, target: &PreparedTarget, cfg: &RpaConfig, best_effort: bool) -> Result<SourceRotation> {
        cfg.validate()?;
        if target.labels != self.labels {
            return Err(Error::input(format!(
                "source classes {:?} differ from target classes {:?}",
                self.labels, target.labels
            )));
        }
        if target.dim() != self.dim() {
            return Err(dim_mismatch(target.dim(), self.dim()));
        }
        let (stretched, source_means) = if cfg.equalize_dispersion {
            let karcher = KarcherConfig::default();
            let identity = SpdMatrix::identity(self.dim());
            let d_source = dispersion(&covs(&self.recentered), &identity)?;
            let d_target = dispersion(&covs(&target.recentered), &identity)?;
            let stretched = equalize_dispersion(&self.recentered, d_source, d_target)?;
            let means = class_means(&stretched, &karcher)?;
            (Some(stretched), means)
        } else {
            (None, self.class_means.clone())
        };
        let (rotation, objective, converged) = match find_rotation(&source_means, &target.class_means, cfg) {
            Ok(fit) => (fit.rotation, fit.objective, true),
            Err(Error::RotationNotConverged { objective, best, .. }) if best_effort => (*best, objective, false),
            Err(e) => return Err(e),
        };
        let class_means = source_means
            .iter()
            .map(|(l, m)| Ok((*l, m.congruence(&rotation)?)))
            .collect::<Result<_>>()?;
        Ok(SourceRotation {
            rotation,
            objective,
            converged,
            class_means,
            stretched,
        })
    }

    /// Aligns this source to `target_train`.
    pub fn align_to(&self, target_train: &[Trial], cfg: &RpaConfig) -> Result<AlignmentResult> {
        self.align(target_train, cfg, false)
    }

    /// Like [`align_to`](Self::align_to), but when the rotation search does not
    /// converge from any start the best iterate found is used instead of failing.
    pub fn align_to_best_effort(&self, target_train: &[Trial], cfg: &RpaConfig) -> Result<AlignmentResult> {
        self.align(target_train, cfg, true)
    }

    fn align(&self, target_train: &[Trial], cfg: &RpaConfig, best_effort: bool) -> Result<AlignmentResult> {
        cfg.validate()?;
        let target = PreparedTarget::new(target_train)?;
        let rot = self.rotation_to(&target, cfg, best_effort)?;
        let source = rot.stretched.as_ref().unwrap_or(&self.recentered);
        let aligned_source = source
            .iter()
            .map(|t| Ok(Trial::new(t.cov.congruence(&rot.rotation)?, t.label)))
            .collect::<Result<Vec<_>>>()?;
        Ok(AlignmentResult {
            aligned_source,
            recentered_target_train: target.recentered,
            target_whitener: target.whitener,
            rotation: rot.rotation,
            rotation_objective: rot.objective,
            rotation_converged: rot.converged,
        })
    }
}

/// Full alignment of `source` to `target_train`.
pub fn rpa_align(source: &[Trial], target_train: &[Trial], cfg: &RpaConfig) -> Result<AlignmentResult> {
    PreparedSource::new(source)?.align_to(target_train, cfg)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spd::testutil::*;
    use crate::spd::{airm_distance, airm_distance_sq};

    fn random_trials(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Trial> {
        let base1 = random_spd(rng, dim, 0.6);
        let base2 = random_spd(rng, dim, 0.6);
        (0..n)
            .map(|i| {
                let base = if i % 2 == 0 { &base1 } else { &base2 };
                let noise = random_spd(rng, dim, 0.3);
                let s = base.sqrt().unwrap();
                let c = SpdMatrix::from_symmetrized(s * noise.matrix() * s).unwrap();
                Trial::new(c, 1 + (i % 2) as Label)
            })
            .collect()
    }

    #[test]
    fn recenter_constant_set_gives_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_spd(&mut rng, 4, 1.0);
        let out = recenter(&[Trial::new(m.clone(), 1), Trial::new(m.clone(), 2)], &m).unwrap();
        for t in out {
            assert!((t.cov.matrix() - DMatrix::identity(4, 4)).norm() < 1e-12);
        }
    }

    #[test]
    fn recentered_mean_is_identity_and_stays_there() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = random_trials(&mut rng, 20, 5);
        let k = KarcherConfig::default();
        let m = karcher_mean(&covs(&trials), &k).unwrap();
        let once = recenter(&trials, &m).unwrap();
        let m1 = karcher_mean(&covs(&once), &k).unwrap();
        let id = SpdMatrix::identity(5);
        assert!(airm_distance(&m1, &id).unwrap() < 1e-6);
        let twice = recenter(&once, &m1).unwrap();
        let m2 = karcher_mean(&covs(&twice), &k).unwrap();
        assert!(airm_distance(&m2, &id).unwrap() < 1e-6);
    }

    #[test]
    fn equalize_dispersion_scales_to_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = random_trials(&mut rng, 20, 4);
        let k = KarcherConfig::default();
        let m = karcher_mean(&covs(&trials), &k).unwrap();
        let rec = recenter(&trials, &m).unwrap();
        let id = SpdMatrix::identity(4);
        let d = dispersion(&covs(&rec), &id).unwrap();

        let same = equalize_dispersion(&rec, d, d).unwrap();
        assert_eq!(same, rec);

        let quarter = equalize_dispersion(&rec, d, d / 4.0).unwrap();
        for (a, b) in rec.iter().zip(&quarter) {
            let root = a.cov.sqrt().unwrap();
            assert!((root - b.cov.matrix()).norm() < 1e-12);
        }

        let half = equalize_dispersion(&rec, d, 0.5).unwrap();
        assert_relative_eq!(dispersion(&covs(&half), &id).unwrap(), 0.5, max_relative = 1e-6);
        assert!(equalize_dispersion(&rec, 0.0, 1.0).is_err());
    }

    #[test]
    fn self_alignment_matches_class_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = random_trials(&mut rng, 16, 4);
        let out = rpa_align(&trials, &trials, &RpaConfig::default()).unwrap();
        let k = KarcherConfig::default();
        let src = class_means(&out.aligned_source, &k).unwrap();
        let tgt = class_means(&out.recentered_target_train, &k).unwrap();
        for label in [1, 2] {
            assert!(airm_distance(&src[&label], &tgt[&label]).unwrap() < 1e-6);
        }
        assert!(out.rotation_objective <= 1e-10);
    }

    #[test]
    fn planted_transform_is_undone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target = random_trials(&mut rng, 20, 5);
        let a = random_invertible(&mut rng, 5) * orthogonal(&mut rng, 5);
        let source: Vec<Trial> = target
            .iter()
            .map(|t| Trial::new(t.cov.congruence(&a).unwrap(), t.label))
            .collect();
        let out = rpa_align(&source, &target, &RpaConfig::default()).unwrap();
        assert!(out.rotation_objective <= 1e-6);
        let k = KarcherConfig::default();
        let src = class_means(&out.aligned_source, &k).unwrap();
        let tgt = class_means(&out.recentered_target_train, &k).unwrap();
        for label in [1, 2] {
            assert!(airm_distance(&src[&label], &tgt[&label]).unwrap() < 1e-3);
        }
        // Objective reported equals the objective on the recentered means.
        let prepared = PreparedSource::new(&source).unwrap();
        let rt = out.rotation.transpose();
        let j: f64 = [1, 2]
            .iter()
            .map(|l| {
                let rotated =
                    SpdMatrix::from_symmetrized(&out.rotation * prepared.class_means[l].matrix() * &rt).unwrap();
                airm_distance_sq(&tgt[l], &rotated).unwrap()
            })
            .sum();
        assert!((j - out.rotation_objective).abs() <= 1e-10);
    }

    #[test]
    fn rotation_preserves_pairwise_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let source = random_trials(&mut rng, 10, 4);
        let target = random_trials(&mut rng, 10, 4);
        let out = rpa_align(&source, &target, &RpaConfig::default()).unwrap();
        let prepared = PreparedSource::new(&source).unwrap();
        for i in 0..source.len() {
            for j in 0..i {
                let before = airm_distance(&prepared.recentered[i].cov, &prepared.recentered[j].cov).unwrap();
                let after = airm_distance(&out.aligned_source[i].cov, &out.aligned_source[j].cov).unwrap();
                assert!((before - after).abs() <= 1e-9);
            }
        }
        let id = SpdMatrix::identity(4);
        let d_before = dispersion(&covs(&prepared.recentered), &id).unwrap();
        let d_after = dispersion(&covs(&out.aligned_source), &id).unwrap();
        assert!((d_before - d_after).abs() <= 1e-9);
    }

    #[test]
    fn equalized_source_matches_target_dispersion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let source = random_trials(&mut rng, 12, 4);
        let target = random_trials(&mut rng, 12, 4);
        let cfg = RpaConfig {
            equalize_dispersion: true,
            ..RpaConfig::default()
        };
        let out = rpa_align(&source, &target, &cfg).unwrap();
        let id = SpdMatrix::identity(4);
        let ds = dispersion(&covs(&out.aligned_source), &id).unwrap();
        let dt = dispersion(&covs(&out.recentered_target_train), &id).unwrap();
        assert_relative_eq!(ds, dt, max_relative = 1e-6);
    }

    #[test]
    fn missing_class_is_an_input_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let source = random_trials(&mut rng, 10, 3);
        let target: Vec<Trial> = random_trials(&mut rng, 10, 3)
            .into_iter()
            .filter(|t| t.label == 1)
            .collect();
        assert!(matches!(
            rpa_align(&source, &target, &RpaConfig::default()),
            Err(Error::Input(_))
        ));
    }
}
