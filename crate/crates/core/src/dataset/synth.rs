//! Synthetic two-class covariance data with planted transferability.
//!
//! Every subject shares a global class-discriminative direction `D = Q diag(λ) Qᵀ`
//! (unit Frobenius norm, random `Q` and `λ`). Subject `s` in group `g` gets
//!
//! - its own direction `D_s = Q diag(λ_s) Qᵀ` with spectrum
//!   `λ_s = unit(λ + shift · class_shift · mix(e_g, e_s))`, and class means
//!   `exp(∓ sep/2 · D_s)` (so the two means are `sep` apart). Alignment by a
//!   rotation cannot undo a change of spectrum, so this part of the shift keeps
//!   distant groups poor sources for each other,
//! - a congruence `A_s = exp(shift/2 · mix(H_g, H_s)) · expm(shift · mix(K_g, K_s))`
//!   with `H` symmetric and `K` skew-symmetric, applied to both class means,
//! - a tangent-noise scale `σ_s = subject_dispersion · exp(dispersion_spread · z_s)`,
//!
//! where `mix(a, b) = coupling · a + √(1 − coupling²) · b` and `shift` is
//! `domain_shift_scale`. Subjects of the same group share the `E_g, H_g, K_g` part,
//! which makes them better sources for each other. Trials are
//! `P^{1/2} exp(N) P^{1/2}` with `P` the class mean and `N` symmetric Gaussian
//! (diagonal variance `σ_s²`, off-diagonal `σ_s²/2`).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::SubjectData;
use crate::error::{Error, Result};
use crate::rpa::random_orthogonal;
use crate::spd::{sym_map, MatrixFunction, SpdMatrix, Trial};

/// Which subject pairs are planted as compatible, and how strongly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferStructure {
    /// Subject `s` belongs to group `s mod n_groups`.
    pub n_groups: usize,
    /// Share of a subject's shift taken from its group, in `[0, 1]`.
    pub coupling: f64,
    /// Size of the per-subject change of the class direction, relative to the
    /// congruence shift.
    pub class_shift: f64,
    /// Log-normal spread of the per-subject noise scale.
    pub dispersion_spread: f64,
}

impl Default for TransferStructure {
    fn default() -> Self {
        TransferStructure {
            n_groups: 3,
            coupling: 0.8,
            class_shift: 0.5,
            dispersion_spread: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub trials_per_class: usize,
    pub dim: usize,
    /// AIRM distance between a subject's two class means.
    pub class_separation: f64,
    /// Tangent-noise scale of the trials around their class mean.
    pub subject_dispersion: f64,
    /// Magnitude of the per-subject congruence and class-direction change.
    pub domain_shift_scale: f64,
    pub transferability_structure: TransferStructure,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 12,
            trials_per_class: 22,
            dim: 9,
            class_separation: 1.0,
            subject_dispersion: 0.1,
            domain_shift_scale: 1.0,
            transferability_structure: TransferStructure::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.transferability_structure;
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.trials_per_class == 0 {
            return bad("trials_per_class must be positive");
        }
        for (name, v) in [
            ("class_separation", self.class_separation),
            ("subject_dispersion", self.subject_dispersion),
            ("domain_shift_scale", self.domain_shift_scale),
            ("class_shift", t.class_shift),
            ("dispersion_spread", t.dispersion_spread),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&t.coupling) {
            return bad("coupling must lie in [0, 1]");
        }
        if t.n_groups == 0 {
            return bad("n_groups must be positive");
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn unit(m: DMatrix<f64>) -> DMatrix<f64> {
    let norm = m.norm();
    if norm > 0.0 {
        m / norm
    } else {
        m
    }
}

fn unit_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian(rng, n);
    unit(&g + g.transpose())
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = v.norm();
    v / norm
}

fn unit_skew(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian(rng, n);
    unit(&g - g.transpose())
}

/// Symmetric Gaussian matrix, diagonal variance `σ²`, off-diagonal `σ²/2`.
fn tangent_noise(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = sigma * rng.sample::<f64, _>(StandardNormal);
        for j in 0..i {
            let v = sigma * std::f64::consts::FRAC_1_SQRT_2 * rng.sample::<f64, _>(StandardNormal);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

struct GroupShift {
    class: DVector<f64>,
    stretch: DMatrix<f64>,
    rotation: DMatrix<f64>,
}

fn draw_shift(rng: &mut ChaCha8Rng, n: usize) -> GroupShift {
    GroupShift {
        class: unit_vector(rng, n),
        stretch: unit_symmetric(rng, n),
        rotation: unit_skew(rng, n),
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates `cfg.n_subjects` subjects with ids `S001, S002, ...` and labels 1, 2.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<SubjectData>> {
    cfg.validate()?;
    let n = cfg.dim;
    let ts = &cfg.transferability_structure;
    let mut global = rng_for(cfg.seed, 0);
    let basis = random_orthogonal(&mut global, n, true);
    let spectrum = unit_vector(&mut global, n);
    let groups: Vec<GroupShift> = (0..ts.n_groups).map(|_| draw_shift(&mut global, n)).collect();

    let own = (1.0 - ts.coupling * ts.coupling).sqrt();
    let mix = |a: &DMatrix<f64>, b: &DMatrix<f64>| a * ts.coupling + b * own;
    let mix_vec = |a: &DVector<f64>, b: &DVector<f64>| a * ts.coupling + b * own;
    let shift = cfg.domain_shift_scale;

    (0..cfg.n_subjects)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_for(cfg.seed, s as u64 + 1);
            let group = s % ts.n_groups;
            let g = &groups[group];
            let mine = draw_shift(&mut rng, n);
            let z: f64 = rng.sample(StandardNormal);
            let sigma = cfg.subject_dispersion * (ts.dispersion_spread * z).exp();

            let lambda = spectrum.clone() + mix_vec(&g.class, &mine.class) * (shift * ts.class_shift);
            let lambda = &lambda / lambda.norm();
            let d_s = &basis * DMatrix::from_diagonal(&lambda) * basis.transpose();
            let stretch = sym_map(&(mix(&g.stretch, &mine.stretch) * (0.5 * shift)), MatrixFunction::Exp)?;
            let rotation = (mix(&g.rotation, &mine.rotation) * shift).exp();
            let congruence = stretch * rotation;

            let mut trials = Vec::with_capacity(2 * cfg.trials_per_class);
            for (label, sign) in [(1, -1.0), (2, 1.0)] {
                let canonical = sym_map(&(&d_s * (sign * cfg.class_separation / 2.0)), MatrixFunction::Exp)?;
                let mean = SpdMatrix::from_symmetrized(canonical)?.congruence(&congruence)?;
                let root = mean.sqrt()?.clone();
                for _ in 0..cfg.trials_per_class {
                    let cov = if sigma == 0.0 {
                        mean.clone()
                    } else {
                        let e = sym_map(&tangent_noise(&mut rng, n, sigma), MatrixFunction::Exp)?;
                        SpdMatrix::from_symmetrized(e)?.congruence(&root)?
                    };
                    trials.push(Trial::new(cov, label));
                }
            }
            let mut metadata = Map::new();
            metadata.insert("group".into(), Value::from(group));
            metadata.insert("noise_scale".into(), Value::from(sigma));
            Ok(SubjectData {
                id: format!("S{:03}", s + 1),
                trials,
                metadata,
            })
        })
        .collect()
}
