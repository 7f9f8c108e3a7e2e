#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use srcsel_core::spd::SpdMatrix;

pub fn gaussian(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn from_spectrum(q: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let m = q * DMatrix::from_diagonal(&DVector::from_row_slice(d)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// SPD matrix with log-eigenvalues uniform in `[-spread, spread]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, spread: f64) -> SpdMatrix {
    let q = orthogonal(rng, n);
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..spread).exp()).collect();
    SpdMatrix::new(from_spectrum(&q, &d)).unwrap()
}

pub fn random_invertible(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0f64).exp()).collect();
    orthogonal(rng, n) * DMatrix::from_diagonal(&DVector::from_vec(d)) * orthogonal(rng, n)
}

/// AIRM distance through the generalized eigenvalues of `(b, a)`, computed with
/// a Cholesky factor of `a` instead of matrix square roots.
pub fn oracle_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let l = a.clone().cholesky().unwrap().l();
    let li = l.clone().try_inverse().unwrap();
    let x = &li * b * li.transpose();
    let x = (&x + x.transpose()) * 0.5;
    SymmetricEigen::new(x)
        .eigenvalues
        .iter()
        .map(|v| v.ln().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `f` applied to the spectrum of symmetric `m`.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d: Vec<f64> = e.eigenvalues.iter().map(|v| f(*v)).collect();
    from_spectrum(&e.eigenvectors, &d)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Two-sided p-value from all `2^n` sign assignments of the nonzero magnitudes.
pub fn enumerated_p(diffs: &[f64]) -> f64 {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return 1.0;
    }
    let mags: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    // Rank by counting: rank = #smaller + (#equal + 1) / 2.
    let ranks: Vec<f64> = mags
        .iter()
        .map(|m| {
            let less = mags.iter().filter(|x| *x < m).count() as f64;
            let equal = mags.iter().filter(|x| *x == m).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = ranks.iter().zip(&nz).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}
