//! Procrustes rotation on the orthogonal group.
//!
//! Minimizes `J(R) = Σ_k δ²(T_k, R S_k Rᵀ)` by Riemannian quasi-Newton descent
//! with a QR retraction and Armijo backtracking, restarted from the identity, a
//! spectral guess and a few random orthogonal matrices.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::RpaConfig;
use crate::error::{Error, Result};
use crate::spd::{log_frechet, log_norm_sq, symmetrize, Label, MatrixFunction, SpdMatrix, SymEigen};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e4;
const NONMONOTONE_WINDOW: usize = 10;
/// Relative objective change treated as roundoff by the line search.
const ROUNDOFF: f64 = 1e-9;

/// Result of the multi-start rotation search.
#[derive(Debug, Clone)]
pub struct RotationFit {
    pub rotation: DMatrix<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    /// 0 is the identity start, 1 the spectral start, `i > 1` the
    /// `(i - 1)`-th random start.
    pub start: usize,
    /// Objective reached from each start, in start order.
    pub start_objectives: Vec<f64>,
}

/// Outcome of one descent run.
#[derive(Debug, Clone)]
pub struct DescentRun {
    pub rotation: DMatrix<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The objective `J` for a fixed set of class-mean pairs.
#[derive(Debug, Clone)]
pub struct RotationObjective {
    /// `(S_k, T_k^{-1/2})` per class.
    terms: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    dim: usize,
}

impl RotationObjective {
    pub fn new(source_means: &BTreeMap<Label, SpdMatrix>, target_means: &BTreeMap<Label, SpdMatrix>) -> Result<Self> {
        if source_means.is_empty() {
            return Err(Error::input("no class means to align"));
        }
        if !source_means.keys().eq(target_means.keys()) {
            return Err(Error::input(format!(
                "source labels {:?} differ from target labels {:?}",
                source_means.keys().collect::<Vec<_>>(),
                target_means.keys().collect::<Vec<_>>()
            )));
        }
        let dim = source_means.values().next().map(SpdMatrix::dim).unwrap_or(0);
        let mut terms = Vec::with_capacity(source_means.len());
        for (label, s) in source_means {
            let t = &target_means[label];
            if s.dim() != dim || t.dim() != dim {
                return Err(Error::input("class means have inconsistent dimensions"));
            }
            terms.push((s.matrix().clone(), t.inv_sqrt()?.clone()));
        }
        Ok(RotationObjective { terms, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, r: &DMatrix<f64>) -> f64 {
        let rt = r.transpose();
        self.terms
            .iter()
            .map(|(s, w)| log_norm_sq(&(w * (r * s * &rt) * w)))
            .sum()
    }

    /// Objective and Euclidean gradient with respect to `R`.
    ///
    /// For one class, with `X = W R S Rᵀ W`, the gradient of `‖log X‖²_F` with
    /// respect to `B = R S Rᵀ` is `G = 2 W Dlog_X[log X] W`, and with respect to
    /// `R` it is `2 G R S`.
    pub fn value_and_gradient(&self, r: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let eval = self.evaluate(r)?;
        Ok((eval.value, self.gradient(&eval)))
    }

    /// Objective at `r`, keeping what the gradient needs.
    fn evaluate(&self, r: &DMatrix<f64>) -> Result<Evaluation> {
        let rt = r.transpose();
        let mut value = 0.0;
        let mut parts = Vec::with_capacity(self.terms.len());
        for (s, w) in &self.terms {
            let rs = r * s;
            let eig = SymEigen::new(&symmetrize(&(w * (&rs * &rt) * w)))?;
            let log_x = eig.apply(MatrixFunction::Log)?;
            value += log_x.norm_squared();
            parts.push((eig, log_x, rs));
        }
        Ok(Evaluation { value, parts })
    }

    fn gradient(&self, eval: &Evaluation) -> DMatrix<f64> {
        let mut grad = DMatrix::zeros(self.dim, self.dim);
        for ((_, w), (eig, log_x, rs)) in self.terms.iter().zip(&eval.parts) {
            let g = w * log_frechet(eig, log_x) * w * 2.0;
            grad += g * rs * 2.0;
        }
        grad
    }
}

/// Objective value with the per-class eigendecompositions and `R S_k` it came from.
struct Evaluation {
    value: f64,
    parts: Vec<(SymEigen, DMatrix<f64>, DMatrix<f64>)>,
}

/// Projection of a Euclidean gradient onto the tangent space of O(n) at `r`:
/// `R skew(Rᵀ G)`.
pub fn riemannian_gradient(r: &DMatrix<f64>, egrad: &DMatrix<f64>) -> DMatrix<f64> {
    let a = r.transpose() * egrad;
    let skew = (&a - a.transpose()) * 0.5;
    r * skew
}

/// QR retraction `qf(R + ξ)`, with the sign convention `diag(R factor) > 0`.
pub fn retract(r: &DMatrix<f64>, xi: &DMatrix<f64>) -> DMatrix<f64> {
    q_factor(r + xi)
}

fn q_factor(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    let qr = m.qr();
    let upper = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if upper[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random orthogonal matrix from the QR factor of a standard-normal matrix,
/// reflected if needed so that its determinant has the requested sign.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize, positive_det: bool) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = q_factor(g);
    if (q.determinant() > 0.0) != positive_det {
        q.column_mut(0).neg_mut();
    }
    q
}

/// Cap on the curvature pairs kept by the quasi-Newton direction; below it the
/// memory matches the dimension of the group.
const MAX_MEMORY: usize = 64;

/// Riemannian gradient in left-trivialized form: the skew matrix `Ω` with
/// `grad = R Ω`.
fn gradient_generator(r: &DMatrix<f64>, egrad: &DMatrix<f64>) -> DMatrix<f64> {
    let a = r.transpose() * egrad;
    (&a - a.transpose()) * 0.5
}

/// Limited-memory BFGS direction `−H grad` in generator coordinates, or `None`
/// without curvature pairs.
fn lbfgs_direction(grad: &DMatrix<f64>, pairs: &VecDeque<(DMatrix<f64>, DMatrix<f64>)>) -> Option<DMatrix<f64>> {
    let (s_last, y_last) = pairs.back()?;
    let mut q = grad.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / s.dot(y);
        let alpha = rho * s.dot(&q);
        q -= y * alpha;
        alphas.push((rho, alpha));
    }
    let mut r = q * (s_last.dot(y_last) / y_last.norm_squared());
    for ((s, y), (rho, alpha)) in pairs.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * y.dot(&r);
        r += s * (alpha - beta);
    }
    Some(-r)
}

/// Quasi-Newton descent from `start` until the Riemannian gradient norm drops
/// below `tol` or `max_iter` steps are taken.
///
/// Tangent vectors at `R` are handled as `R Ω` with `Ω` skew, so curvature pairs
/// from earlier iterates are reused by left translation. Directions come from
/// limited-memory BFGS; without usable pairs the step is along the negative
/// gradient with a Barzilai-Borwein length. The Armijo test is taken against the
/// largest of the last few objective values, and the lowest-objective iterate
/// visited is returned.
pub fn descend(objective: &RotationObjective, start: DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DescentRun> {
    let mut r = start;
    let (mut f, egrad) = objective.value_and_gradient(&r)?;
    let mut grad = gradient_generator(&r, &egrad);
    let n = r.nrows();
    let memory = (n * n.saturating_sub(1) / 2).clamp(1, MAX_MEMORY);
    let mut gradient_step: f64 = 1.0;
    let mut pairs: VecDeque<(DMatrix<f64>, DMatrix<f64>)> = VecDeque::with_capacity(memory);
    let mut recent = VecDeque::from([f]);
    let mut best: Option<(DMatrix<f64>, f64, f64)> = None;
    let mut iterations = 0;
    loop {
        let grad_norm = grad.norm();
        if !grad_norm.is_finite() || !f.is_finite() {
            return Err(Error::numerical("rotation objective became non-finite"));
        }
        // Iterates within roundoff of the best are interchangeable; prefer the later
        // one so a run that reaches the tolerance reports it.
        if best.as_ref().is_none_or(|(_, bf, _)| f <= *bf + ROUNDOFF * bf.abs()) {
            best = Some((r.clone(), f, grad_norm));
        }
        if grad_norm < tol || iterations >= max_iter {
            break;
        }
        let quasi_newton = lbfgs_direction(&grad, &pairs).filter(|d| -grad.dot(d) > 1e-10 * grad_norm * d.norm());
        let (direction, mut t) = match quasi_newton {
            Some(d) => (d, 1.0),
            None => {
                pairs.clear();
                (-&grad, gradient_step.clamp(MIN_STEP, MAX_STEP))
            }
        };
        let slope = -grad.dot(&direction);
        let reference = recent.iter().cloned().fold(f, f64::max);
        let roundoff = ROUNDOFF * f.abs().max(f64::MIN_POSITIVE);
        let step = &r * &direction;
        let accepted = loop {
            let candidate = retract(&r, &(&step * t));
            let eval = objective.evaluate(&candidate)?;
            let fc = eval.value;
            if fc <= reference - ARMIJO * t * slope {
                let grad_c = gradient_generator(&candidate, &objective.gradient(&eval));
                break Some((candidate, fc, grad_c));
            }
            if (fc - f).abs() <= roundoff {
                // The decrease is below what the objective resolves; use the
                // derivative form of the Armijo test along the step instead.
                let grad_c = gradient_generator(&candidate, &objective.gradient(&eval));
                if grad_c.dot(&direction) <= -(1.0 - 2.0 * ARMIJO) * slope {
                    break Some((candidate, fc, grad_c));
                }
            }
            t *= 0.5;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some((next, f_next, grad_next)) = accepted else {
            if pairs.is_empty() {
                // No decrease possible at working precision.
                break;
            }
            pairs.clear();
            continue;
        };
        let s = &direction * t;
        let y = &grad_next - &grad;
        let sy = s.dot(&y);
        gradient_step = if sy > 0.0 { s.norm_squared() / sy } else { 2.0 * t };
        if sy > 1e-12 * s.norm() * y.norm() {
            if pairs.len() == memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y));
        }
        r = next;
        f = f_next;
        grad = grad_next;
        if recent.len() == NONMONOTONE_WINDOW {
            recent.pop_front();
        }
        recent.push_back(f);
        iterations += 1;
    }
    // The nonmonotone search may end above its best point; report the best.
    let (rotation, objective, grad_norm) = best.expect("start point is recorded");
    Ok(DescentRun {
        rotation,
        objective,
        grad_norm,
        iterations,
        converged: grad_norm < tol,
    })
}

/// Rotation that maps the eigenbasis of a source summary matrix onto the target
/// one, with eigenvector signs chosen to match the remaining structure.
///
/// Summaries tried are a weighted contrast of the class log-means and each class
/// log-mean on its own; the candidate with the lowest objective is returned.
/// When `S_k = Qᵀ T_k Q` exactly and a summary has distinct eigenvalues this
/// recovers a minimizer directly; otherwise it is only a starting point.
pub fn spectral_start(
    source_means: &BTreeMap<Label, SpdMatrix>,
    target_means: &BTreeMap<Label, SpdMatrix>,
) -> Result<DMatrix<f64>> {
    let objective = RotationObjective::new(source_means, target_means)?;
    let logs = |means: &BTreeMap<Label, SpdMatrix>| -> Result<Vec<DMatrix<f64>>> {
        means.values().map(|m| m.map(MatrixFunction::Log)).collect()
    };
    let source_logs = logs(source_means)?;
    let target_logs = logs(target_means)?;
    let k = source_logs.len();
    let n = objective.dim();

    let mut weightings: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    if k > 1 {
        weightings.push((0..k).map(|i| i as f64 - (k - 1) as f64 / 2.0).collect());
    }
    for i in 0..k {
        weightings.push((0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect());
    }

    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for weights in &weightings {
        let summary = |logs: &[DMatrix<f64>]| {
            logs.iter()
                .zip(weights)
                .fold(DMatrix::zeros(n, n), |acc, (l, w)| acc + l * *w)
        };
        let u = SymEigen::new(&summary(&source_logs))?.vectors;
        let v = SymEigen::new(&summary(&target_logs))?.vectors;
        let candidate = match_bases(&u, v, &source_logs, &target_logs);
        let value = objective.value(&candidate);
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, candidate));
        }
    }
    Ok(best.expect("at least one class").1)
}

/// Signs with `d_i d_j = sign(C_ij)` along a maximum spanning tree of `|C|`
/// (Prim's algorithm from index 0). Under an exact alignment every entry has
/// `sign(C_ij) = d_i d_j`, so the tree recovers the signs even where the
/// couplings are tiny.
fn tree_signs(c: &DMatrix<f64>) -> Vec<f64> {
    let n = c.nrows();
    let mut signs = vec![1.0; n];
    let mut in_tree = vec![false; n];
    // Strongest link from the tree to each outside index: (weight, tree index).
    let mut link: Vec<(f64, usize)> = vec![(f64::NEG_INFINITY, 0); n];
    in_tree[0] = true;
    for j in 1..n {
        link[j] = (c[(0, j)].abs(), 0);
    }
    for _ in 1..n {
        let Some(j) = (0..n)
            .filter(|&j| !in_tree[j])
            .max_by(|&a, &b| link[a].0.total_cmp(&link[b].0).then(b.cmp(&a)))
        else {
            break;
        };
        let parent = link[j].1;
        signs[j] = if c[(parent, j)] < 0.0 {
            -signs[parent]
        } else {
            signs[parent]
        };
        in_tree[j] = true;
        for k in 0..n {
            if !in_tree[k] && c[(j, k)].abs() > link[k].0 {
                link[k] = (c[(j, k)].abs(), j);
            }
        }
    }
    signs
}

/// `V D Uᵀ` with signs `D` maximizing `Σ_ij d_i d_j C_ij`, where
/// `C = Σ_k (Uᵀ log S_k U) ∘ (Vᵀ log T_k V)`: spanning-tree signs polished by
/// greedy single flips.
fn match_bases(
    u: &DMatrix<f64>,
    mut v: DMatrix<f64>,
    source_logs: &[DMatrix<f64>],
    target_logs: &[DMatrix<f64>],
) -> DMatrix<f64> {
    let n = u.nrows();
    let mut c = DMatrix::zeros(n, n);
    for (ls, lt) in source_logs.iter().zip(target_logs) {
        c += (u.transpose() * ls * u).component_mul(&(v.transpose() * lt * &v));
    }
    let slack = 1e-12 * c.norm();
    let mut signs = tree_signs(&c);
    loop {
        let mut flipped = false;
        for i in 0..n {
            let coupling: f64 = (0..n).filter(|&j| j != i).map(|j| c[(i, j)] * signs[j]).sum();
            if signs[i] * coupling < -slack {
                signs[i] = -signs[i];
                flipped = true;
            }
        }
        if !flipped {
            break;
        }
    }
    for (j, sign) in signs.iter().enumerate() {
        if *sign < 0.0 {
            v.column_mut(j).neg_mut();
        }
    }
    v * u.transpose()
}

/// Rotation `R` minimizing `Σ_k δ²(T_k, R S_k Rᵀ)` over the orthogonal group.
///
/// Runs from the identity, from [`spectral_start`], and from
/// `cfg.rotation_restarts` random orthogonal matrices (alternating determinant
/// sign, seeded by `cfg.seed`) and keeps the lowest objective, ties to the
/// earliest start. Fails only if no start reaches the gradient tolerance.
pub fn find_rotation(
    source_means: &BTreeMap<Label, SpdMatrix>,
    target_means: &BTreeMap<Label, SpdMatrix>,
    cfg: &RpaConfig,
) -> Result<RotationFit> {
    cfg.validate()?;
    let objective = RotationObjective::new(source_means, target_means)?;
    let n = objective.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![DMatrix::identity(n, n), spectral_start(source_means, target_means)?];
    for i in 0..cfg.rotation_restarts {
        starts.push(random_orthogonal(&mut rng, n, i % 2 == 1));
    }

    let mut best: Option<(usize, DescentRun)> = None;
    let mut any_converged = false;
    let mut start_objectives = Vec::with_capacity(starts.len());
    for (i, start) in starts.into_iter().enumerate() {
        let run = descend(&objective, start, cfg.rotation_tol, cfg.rotation_max_iter)?;
        any_converged |= run.converged;
        start_objectives.push(run.objective);
        if best.as_ref().is_none_or(|(_, b)| run.objective < b.objective) {
            best = Some((i, run));
        }
    }
    let (start, run) = best.expect("at least the identity start");
    if !any_converged {
        return Err(Error::RotationNotConverged {
            objective: run.objective,
            grad_norm: run.grad_norm,
            best: Box::new(run.rotation),
        });
    }
    Ok(RotationFit {
        rotation: run.rotation,
        objective: run.objective,
        grad_norm: run.grad_norm,
        start,
        start_objectives,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::spd::testutil::*;

    fn means(pairs: Vec<(Label, SpdMatrix)>) -> BTreeMap<Label, SpdMatrix> {
        pairs.into_iter().collect()
    }

    fn planted(seed: u64, n: usize) -> (BTreeMap<Label, SpdMatrix>, BTreeMap<Label, SpdMatrix>, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = random_spd(&mut rng, n, 0.8);
        let t2 = random_spd(&mut rng, n, 0.8);
        let q = orthogonal(&mut rng, n);
        let qt = q.transpose();
        let target = means(vec![(1, t1.clone()), (2, t2.clone())]);
        let source = means(vec![(1, t1.congruence(&qt).unwrap()), (2, t2.congruence(&qt).unwrap())]);
        (source, target, q)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (source, target, _) = planted(1, 4);
        let obj = RotationObjective::new(&source, &target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = orthogonal(&mut rng, 4);
        let (_, egrad) = obj.value_and_gradient(&r).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            for j in 0..4 {
                let mut plus = r.clone();
                plus[(i, j)] += h;
                let mut minus = r.clone();
                minus[(i, j)] -= h;
                let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
                assert_relative_eq!(egrad[(i, j)], fd, epsilon = 1e-6, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn riemannian_gradient_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = orthogonal(&mut rng, 5);
        let g = gaussian(&mut rng, 5, 5);
        let xi = riemannian_gradient(&r, &g);
        // Tangent vectors at R satisfy Rᵀξ + ξᵀR = 0.
        let s = r.transpose() * &xi + xi.transpose() * &r;
        assert!(s.norm() < 1e-12);
        let moved = retract(&r, &(xi * 0.1));
        assert!((moved.transpose() * &moved - DMatrix::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn identical_means_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = means(vec![
            (1, random_spd(&mut rng, 4, 1.0)),
            (2, random_spd(&mut rng, 4, 1.0)),
        ]);
        let fit = find_rotation(&m, &m, &RpaConfig::default()).unwrap();
        assert!(fit.objective <= 1e-10);
        assert_eq!(fit.start, 0);
        assert!((&fit.rotation - DMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn planted_rotation_is_recovered() {
        for seed in 10..15 {
            let (source, target, _) = planted(seed, 6);
            let fit = find_rotation(&source, &target, &RpaConfig::default()).unwrap();
            assert!(fit.objective <= 1e-6, "seed {seed}: objective {}", fit.objective);
            let r = &fit.rotation;
            assert!((r.transpose() * r - DMatrix::identity(6, 6)).norm() <= 1e-10);
            let obj = RotationObjective::new(&source, &target).unwrap();
            assert!(fit.objective <= obj.value(&DMatrix::identity(6, 6)));
            let best_start = fit.start_objectives.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(fit.objective, best_start);
        }
    }

    #[test]
    fn spectral_start_solves_exact_alignment() {
        for seed in 20..25 {
            let (source, target, _) = planted(seed, 9);
            let obj = RotationObjective::new(&source, &target).unwrap();
            let r = spectral_start(&source, &target).unwrap();
            assert!((r.transpose() * &r - DMatrix::identity(9, 9)).norm() <= 1e-10);
            assert!(obj.value(&r) <= 1e-12, "seed {seed}: {}", obj.value(&r));
        }
    }

    #[test]
    fn descent_from_random_start_reaches_stationary_point() {
        let (source, target, _) = planted(8, 5);
        let obj = RotationObjective::new(&source, &target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start = orthogonal(&mut rng, 5);
        let f0 = obj.value(&start);
        let run = descend(&obj, start, 1e-8, 2000).unwrap();
        assert!(run.converged, "grad norm {}", run.grad_norm);
        assert!(run.objective <= f0);
        assert_relative_eq!(run.objective, obj.value(&run.rotation), epsilon = 1e-12);
    }

    #[test]
    fn restarts_cover_both_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(random_orthogonal(&mut rng, 4, true).determinant() > 0.0);
        assert!(random_orthogonal(&mut rng, 4, false).determinant() < 0.0);
    }

    #[test]
    fn non_convergence_reports_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let source = means(vec![
            (1, random_spd(&mut rng, 5, 1.0)),
            (2, random_spd(&mut rng, 5, 1.0)),
        ]);
        let target = means(vec![
            (1, random_spd(&mut rng, 5, 1.0)),
            (2, random_spd(&mut rng, 5, 1.0)),
        ]);
        let cfg = RpaConfig {
            rotation_max_iter: 1,
            rotation_restarts: 1,
            ..RpaConfig::default()
        };
        match find_rotation(&source, &target, &cfg) {
            Err(Error::RotationNotConverged { best, objective, .. }) => {
                assert_eq!(best.nrows(), 5);
                assert!(objective.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = means(vec![
            (1, random_spd(&mut rng, 3, 1.0)),
            (2, random_spd(&mut rng, 3, 1.0)),
        ]);
        let b = means(vec![
            (1, random_spd(&mut rng, 3, 1.0)),
            (3, random_spd(&mut rng, 3, 1.0)),
        ]);
        assert!(find_rotation(&a, &b, &RpaConfig::default()).is_err());
    }
}
