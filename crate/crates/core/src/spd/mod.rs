//! Geometry of symmetric positive definite matrices under the affine-invariant metric.
//!
//! Every matrix function here goes through one symmetric eigendecomposition,
//! `C = U diag(λ) Uᵀ`, followed by `U diag(f(λ)) Uᵀ`. Eigenvalues are floored at
//! `1e-14 · trace` before logarithms and negative powers so that borderline
//! positive definite inputs stay finite.

mod covariance;
mod mean;

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub use covariance::{trial_covariance, CovarianceConfig};
pub use mean::{class_means, dispersion, karcher_mean, KarcherConfig};

/// Relative asymmetry accepted by [`SpdMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalue floor, relative to the trace, applied before `log` and negative powers.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Scalar function applied to the spectrum of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFunction {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
    Power(f64),
}

impl MatrixFunction {
    fn needs_floor(self) -> bool {
        match self {
            MatrixFunction::Log | MatrixFunction::InvSqrt => true,
            MatrixFunction::Power(p) => p < 0.0,
            MatrixFunction::Exp | MatrixFunction::Sqrt => false,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            MatrixFunction::Log => x.ln(),
            MatrixFunction::Exp => x.exp(),
            MatrixFunction::Sqrt => x.sqrt(),
            MatrixFunction::InvSqrt => 1.0 / x.sqrt(),
            MatrixFunction::Power(p) => x.powf(p),
        }
    }

    fn requires_positive(self) -> bool {
        !matches!(self, MatrixFunction::Exp)
    }
}

/// Symmetric eigendecomposition `U diag(values) Uᵀ`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::input(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("matrix has non-finite entries"));
        }
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::numerical("symmetric eigensolver did not converge"))?;
        let mut order: Vec<usize> = (0..m.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        Ok(SymEigen {
            values: DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i])),
            vectors: eig.eigenvectors.select_columns(&order),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U diag(f(λ)) Uᵀ`, symmetrized exactly.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        let out = scaled * self.vectors.transpose();
        symmetrize(&out)
    }

    fn floor(&self) -> f64 {
        EIGEN_FLOOR * self.values.iter().sum::<f64>().abs()
    }

    /// Applies `func` to the spectrum, honouring the eigenvalue floor.
    ///
    /// Spectra that are clearly indefinite (smallest eigenvalue below `-1e-8 · trace`)
    /// are rejected for every function except `exp`.
    pub fn apply(&self, func: MatrixFunction) -> Result<DMatrix<f64>> {
        if func.requires_positive() {
            let trace: f64 = self.values.iter().sum();
            let min = self.values.min();
            if trace <= 0.0 || min < -1e-8 * trace {
                return Err(Error::input(format!(
                    "{func:?} requires positive eigenvalues, smallest is {min:e}"
                )));
            }
            let floor = if func.needs_floor() { self.floor() } else { 0.0 };
            Ok(self.map(|x| func.apply(x.max(floor))))
        } else {
            Ok(self.map(|x| func.apply(x)))
        }
    }
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            m[(i, i)]
        } else {
            0.5 * (m[(i, j)] + m[(j, i)])
        }
    })
}

/// Largest `|A[i][j] - A[j][i]|` relative to `max |A|`.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Applies a matrix function to any symmetric matrix (e.g. `exp` of a tangent vector).
pub fn sym_map(m: &DMatrix<f64>, func: MatrixFunction) -> Result<DMatrix<f64>> {
    SymEigen::new(&symmetrize(m))?.apply(func)
}

#[derive(Debug)]
struct Roots {
    eigen: SymEigen,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

/// A symmetric positive definite matrix.
///
/// Immutable once built. The eigendecomposition and the square-root factors are
/// computed on first use and shared by clones.
#[derive(Clone)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    roots: OnceLock<Arc<Roots>>,
}

impl SpdMatrix {
    /// Validates an externally supplied matrix: square, finite, symmetric within
    /// [`SYMMETRY_TOL`] relative, positive definite.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&mat)?;
        let asym = relative_asymmetry(&mat);
        if asym > SYMMETRY_TOL {
            return Err(Error::input(format!(
                "matrix is not symmetric (relative asymmetry {asym:.3e})"
            )));
        }
        Self::from_symmetrized(mat)
    }

    /// Symmetrizes `(A + Aᵀ)/2` and checks positive definiteness. Used for results
    /// of internal arithmetic whose asymmetry is pure round-off.
    pub fn from_symmetrized(mat: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&mat)?;
        let mat = symmetrize(&mat);
        if mat.nrows() == 0 {
            return Err(Error::input("empty matrix"));
        }
        if mat.clone().cholesky().is_none() {
            return Err(Error::input("matrix is not positive definite"));
        }
        Ok(SpdMatrix {
            mat,
            roots: OnceLock::new(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            mat: DMatrix::identity(dim, dim),
            roots: OnceLock::new(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    fn roots(&self) -> Result<&Roots> {
        if let Some(r) = self.roots.get() {
            return Ok(r);
        }
        let eigen = SymEigen::new(&self.mat)?;
        let sqrt = eigen.apply(MatrixFunction::Sqrt)?;
        let inv_sqrt = eigen.apply(MatrixFunction::InvSqrt)?;
        let roots = Arc::new(Roots { eigen, sqrt, inv_sqrt });
        Ok(self.roots.get_or_init(|| roots))
    }

    pub fn eigen(&self) -> Result<&SymEigen> {
        Ok(&self.roots()?.eigen)
    }

    /// `C^{1/2}`.
    pub fn sqrt(&self) -> Result<&DMatrix<f64>> {
        Ok(&self.roots()?.sqrt)
    }

    /// `C^{-1/2}`.
    pub fn inv_sqrt(&self) -> Result<&DMatrix<f64>> {
        Ok(&self.roots()?.inv_sqrt)
    }

    pub fn map(&self, func: MatrixFunction) -> Result<DMatrix<f64>> {
        match func {
            MatrixFunction::Sqrt => self.sqrt().cloned(),
            MatrixFunction::InvSqrt => self.inv_sqrt().cloned(),
            _ => self.eigen()?.apply(func),
        }
    }

    /// `A C Aᵀ`.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<SpdMatrix> {
        if a.ncols() != self.dim() {
            return Err(dim_mismatch(a.ncols(), self.dim()));
        }
        SpdMatrix::from_symmetrized(a * &self.mat * a.transpose())
    }

    /// `W C W` for a symmetric `W`, e.g. a whitener `M^{-1/2}`.
    pub fn whiten(&self, w: &DMatrix<f64>) -> Result<SpdMatrix> {
        if w.nrows() != self.dim() {
            return Err(dim_mismatch(w.nrows(), self.dim()));
        }
        SpdMatrix::from_symmetrized(w * &self.mat * w)
    }

    pub fn frobenius_distance(&self, other: &SpdMatrix) -> f64 {
        (&self.mat - &other.mat).norm()
    }
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpdMatrix").field("mat", &self.mat).finish()
    }
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::input(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    Ok(())
}

pub(crate) fn dim_mismatch(a: usize, b: usize) -> Error {
    Error::input(format!("dimension mismatch: {a} vs {b}"))
}

/// Class label of a trial.
pub type Label = i32;

/// One labeled covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub cov: SpdMatrix,
    pub label: Label,
}

impl Trial {
    pub fn new(cov: SpdMatrix, label: Label) -> Self {
        Trial { cov, label }
    }
}

/// `U f(Λ) Uᵀ` of the eigendecomposition of `c`.
pub fn spd_map(c: &SpdMatrix, func: MatrixFunction) -> Result<DMatrix<f64>> {
    c.map(func)
}

/// Squared affine-invariant distance `‖log(C1^{-1/2} C2 C1^{-1/2})‖²_F`.
pub fn airm_distance_sq(c1: &SpdMatrix, c2: &SpdMatrix) -> Result<f64> {
    if c1.dim() != c2.dim() {
        return Err(dim_mismatch(c1.dim(), c2.dim()));
    }
    let w = c1.inv_sqrt()?;
    Ok(log_norm_sq(&(w * c2.matrix() * w)))
}

/// Affine-invariant Riemannian distance.
pub fn airm_distance(c1: &SpdMatrix, c2: &SpdMatrix) -> Result<f64> {
    airm_distance_sq(c1, c2).map(f64::sqrt)
}

/// `Σ log²(λ_i)` over the spectrum of a positive definite `x`.
pub(crate) fn log_norm_sq(x: &DMatrix<f64>) -> f64 {
    let x = symmetrize(x);
    let values = x.symmetric_eigenvalues();
    let floor = EIGEN_FLOOR * values.iter().sum::<f64>().abs();
    values.iter().map(|&l| l.max(floor).ln().powi(2)).sum()
}

/// Point at parameter `t` on the geodesic from `c1` (t = 0) to `c2` (t = 1).
pub fn geodesic(c1: &SpdMatrix, c2: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if c1.dim() != c2.dim() {
        return Err(dim_mismatch(c1.dim(), c2.dim()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::input(format!("geodesic parameter {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(c1.clone());
    }
    if t == 1.0 {
        return Ok(c2.clone());
    }
    let (s, w) = (c1.sqrt()?, c1.inv_sqrt()?);
    let inner = sym_map(&(w * c2.matrix() * w), MatrixFunction::Power(t))?;
    SpdMatrix::from_symmetrized(s * inner * s)
}

/// Fréchet derivative of the matrix logarithm at `X = U diag(λ) Uᵀ` in direction `E`,
/// `U (Γ ∘ (Uᵀ E U)) Uᵀ` with `Γ_ij` the divided differences of `log` over the spectrum.
pub fn log_frechet(eig: &SymEigen, e: &DMatrix<f64>) -> DMatrix<f64> {
    let u = &eig.vectors;
    let lam = &eig.values;
    let n = eig.dim();
    let floor = EIGEN_FLOOR * lam.iter().sum::<f64>().abs();
    let lam: Vec<f64> = lam.iter().map(|&l| l.max(floor)).collect();
    let mut inner = u.transpose() * e * u;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (lam[i], lam[j]);
            let gamma = if (a - b).abs() <= 1e-6 * a.max(b) {
                // logarithmic mean of nearly equal values
                2.0 / (a + b)
            } else {
                (a.ln() - b.ln()) / (a - b)
            };
            inner[(i, j)] *= gamma;
        }
    }
    u * inner * u.transpose()
}

/// A symmetric matrix attached to a base point of the manifold.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: SpdMatrix,
    entries: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: SpdMatrix, entries: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&entries)?;
        if entries.nrows() != base.dim() {
            return Err(dim_mismatch(entries.nrows(), base.dim()));
        }
        if relative_asymmetry(&entries) > SYMMETRY_TOL {
            return Err(Error::input("tangent vector is not symmetric"));
        }
        Ok(TangentVector {
            base,
            entries: symmetrize(&entries),
        })
    }

    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Norm under the metric at the base point, `‖B^{-1/2} V B^{-1/2}‖_F`.
    pub fn norm(&self) -> Result<f64> {
        let w = self.base.inv_sqrt()?;
        Ok((w * &self.entries * w).norm())
    }
}

/// Riemannian logarithm: the tangent vector at `base` pointing to `c`.
pub fn log_map(base: &SpdMatrix, c: &SpdMatrix) -> Result<TangentVector> {
    if base.dim() != c.dim() {
        return Err(dim_mismatch(base.dim(), c.dim()));
    }
    let (s, w) = (base.sqrt()?, base.inv_sqrt()?);
    let inner = sym_map(&(w * c.matrix() * w), MatrixFunction::Log)?;
    Ok(TangentVector {
        base: base.clone(),
        entries: symmetrize(&(s * inner * s)),
    })
}

/// Riemannian exponential `B^{1/2} exp(B^{-1/2} V B^{-1/2}) B^{1/2}`.
pub fn exp_map(v: &TangentVector) -> Result<SpdMatrix> {
    let (s, w) = (v.base.sqrt()?, v.base.inv_sqrt()?);
    let inner = sym_map(&(w * &v.entries * w), MatrixFunction::Exp)?;
    SpdMatrix::from_symmetrized(s * inner * s)
}
