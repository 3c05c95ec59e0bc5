//! Complex matrix plumbing: Hermitian/density-matrix newtypes, norms, the
//! Hermitian eigensolver wrapper and the `[[[re, im], ...], ...]` JSON layout.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, TomoError};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for accepting a matrix as Hermitian before symmetrizing.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Trace tolerance of a density matrix.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue tolerated in a density matrix.
pub const PSD_TOL: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// `(M + M†) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise modulus of `M - M†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let (rows, cols) = m.shape();
    if rows != cols {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for i in 0..rows {
        for j in i..cols {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn real_trace(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

fn check_same_shape(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TomoError::invalid(format!(
            "dimension mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Squared Frobenius distance `‖A − B‖₂²`.
pub fn frobenius_error(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    check_same_shape(a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum())
}

/// Operator norm of a Hermitian matrix: the largest absolute eigenvalue.
pub fn operator_norm(a: &CMatrix) -> Result<f64> {
    let defect = hermiticity_defect(a);
    if defect > HERMITIAN_TOL * (1.0 + a.norm()) {
        return Err(TomoError::invalid(format!(
            "operator_norm expects a Hermitian matrix (defect {defect:.3e})"
        )));
    }
    let (values, _) = hermitian_eigen(a)?;
    Ok(values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Eigenvalues and eigenvectors (as columns) of the Hermitian part of `m`, in
/// eigensolver order.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(TomoError::invalid("eigendecomposition needs a square matrix"));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(TomoError::NumericalFailure(
            "matrix has non-finite entries".into(),
        ));
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| TomoError::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// `Σ λᵢ |vᵢ⟩⟨vᵢ|` over the given eigenpairs.
pub fn from_eigenpairs(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let d = vectors.nrows();
    let mut out = CMatrix::zeros(d, d);
    for (i, &lambda) in values.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        let v = vectors.column(i);
        for c in 0..d {
            let w = v[c].conj() * lambda;
            for r in 0..d {
                out[(r, c)] += v[r] * w;
            }
        }
    }
    out
}

/// A Hermitian matrix with no trace or positivity constraint (least-squares
/// output and its post-processed relatives).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEstimate(CMatrix);

impl HermitianEstimate {
    /// Accepts `m` if it is Hermitian within tolerance and stores `(M + M†)/2`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(TomoError::invalid(format!(
                "expected a square matrix, got {:?}",
                m.shape()
            )));
        }
        let defect = hermiticity_defect(&m);
        if !(defect <= HERMITIAN_TOL * (1.0 + m.norm())) {
            return Err(TomoError::invalid(format!(
                "matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(Self(symmetrize(&m)))
    }

    pub(crate) fn from_hermitian(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        real_trace(&self.0)
    }
}

/// A quantum state: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianEstimate::new(m)?;
        Self::try_from(h)
    }

    /// `I/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        Self(CMatrix::identity(d, d).unscale(d as f64))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(TomoError::invalid("pure state needs a nonzero finite vector"));
        }
        let d = psi.len();
        let m = CMatrix::from_fn(d, d, |r, c| psi[r] * psi[c].conj() / norm_sq);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn as_estimate(&self) -> HermitianEstimate {
        HermitianEstimate(self.0.clone())
    }
}

impl TryFrom<HermitianEstimate> for DensityMatrix {
    type Error = TomoError;

    fn try_from(h: HermitianEstimate) -> Result<Self> {
        let trace = h.trace();
        if (trace - 1.0).abs() > TRACE_TOL * h.dim().max(1) as f64 {
            return Err(TomoError::invalid(format!(
                "density matrix must have unit trace, got {trace}"
            )));
        }
        let (values, _) = hermitian_eigen(h.matrix())?;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(TomoError::invalid(format!(
                "density matrix must be positive semidefinite, smallest eigenvalue {min:.3e}"
            )));
        }
        Ok(Self(h.0))
    }
}

/// Row-major `[[[re, im], ...], ...]` representation used by every matrix file.
pub fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let d = rows.len();
    if d == 0 {
        return Err(TomoError::Parse("matrix has no rows".into()));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(TomoError::Parse(format!(
            "matrix row {i} has {} entries, expected {d}",
            row.len()
        )));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(TomoError::Parse("matrix has non-finite entries".into()));
    }
    Ok(CMatrix::from_fn(d, d, |r, c| {
        Complex64::new(rows[r][c][0], rows[r][c][1])
    }))
}
