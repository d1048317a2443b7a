//! Symmetric positive-definite matrices and their Cholesky factors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry below which inputs are silently symmetrized.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
}

/// Lower-triangular `F` with strictly positive diagonal and `F Fᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// Returns `(m + mᵀ)/2` when `m` is symmetric to within [`SYMMETRY_TOL`].
pub fn symmetrize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asymmetry = relative_asymmetry(m);
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Cholesky factorization of a symmetric matrix.
///
/// A pivot `≤ n·ε·max_diag` is reported as [`Error::NotPositiveDefinite`].
pub fn cholesky(m: &DMatrix<f64>) -> Result<CholeskyFactor> {
    let a = symmetrize(m)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::ShapeMismatch("empty matrix".into()));
    }
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    let threshold = n as f64 * f64::EPSILON * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: d,
                threshold,
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(CholeskyFactor { lower: l })
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let sym = symmetrize(&m)?;
        cholesky(&sym)?;
        Ok(Self { m: sym })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wraps a matrix known to be symmetric positive definite by construction.
    pub(crate) fn from_raw(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn from_factor(f: &CholeskyFactor) -> Self {
        Self { m: f.reconstruct() }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        cholesky(&self.m)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(self.cholesky()?.log_det())
    }
}

impl CholeskyFactor {
    /// Wraps a lower-triangular matrix with positive diagonal.
    pub fn from_lower(lower: DMatrix<f64>) -> Result<Self> {
        if !lower.is_square() {
            return Err(Error::ShapeMismatch("Cholesky factor must be square".into()));
        }
        let n = lower.nrows();
        for i in 0..n {
            if !(lower[(i, i)] > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    index: i,
                    pivot: lower[(i, i)],
                    threshold: 0.0,
                });
            }
            for j in (i + 1)..n {
                if lower[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument("factor is not lower triangular".into()));
                }
            }
        }
        Ok(Self { lower })
    }

    pub(crate) fn from_lower_unchecked(lower: DMatrix<f64>) -> Self {
        Self { lower }
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// `U = Fᵀ`, so that `UᵀU` is the factored matrix.
    pub fn upper(&self) -> DMatrix<f64> {
        self.lower.transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self
            .lower
            .solve_lower_triangular(b)
            .expect("positive diagonal");
        self.lower
            .tr_solve_lower_triangular(&y)
            .expect("positive diagonal")
    }

    /// Solves `A X = B`.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .lower
            .solve_lower_triangular(b)
            .expect("positive diagonal");
        self.lower
            .tr_solve_lower_triangular(&y)
            .expect("positive diagonal")
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve_mat(&DMatrix::identity(self.dim(), self.dim()))
    }

    /// `bᵀ A⁻¹ b`.
    pub fn quad_form_inv(&self, b: &DVector<f64>) -> f64 {
        let y = self
            .lower
            .solve_lower_triangular(b)
            .expect("positive diagonal");
        y.norm_squared()
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Relative Frobenius distance `‖a − b‖_F / ‖b‖_F`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm();
    let diff = (a - b).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}
