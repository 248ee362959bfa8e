//! Dense complex linear algebra helpers built on `nalgebra`.
//!
//! Vectorization follows the column-major `vec(·)` convention throughout, which
//! is also nalgebra's storage order, so `vec` and `unvec` are plain copies.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const J: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square() && (a - a.adjoint()).norm() <= tol * a.norm().max(1.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if a.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Domain("matrix has non-finite entries".into()));
        }
        let eig = SymmetricEigen::new(hermitian_part(a));
        let n = a.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
        Ok(Self { values, vectors })
    }

    /// `V f(Λ) Vᴴ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    fn check_pd(&self) -> Result<()> {
        let n = self.values.len();
        if n == 0 {
            return Ok(());
        }
        let max = self.values[n - 1];
        let min = self.values[0];
        if !(min > 0.0) || min <= max * 1e-14 {
            return Err(Error::NotPositiveDefinite(format!(
                "eigenvalues in [{min:e}, {max:e}]"
            )));
        }
        Ok(())
    }
}

/// Hermitian positive-definite square root `S` with `S·S = Σ`.
pub fn hermitian_sqrt(sigma: &CMatrix) -> Result<CMatrix> {
    let eig = HermitianEigen::new(sigma)?;
    eig.check_pd()?;
    Ok(hermitian_part(&eig.apply(f64::sqrt)))
}

/// `Σ^{-1/2}`, the Hermitian inverse square root.
pub fn hermitian_inv_sqrt(sigma: &CMatrix) -> Result<CMatrix> {
    let eig = HermitianEigen::new(sigma)?;
    eig.check_pd()?;
    Ok(hermitian_part(&eig.apply(|x| 1.0 / x.sqrt())))
}

/// Inverse of a Hermitian positive-definite matrix, symmetrized before the
/// Cholesky factorization.
pub fn hermitian_inverse(a: &CMatrix) -> Result<CMatrix> {
    let sym = hermitian_part(a);
    let chol = Cholesky::new(sym)
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(hermitian_part(&chol.inverse()))
}

/// Solve `A X = B` for Hermitian positive-definite `A`.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = Cholesky::new(hermitian_part(a))
        .ok_or_else(|| Error::Singular("Hermitian system is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Inverse of a real symmetric positive-definite matrix with a condition
/// number check.
pub fn spd_inverse(a: &DMatrix<f64>, max_condition: f64) -> Result<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > max_condition {
        return Err(Error::RankDeficient(format!(
            "eigenvalues in [{min:e}, {max:e}], condition limit {max_condition:e}"
        )));
    }
    let inv = Cholesky::new(sym)
        .ok_or_else(|| Error::Singular("Cholesky factorization failed".into()))?
        .inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Column-major `vec(A)`.
pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &CVector, n: usize) -> CMatrix {
    assert_eq!(v.len(), n * n, "unvec expects an n²-vector");
    CMatrix::from_column_slice(n, n, v.as_slice())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn vec_identity(n: usize) -> CVector {
    vec(&identity(n))
}

/// `Π⊥_{vec(I_N)} = I_{N²} − N⁻¹ vec(I) vec(I)ᵀ`.
pub fn vec_identity_complement(n: usize) -> CMatrix {
    let v = vec_identity(n);
    identity(n * n) - (&v * v.transpose()).scale(1.0 / n as f64)
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().sum()
}

pub fn conj(a: &CMatrix) -> CMatrix {
    a.map(|x| x.conj())
}

/// Orthogonal projector onto the column space of `a`.
pub fn projector(a: &CMatrix) -> Result<CMatrix> {
    let gram = a.adjoint() * a;
    let coeff = hermitian_solve(&gram, &a.adjoint())?;
    Ok(hermitian_part(&(a * coeff)))
}

/// Orthogonal projector onto the orthogonal complement of the column space.
pub fn complement_projector(a: &CMatrix) -> Result<CMatrix> {
    Ok(identity(a.nrows()) - projector(a)?)
}

/// Hermitian Toeplitz matrix with the given first column.
pub fn hermitian_toeplitz(first_column: &[C64]) -> CMatrix {
    let n = first_column.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            first_column[i - j]
        } else {
            first_column[j - i].conj()
        }
    })
}

pub fn relative_frobenius(estimate: &CMatrix, reference: &CMatrix) -> f64 {
    (estimate - reference).norm() / reference.norm()
}

pub fn real_relative_frobenius(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (estimate - reference).norm() / reference.norm()
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(c)
}
