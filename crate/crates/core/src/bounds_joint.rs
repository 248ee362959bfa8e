//! Constrained complex semiparametric CRB (CCSCRB) for the joint estimation
//! of the mean vector and the scatter matrix under `tr(Σ) = N`.
//!
//! The parameter is `φ = (μ, μ*, vec(Σ))`. Circularity makes the semiparametric
//! FIM block diagonal, so the mean and scatter blocks are handled separately:
//!
//! ```text
//! [CCSCRB]_μ = (N / a1) · blockdiag(Σ, Σ*)
//! [CCSCRB]_Σ = U (Uᵀ C U)⁻¹ Uᵀ
//! C = a2 / (N(N+1)) · (Σ⁻ᵀ ⊗ Σ⁻¹ − N⁻¹ vec(Σ⁻¹) vec(Σ⁻¹)ᴴ)
//! ```
//!
//! where the columns of `U` span the null space of the constraint gradient
//! `vec(I_N)ᵀ`.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use rand::Rng;

use crate::ces_model::{CesDistribution, DensityGenerator, ModularVariateSample};
use crate::error::{Error, Result};
use crate::linalg::{
    conj, hermitian_inverse, hermitian_part, is_hermitian, kron, to_complex, trace, vec, CMatrix,
    CVector,
};

pub const TRACE_TOLERANCE: f64 = 1e-9;

/// Orthonormal basis `U` (real, N² × (N² − 1)) of the null space of `vec(I_N)ᵀ`.
#[derive(Debug, Clone)]
pub struct TraceNullspace {
    pub n: usize,
    pub u: DMatrix<f64>,
}

fn vec_identity_real(n: usize) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(n * n, |k, _| if k % (n + 1) == 0 { 1.0 } else { 0.0 })
}

impl TraceNullspace {
    /// Eigenvectors of `vec(I) vec(I)ᵀ` associated with the zero eigenvalue.
    ///
    /// The matrix is zero outside the N diagonal positions of `vec`, where it
    /// is the all-ones matrix `1 1ᵀ`. The null space is spanned by the
    /// off-diagonal unit vectors and the embedded null eigenvectors of `1 1ᵀ`.
    pub fn from_eigen(n: usize) -> Result<Self> {
        check_n(n)?;
        let eig = SymmetricEigen::new(DMatrix::<f64>::from_element(n, n, 1.0));
        if eig.eigenvectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("eigendecomposition of 1 1ᵀ failed".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let mut u = DMatrix::zeros(n * n, n * n - 1);
        let mut col = 0;
        for k in 0..n * n {
            if k % (n + 1) != 0 {
                u[(k, col)] = 1.0;
                col += 1;
            }
        }
        for &e in &order[..n - 1] {
            for i in 0..n {
                u[(i * (n + 1), col)] = eig.eigenvectors[(i, e)];
            }
            col += 1;
        }
        Ok(Self { n, u })
    }

    /// Columns 2..N² of the Householder reflector that maps `e₁` onto
    /// `vec(I)/√N`.
    pub fn from_householder(n: usize) -> Result<Self> {
        check_n(n)?;
        let m = n * n;
        let mut w = vec_identity_real(n) / (n as f64).sqrt();
        w[0] -= 1.0;
        let h = DMatrix::<f64>::identity(m, m) - (&w * w.transpose()) * (2.0 / w.norm_squared());
        Ok(Self {
            n,
            u: h.columns(1, m - 1).into_owned(),
        })
    }

    pub fn complex(&self) -> CMatrix {
        to_complex(&self.u)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("trace null space needs N ≥ 2, got {n}")));
    }
    Ok(())
}

pub fn build_trace_nullspace(n: usize) -> Result<TraceNullspace> {
    TraceNullspace::from_eigen(n)
}

fn checked_inverse(sigma: &CMatrix) -> Result<CMatrix> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            got: sigma.ncols(),
        });
    }
    if !is_hermitian(sigma, 1e-10) {
        return Err(Error::NotPositiveDefinite("scatter matrix is not Hermitian".into()));
    }
    hermitian_inverse(sigma)
}

/// `blockdiag((a1/N) Σ⁻¹, (a1/N) Σ⁻*)`.
pub fn sfim_mean(sigma: &CMatrix, a1: f64) -> Result<CMatrix> {
    let n = sigma.nrows();
    let inv = checked_inverse(sigma)?.scale(a1 / n as f64);
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&inv);
    out.view_mut((n, n), (n, n)).copy_from(&conj(&inv));
    Ok(out)
}

/// `a2 / (N(N+1)) · (Σ⁻ᵀ ⊗ Σ⁻¹ − N⁻¹ vec(Σ⁻¹) vec(Σ⁻¹)ᴴ)`.
pub fn sfim_scatter(sigma: &CMatrix, a2: f64) -> Result<CMatrix> {
    let n = sigma.nrows();
    let nf = n as f64;
    let inv = checked_inverse(sigma)?;
    let v = vec(&inv);
    let c = kron(&inv.transpose(), &inv) - (&v * v.adjoint()).scale(1.0 / nf);
    Ok(hermitian_part(&c.scale(a2 / (nf * (nf + 1.0)))))
}

/// One draw of the efficient scores sharing a single `(q, u)` realization.
#[derive(Debug, Clone)]
pub struct JointScores {
    /// `−√Q ψ(Q) Σ^{-1/2} u`
    pub mean: CVector,
    /// `−ψ(Q) Σ⁻¹ (z − μ)`, the parametric score, for comparison with `mean`.
    pub raw_mean: CVector,
    /// `Q ψ(Q) vec(t tᴴ − N⁻¹ Σ⁻¹)` with `t = Σ^{-1/2} u`.
    pub scatter: CVector,
}

pub fn efficient_scores_from(
    dist: &CesDistribution,
    sample: &ModularVariateSample,
) -> Result<JointScores> {
    let n = dist.dim();
    let psi = dist.generator().psi(sample.q, n)?;
    let w = dist.scatter_inv_sqrt();
    let t = w * &sample.u;
    let mean = t.scale(-sample.q.sqrt() * psi);

    let z = dist.snapshot_from(sample);
    let inv = w * w;
    let raw_mean = (&inv * (z - dist.mean())).scale(-psi);

    let mut m = &t * t.adjoint() - inv.scale(1.0 / n as f64);
    m.scale_mut(sample.q * psi);
    Ok(JointScores {
        mean,
        raw_mean,
        scatter: vec(&m),
    })
}

pub fn efficient_score_sample<R: Rng>(dist: &CesDistribution, rng: &mut R) -> Result<JointScores> {
    let n = dist.dim();
    let u = crate::ces_model::sample_unit_complex_sphere(n, rng);
    let q = dist.generator().sample_modular_variate(n, rng)?;
    efficient_scores_from(dist, &ModularVariateSample { q, u })
}

#[derive(Debug, Clone)]
pub struct CcscrbResult {
    /// Bound on `(μ, μ*)`, 2N × 2N.
    pub mean_block: CMatrix,
    /// Bound on `vec(Σ)`, N² × N².
    pub scatter_block: CMatrix,
    pub a1: f64,
    pub a2: f64,
    pub snapshots: usize,
}

impl CcscrbResult {
    /// The bound for `l` i.i.d. snapshots.
    pub fn per_snapshots(&self, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidParameter("snapshot count must be positive".into()));
        }
        let f = self.snapshots as f64 / l as f64;
        Ok(Self {
            mean_block: self.mean_block.scale(f),
            scatter_block: self.scatter_block.scale(f),
            a1: self.a1,
            a2: self.a2,
            snapshots: l,
        })
    }
}

pub fn check_trace(sigma: &CMatrix) -> Result<()> {
    let n = sigma.nrows() as f64;
    let tr = trace(sigma).re;
    if !((tr - n).abs() <= TRACE_TOLERANCE) {
        return Err(Error::ConstraintViolation {
            trace: tr,
            expected: n,
        });
    }
    Ok(())
}

/// `N Σ / tr(Σ)`.
pub fn normalize_trace(sigma: &CMatrix) -> Result<CMatrix> {
    let tr = trace(sigma).re;
    if !(tr > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("trace is {tr}")));
    }
    Ok(sigma.scale(sigma.nrows() as f64 / tr))
}

pub fn ccscrb(sigma: &CMatrix, gen: &DensityGenerator) -> Result<CcscrbResult> {
    ccscrb_with_basis(sigma, gen, &build_trace_nullspace(sigma.nrows())?)
}

pub fn ccscrb_with_basis(
    sigma: &CMatrix,
    gen: &DensityGenerator,
    basis: &TraceNullspace,
) -> Result<CcscrbResult> {
    let n = sigma.nrows();
    if basis.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: basis.n,
        });
    }
    checked_inverse(sigma)?;
    check_trace(sigma)?;
    let a1 = gen.moment_a1(n)?;
    let a2 = gen.moment_a2(n)?;

    let scale = n as f64 / a1;
    let mut mean_block = CMatrix::zeros(2 * n, 2 * n);
    mean_block.view_mut((0, 0), (n, n)).copy_from(&sigma.scale(scale));
    mean_block
        .view_mut((n, n), (n, n))
        .copy_from(&conj(sigma).scale(scale));

    let c = sfim_scatter(sigma, a2)?;
    let u = basis.complex();
    let reduced = u.transpose() * &c * &u;
    let reduced_inv = hermitian_inverse(&reduced)
        .map_err(|e| Error::Singular(format!("reduced scatter SFIM: {e}")))?;
    let scatter_block = hermitian_part(&(&u * reduced_inv * u.transpose()));

    Ok(CcscrbResult {
        mean_block,
        scatter_block,
        a1,
        a2,
        snapshots: 1,
    })
}

/// `‖[CCSCRB]_Σ‖_F`.
pub fn frobenius_bound_index(result: &CcscrbResult) -> f64 {
    result.scatter_block.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity, vec_identity, vec_identity_complement};

    #[test]
    fn nullspace_n2() {
        let b = build_trace_nullspace(2).unwrap();
        assert_eq!(b.u.shape(), (4, 3));
        for col in 0..3 {
            assert!((b.u[(0, col)] + b.u[(3, col)]).abs() < 1e-12);
        }
        assert!(build_trace_nullspace(1).is_err());
    }

    #[test]
    fn both_bases_are_orthonormal_and_span_the_same_space() {
        for n in 2..=10 {
            let m = n * n;
            let p = vec_identity_complement(n);
            for b in [TraceNullspace::from_eigen(n).unwrap(), TraceNullspace::from_householder(n).unwrap()] {
                let utu = b.u.transpose() * &b.u;
                assert!((utu - DMatrix::<f64>::identity(m - 1, m - 1)).norm() < 1e-12);
                assert!((vec_identity_real(n).transpose() * &b.u).norm() < 1e-12);
                let uut = b.complex() * b.complex().transpose();
                assert!((uut - &p).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_identity_blocks() {
        let n = 4;
        let r = ccscrb(&identity(n), &DensityGenerator::gaussian()).unwrap();
        assert!((&r.mean_block - identity(2 * n)).norm() < 1e-14);
        // C is the projector Π⊥_{vec I}, so the bound is the same projector.
        let c = sfim_scatter(&identity(n), (n * (n + 1)) as f64).unwrap();
        assert!((&c - vec_identity_complement(n)).norm() < 1e-14);
        assert!((&r.scatter_block - vec_identity_complement(n)).norm() < 1e-10);
        assert!((vec_identity(n).transpose() * &r.scatter_block).norm() < 1e-12);
    }

    #[test]
    fn sfim_mean_complex_t() {
        let g = DensityGenerator::complex_t(2.0, 2.0).unwrap();
        let a1 = g.moment_a1(8).unwrap();
        assert!((a1 - 2.0 * 8.0 * 10.0 / 11.0).abs() < 1e-12);
        let f = sfim_mean(&identity(8), a1).unwrap();
        assert!((f - identity(16).scale(a1 / 8.0)).norm() < 1e-13);
    }

    #[test]
    fn trace_constraint_enforced() {
        let s = identity(3).scale(1.01);
        assert!(matches!(
            ccscrb(&s, &DensityGenerator::gaussian()),
            Err(Error::ConstraintViolation { .. })
        ));
        let s = normalize_trace(&s).unwrap();
        assert!(ccscrb(&s, &DensityGenerator::gaussian()).is_ok());
    }

    #[test]
    fn per_snapshot_scaling() {
        let r = ccscrb(&identity(3), &DensityGenerator::gaussian()).unwrap();
        let r24 = r.per_snapshots(24).unwrap();
        assert!((frobenius_bound_index(&r24) * 24.0 - frobenius_bound_index(&r)).abs() < 1e-12);
        assert!(r.per_snapshots(0).is_err());
    }

    #[test]
    fn frobenius_index_of_scaled_projector() {
        let mut r = ccscrb(&identity(2), &DensityGenerator::gaussian()).unwrap();
        r.scatter_block = CMatrix::zeros(4, 4);
        assert_eq!(frobenius_bound_index(&r), 0.0);
        r.scatter_block = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.5), c(2.5), c(2.5), c(0.0)]));
        assert!((frobenius_bound_index(&r) - 2.5 * 3f64.sqrt()).abs() < 1e-14);
    }
}
