//! Semiparametric Slepian-Bangs (SSB) formula.
//!
//! For a real parameter vector `θ` entering `μ(θ)` and `Σ(θ)` the
//! semiparametric FIM of one CES snapshot has the Gramian form
//!
//! ```text
//! Ī(θ) = (2 a1 / N) Re[N₀ᴴ Σ⁻¹ N₀] + a2 / (N(N+1)) · V₀ᴴ T V₀
//! T    = Σ⁻ᵀ ⊗ Σ⁻¹ − N⁻¹ vec(Σ⁻¹) vec(Σ⁻¹)ᴴ
//! ```
//!
//! with `N₀ = ∂μ/∂θᵀ` and `V₀ = ∂vec(Σ)/∂θᵀ`. The factor
//! `T^{1/2} = Π⊥_{vec(I)} (Σ^{-T/2} ⊗ Σ^{-1/2})` satisfies `(T^{1/2})ᴴ T^{1/2} = T`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::ces_model::{sample_unit_complex_sphere, DensityGenerator, ModularVariateSample};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_inv_sqrt, hermitian_inverse, hermitian_part, is_hermitian, kron, trace, vec,
    vec_identity_complement, CMatrix, CVector,
};

pub const FD_RELATIVE_STEP: f64 = 1e-6;
const IMAGINARY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JacobianMode {
    Analytic,
    /// Central differences with step `rel_step · max(1, |θᵢ|)`.
    FiniteDifference { rel_step: f64 },
}

impl Default for JacobianMode {
    fn default() -> Self {
        JacobianMode::FiniteDifference {
            rel_step: FD_RELATIVE_STEP,
        }
    }
}

/// `θ ↦ (μ(θ), Σ(θ))`.
///
/// Models only need `mean` and `scatter`; the Jacobians default to central
/// finite differences. Analytic models override the derivative methods and
/// report [`JacobianMode::Analytic`].
pub trait ParametricModel: Sync {
    fn dim(&self) -> usize;
    fn dim_theta(&self) -> usize;
    fn mean(&self, theta: &[f64]) -> Result<CVector>;
    fn scatter(&self, theta: &[f64]) -> Result<CMatrix>;

    fn jacobian_mode(&self) -> JacobianMode {
        JacobianMode::default()
    }

    /// `N₀`, N × d.
    fn mean_jacobian(&self, theta: &[f64]) -> Result<CMatrix> {
        fd_mean_jacobian(self, theta, fd_step(self.jacobian_mode()))
    }

    /// `∂Σ/∂θᵢ` for every i.
    fn scatter_derivatives(&self, theta: &[f64]) -> Result<Vec<CMatrix>> {
        fd_scatter_derivatives(self, theta, fd_step(self.jacobian_mode()))
    }

    /// `V₀`, N² × d.
    fn scatter_jacobian(&self, theta: &[f64]) -> Result<CMatrix> {
        Ok(stack_vec(&self.scatter_derivatives(theta)?, self.dim()))
    }
}

fn fd_step(mode: JacobianMode) -> f64 {
    match mode {
        JacobianMode::FiniteDifference { rel_step } => rel_step,
        JacobianMode::Analytic => FD_RELATIVE_STEP,
    }
}

fn check_theta<M: ParametricModel + ?Sized>(model: &M, theta: &[f64]) -> Result<()> {
    if theta.len() != model.dim_theta() {
        return Err(Error::DimensionMismatch {
            expected: model.dim_theta(),
            got: theta.len(),
        });
    }
    Ok(())
}

fn perturbed(theta: &[f64], i: usize, delta: f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    t[i] += delta;
    t
}

/// Central-difference `N₀`.
pub fn fd_mean_jacobian<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    rel_step: f64,
) -> Result<CMatrix> {
    check_theta(model, theta)?;
    let mut jac = CMatrix::zeros(model.dim(), theta.len());
    for i in 0..theta.len() {
        let h = rel_step * theta[i].abs().max(1.0);
        let plus = model.mean(&perturbed(theta, i, h))?;
        let minus = model.mean(&perturbed(theta, i, -h))?;
        jac.set_column(i, &(plus - minus).unscale(2.0 * h));
    }
    Ok(jac)
}

/// Central-difference `∂Σ/∂θᵢ`, Hermitian-symmetrized.
pub fn fd_scatter_derivatives<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    rel_step: f64,
) -> Result<Vec<CMatrix>> {
    check_theta(model, theta)?;
    (0..theta.len())
        .map(|i| {
            let h = rel_step * theta[i].abs().max(1.0);
            let plus = model.scatter(&perturbed(theta, i, h))?;
            let minus = model.scatter(&perturbed(theta, i, -h))?;
            Ok(hermitian_part(&(plus - minus).unscale(2.0 * h)))
        })
        .collect()
}

/// Columns `vec(Mᵢ)`.
pub fn stack_vec(mats: &[CMatrix], n: usize) -> CMatrix {
    let mut out = CMatrix::zeros(n * n, mats.len());
    for (i, m) in mats.iter().enumerate() {
        out.set_column(i, &vec(m));
    }
    out
}

/// True when every column of `v` is `vec` of a Hermitian matrix.
pub fn columns_are_hermitian_vecs(v: &CMatrix, n: usize, tol: f64) -> bool {
    v.nrows() == n * n
        && v.column_iter().all(|col| {
            let m = CMatrix::from_column_slice(n, n, col.clone_owned().as_slice());
            is_hermitian(&m, tol)
        })
}

type MeanFn = Box<dyn Fn(&[f64]) -> CVector + Send + Sync>;
type ScatterFn = Box<dyn Fn(&[f64]) -> CMatrix + Send + Sync>;
type MeanJacobianFn = Box<dyn Fn(&[f64]) -> CMatrix + Send + Sync>;
type ScatterDerivativesFn = Box<dyn Fn(&[f64]) -> Vec<CMatrix> + Send + Sync>;

/// A [`ParametricModel`] assembled from closures.
pub struct FnModel {
    n: usize,
    d: usize,
    mean_fn: MeanFn,
    scatter_fn: ScatterFn,
    mean_jacobian_fn: Option<MeanJacobianFn>,
    scatter_derivatives_fn: Option<ScatterDerivativesFn>,
}

impl FnModel {
    pub fn new(
        n: usize,
        d: usize,
        mean_fn: impl Fn(&[f64]) -> CVector + Send + Sync + 'static,
        scatter_fn: impl Fn(&[f64]) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            d,
            mean_fn: Box::new(mean_fn),
            scatter_fn: Box::new(scatter_fn),
            mean_jacobian_fn: None,
            scatter_derivatives_fn: None,
        }
    }

    /// Zero-mean model.
    pub fn covariance_only(
        n: usize,
        d: usize,
        scatter_fn: impl Fn(&[f64]) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self::new(n, d, move |_| CVector::zeros(n), scatter_fn)
    }

    /// Supplies analytic Jacobians; both must be given for the model to
    /// report [`JacobianMode::Analytic`].
    pub fn with_analytic(
        mut self,
        mean_jacobian: impl Fn(&[f64]) -> CMatrix + Send + Sync + 'static,
        scatter_derivatives: impl Fn(&[f64]) -> Vec<CMatrix> + Send + Sync + 'static,
    ) -> Self {
        self.mean_jacobian_fn = Some(Box::new(mean_jacobian));
        self.scatter_derivatives_fn = Some(Box::new(scatter_derivatives));
        self
    }
}

impl ParametricModel for FnModel {
    fn dim(&self) -> usize {
        self.n
    }

    fn dim_theta(&self) -> usize {
        self.d
    }

    fn mean(&self, theta: &[f64]) -> Result<CVector> {
        check_theta(self, theta)?;
        let m = (self.mean_fn)(theta);
        if m.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: m.len(),
            });
        }
        Ok(m)
    }

    fn scatter(&self, theta: &[f64]) -> Result<CMatrix> {
        check_theta(self, theta)?;
        let s = (self.scatter_fn)(theta);
        if s.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: s.nrows(),
            });
        }
        Ok(s)
    }

    fn jacobian_mode(&self) -> JacobianMode {
        if self.mean_jacobian_fn.is_some() && self.scatter_derivatives_fn.is_some() {
            JacobianMode::Analytic
        } else {
            JacobianMode::default()
        }
    }

    fn mean_jacobian(&self, theta: &[f64]) -> Result<CMatrix> {
        check_theta(self, theta)?;
        match &self.mean_jacobian_fn {
            Some(f) => Ok(f(theta)),
            None => fd_mean_jacobian(self, theta, FD_RELATIVE_STEP),
        }
    }

    fn scatter_derivatives(&self, theta: &[f64]) -> Result<Vec<CMatrix>> {
        check_theta(self, theta)?;
        match &self.scatter_derivatives_fn {
            Some(f) => Ok(f(theta)),
            None => fd_scatter_derivatives(self, theta, FD_RELATIVE_STEP),
        }
    }
}

/// Semiparametric FIM for a real parameter vector.
#[derive(Debug, Clone)]
pub struct SsbFim {
    pub matrix: DMatrix<f64>,
    pub a1: f64,
    pub a2: f64,
    pub snapshots: usize,
}

#[derive(Debug, Clone)]
pub struct TMatrix {
    pub t: CMatrix,
    /// `Π⊥_{vec(I)} (Σ^{-T/2} ⊗ Σ^{-1/2})`
    pub sqrt: CMatrix,
}

pub fn t_matrix(sigma: &CMatrix) -> Result<TMatrix> {
    let n = sigma.nrows();
    let inv = checked_inverse(sigma)?;
    let v = vec(&inv);
    let t = hermitian_part(&(kron(&inv.transpose(), &inv) - (&v * v.adjoint()).scale(1.0 / n as f64)));
    let w = hermitian_inv_sqrt(sigma)?;
    let sqrt = vec_identity_complement(n) * kron(&w.transpose(), &w);
    Ok(TMatrix { t, sqrt })
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

/// Real part of a Hermitian matrix that should be real, with the imaginary
/// residue checked against [`IMAGINARY_TOLERANCE`].
fn real_symmetric(m: &CMatrix) -> Result<DMatrix<f64>> {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let residue = m.iter().map(|x| x.im.abs()).fold(0.0, f64::max) / scale;
    if residue > IMAGINARY_TOLERANCE {
        return Err(Error::ImaginaryResidue(residue));
    }
    let re = m.map(|x| x.re);
    Ok((&re + re.transpose()) * 0.5)
}

fn check_mean_shape(n0: &CMatrix, n: usize, d: usize) -> Result<()> {
    if n0.shape() != (n, d) {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: n0.nrows() * n0.ncols(),
        });
    }
    Ok(())
}

fn check_derivatives(derivs: &[CMatrix], n: usize, d: usize) -> Result<()> {
    if derivs.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: derivs.len(),
        });
    }
    if let Some(bad) = derivs.iter().find(|m| m.shape() != (n, n)) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.nrows(),
        });
    }
    Ok(())
}

/// `V₀ᴴ T V₀` computed as `(T^{1/2} V₀)ᴴ (T^{1/2} V₀)`.
fn scatter_gram(sigma: &CMatrix, v0: &CMatrix) -> Result<CMatrix> {
    let g = t_matrix(sigma)?.sqrt * v0;
    Ok(g.adjoint() * g)
}

/// Single-snapshot SSB SFIM in Gramian form.
pub fn ssb_single<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    gen: &DensityGenerator,
) -> Result<SsbFim> {
    gen.require_unit_scale()?;
    check_theta(model, theta)?;
    let n = model.dim();
    let d = model.dim_theta();
    let nf = n as f64;
    let a1 = gen.moment_a1(n)?;
    let a2 = gen.moment_a2(n)?;

    let sigma = model.scatter(theta)?;
    let inv = checked_inverse(&sigma)?;
    let n0 = model.mean_jacobian(theta)?;
    check_mean_shape(&n0, n, d)?;
    let derivs = model.scatter_derivatives(theta)?;
    check_derivatives(&derivs, n, d)?;
    let v0 = stack_vec(&derivs, n);

    let mean_term = (n0.adjoint() * &inv * &n0).map(|x| x.re) * (2.0 * a1 / nf);
    let scatter_term = real_symmetric(&scatter_gram(&sigma, &v0)?)? * (a2 / (nf * (nf + 1.0)));
    let m = mean_term + scatter_term;
    Ok(SsbFim {
        matrix: (&m + m.transpose()) * 0.5,
        a1,
        a2,
        snapshots: 1,
    })
}

/// Single-snapshot SSB SFIM from the trace expression, entry by entry.
pub fn ssb_single_entrywise<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    gen: &DensityGenerator,
) -> Result<SsbFim> {
    gen.require_unit_scale()?;
    check_theta(model, theta)?;
    let n = model.dim();
    let d = model.dim_theta();
    let nf = n as f64;
    let a1 = gen.moment_a1(n)?;
    let a2 = gen.moment_a2(n)?;

    let sigma = model.scatter(theta)?;
    let inv = checked_inverse(&sigma)?;
    let n0 = model.mean_jacobian(theta)?;
    check_mean_shape(&n0, n, d)?;
    let derivs = model.scatter_derivatives(theta)?;
    check_derivatives(&derivs, n, d)?;

    let w: Vec<CMatrix> = derivs.iter().map(|s| &inv * s).collect();
    let traces: Vec<f64> = w.iter().map(|m| trace(m).re).collect();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mean = (n0.column(i).adjoint() * &inv * n0.column(j))[(0, 0)].re;
            let scatter = trace(&(&w[i] * &w[j])).re - traces[i] * traces[j] / nf;
            m[(i, j)] = 2.0 * a1 / nf * mean + a2 / (nf * (nf + 1.0)) * scatter;
        }
    }
    Ok(SsbFim {
        matrix: (&m + m.transpose()) * 0.5,
        a1,
        a2,
        snapshots: 1,
    })
}

/// Precomputed quantities for drawing SSB efficient scores at a fixed `θ`.
#[derive(Debug, Clone)]
pub struct SsbScoreSampler {
    gen: DensityGenerator,
    /// `Pᵢ = Σ^{-1/2} Σᵢ Σ^{-1/2}`
    p: Vec<CMatrix>,
    p_traces: Vec<f64>,
    /// `Σ^{-1/2} μᵢ`
    whitened_mean: Vec<CVector>,
    n: usize,
}

impl SsbScoreSampler {
    pub fn new<M: ParametricModel + ?Sized>(
        model: &M,
        theta: &[f64],
        gen: &DensityGenerator,
    ) -> Result<Self> {
        check_theta(model, theta)?;
        let n = model.dim();
        let d = model.dim_theta();
        let sigma = model.scatter(theta)?;
        checked_inverse(&sigma)?;
        let w = hermitian_inv_sqrt(&sigma)?;
        let n0 = model.mean_jacobian(theta)?;
        check_mean_shape(&n0, n, d)?;
        let derivs = model.scatter_derivatives(theta)?;
        check_derivatives(&derivs, n, d)?;
        let p: Vec<CMatrix> = derivs.iter().map(|s| &w * s * &w).collect();
        let p_traces = p.iter().map(|m| trace(m).re).collect();
        let whitened_mean = (0..d).map(|i| &w * n0.column(i)).collect();
        Ok(Self {
            gen: gen.clone(),
            p,
            p_traces,
            whitened_mean,
            n,
        })
    }

    /// `ψ(Q) (N⁻¹ Q tr(Pᵢ) − 2√Q Re[uᴴ Σ^{-1/2} μᵢ] − Q uᴴ Pᵢ u)` for each i.
    pub fn score(&self, sample: &ModularVariateSample) -> Result<DVector<f64>> {
        let q = sample.q;
        let psi = self.gen.psi(q, self.n)?;
        let nf = self.n as f64;
        let u = &sample.u;
        Ok(DVector::from_fn(self.p.len(), |i, _| {
            let mean = u.dotc(&self.whitened_mean[i]).re;
            let quad = u.dotc(&(&self.p[i] * u)).re;
            psi * (q * self.p_traces[i] / nf - 2.0 * q.sqrt() * mean - q * quad)
        }))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let u = sample_unit_complex_sphere(self.n, rng);
        let q = self.gen.sample_modular_variate(self.n, rng)?;
        self.score(&ModularVariateSample { q, u })
    }
}

/// One draw of the SSB efficient score.
pub fn ssb_efficient_score_sample<M: ParametricModel + ?Sized, R: Rng>(
    model: &M,
    theta: &[f64],
    gen: &DensityGenerator,
    rng: &mut R,
) -> Result<DVector<f64>> {
    SsbScoreSampler::new(model, theta, gen)?.sample(rng)
}

/// `L · a2 / (N(N+1)) · V₀ᴴ T V₀` for `L` i.i.d. snapshots with a mean that
/// does not depend on `θ`.
pub fn ssb_bangs_multi<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    gen: &DensityGenerator,
    l: usize,
) -> Result<SsbFim> {
    gen.require_unit_scale()?;
    check_theta(model, theta)?;
    if l == 0 {
        return Err(Error::InvalidParameter("snapshot count must be positive".into()));
    }
    let n = model.dim();
    let d = model.dim_theta();
    let nf = n as f64;
    let n0 = model.mean_jacobian(theta)?;
    check_mean_shape(&n0, n, d)?;
    let mean_scale = model.mean(theta)?.norm().max(1.0);
    if n0.norm() > 1e-12 * mean_scale {
        return Err(Error::Contract(
            "multi-snapshot formula requires a mean that is constant in θ".into(),
        ));
    }
    let a1 = gen.moment_a1(n)?;
    let a2 = gen.moment_a2(n)?;
    let sigma = model.scatter(theta)?;
    let derivs = model.scatter_derivatives(theta)?;
    check_derivatives(&derivs, n, d)?;
    let v0 = stack_vec(&derivs, n);
    let m = real_symmetric(&scatter_gram(&sigma, &v0)?)? * (l as f64 * a2 / (nf * (nf + 1.0)));
    Ok(SsbFim {
        matrix: m,
        a1,
        a2,
        snapshots: l,
    })
}

/// Elliptical vector model: `L` snapshots with means `μ_l(θ)` and a shared
/// scatter `Ω(θ)`, jointly CES in dimension `LN` with scatter `I_L ⊗ Ω`.
pub trait EvModel: Sync {
    fn dim(&self) -> usize;
    fn snapshots(&self) -> usize;
    fn dim_theta(&self) -> usize;
    fn means(&self, theta: &[f64]) -> Result<Vec<CVector>>;
    fn omega(&self, theta: &[f64]) -> Result<CMatrix>;

    /// `∂μ_l/∂θᵀ` for each l.
    fn mean_jacobians(&self, theta: &[f64]) -> Result<Vec<CMatrix>> {
        let d = self.dim_theta();
        let l = self.snapshots();
        let mut out = vec![CMatrix::zeros(self.dim(), d); l];
        for i in 0..d {
            let h = FD_RELATIVE_STEP * theta[i].abs().max(1.0);
            let plus = self.means(&perturbed(theta, i, h))?;
            let minus = self.means(&perturbed(theta, i, -h))?;
            for (k, jac) in out.iter_mut().enumerate() {
                jac.set_column(i, &(&plus[k] - &minus[k]).unscale(2.0 * h));
            }
        }
        Ok(out)
    }

    fn omega_derivatives(&self, theta: &[f64]) -> Result<Vec<CMatrix>> {
        (0..self.dim_theta())
            .map(|i| {
                let h = FD_RELATIVE_STEP * theta[i].abs().max(1.0);
                let plus = self.omega(&perturbed(theta, i, h))?;
                let minus = self.omega(&perturbed(theta, i, -h))?;
                Ok(hermitian_part(&(plus - minus).unscale(2.0 * h)))
            })
            .collect()
    }
}

/// SSB SFIM of the elliptical vector model. `gen` is the generator of the
/// stacked `LN`-dimensional vector.
pub fn ssb_ev<M: EvModel + ?Sized>(
    model: &M,
    theta: &[f64],
    gen: &DensityGenerator,
) -> Result<SsbFim> {
    gen.require_unit_scale()?;
    if theta.len() != model.dim_theta() {
        return Err(Error::DimensionMismatch {
            expected: model.dim_theta(),
            got: theta.len(),
        });
    }
    let n = model.dim();
    let l = model.snapshots();
    let d = model.dim_theta();
    if l == 0 {
        return Err(Error::InvalidParameter("snapshot count must be positive".into()));
    }
    let nf = n as f64;
    let ln = (l * n) as f64;
    let a1 = gen.moment_a1(l * n)?;
    let a2 = gen.moment_a2(l * n)?;

    let omega = model.omega(theta)?;
    let inv = checked_inverse(&omega)?;
    let jacobians = model.mean_jacobians(theta)?;
    if jacobians.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: jacobians.len(),
        });
    }
    let mut mean_term = DMatrix::zeros(d, d);
    for jac in &jacobians {
        check_mean_shape(jac, n, d)?;
        mean_term += (jac.adjoint() * &inv * jac).map(|x| x.re);
    }
    let derivs = model.omega_derivatives(theta)?;
    check_derivatives(&derivs, n, d)?;
    let v0 = stack_vec(&derivs, n);
    let scatter_term = real_symmetric(&scatter_gram(&omega, &v0)?)?;
    let m = mean_term * (2.0 * a1 / ln) + scatter_term * (a2 / (nf * (ln + 1.0)));
    Ok(SsbFim {
        matrix: (&m + m.transpose()) * 0.5,
        a1,
        a2,
        snapshots: l,
    })
}

/// Classical Gaussian Slepian-Bangs FIM for `l` i.i.d. snapshots:
/// `l · (2 Re[μᵢᴴ Σ⁻¹ μⱼ] + tr(Σ⁻¹ Σᵢ Σ⁻¹ Σⱼ))`.
pub fn classical_slepian_bangs<M: ParametricModel + ?Sized>(
    model: &M,
    theta: &[f64],
    l: usize,
) -> Result<DMatrix<f64>> {
    check_theta(model, theta)?;
    let n = model.dim();
    let d = model.dim_theta();
    let sigma = model.scatter(theta)?;
    let inv = checked_inverse(&sigma)?;
    let n0 = model.mean_jacobian(theta)?;
    check_mean_shape(&n0, n, d)?;
    let derivs = model.scatter_derivatives(theta)?;
    check_derivatives(&derivs, n, d)?;
    let w: Vec<CMatrix> = derivs.iter().map(|s| &inv * s).collect();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mean = (n0.column(i).adjoint() * &inv * n0.column(j))[(0, 0)].re;
            m[(i, j)] = l as f64 * (2.0 * mean + trace(&(&w[i] * &w[j])).re);
        }
    }
    Ok((&m + m.transpose()) * 0.5)
}
