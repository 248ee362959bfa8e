//! Semiparametric stochastic CRB (SSCRB) for direction-of-arrival estimation
//! with a uniform linear array, and the MUSIC estimator.
//!
//! Snapshots follow `Σ = A(ν) Γ A(ν)ᴴ + σ² I` with a CES law of unknown
//! generator. The bound on the spatial frequencies `ν` is available in two
//! algebraically equivalent forms:
//!
//! ```text
//! SSCRB = N(N+1) σ² / (2 L a2) · { Re[(Dᴴ Π⊥_A D) ⊙ (Γ Aᴴ Σ⁻¹ A Γ)ᵀ] }⁻¹
//!       = N(N+1) / (L a2) · F⁻¹,   F_ij = 2 Re tr(Z_i Π⊥_X Z_jᴴ)
//! ```
//!
//! with `X = Σ^{-1/2} A` and `Z_k = X c_k d_kᴴ Σ^{-1/2}` (`c_k` the k-th column
//! of `Γ`, `d_k` the derivative of the k-th steering vector).

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::bounds_ssb::{classical_slepian_bangs, ssb_bangs_multi, JacobianMode, ParametricModel};
use crate::ces_model::DensityGenerator;
use crate::error::{Error, Result};
use crate::linalg::{
    complement_projector, hermitian_inv_sqrt, hermitian_inverse, identity, is_hermitian, kron,
    projector, spd_inverse, trace, vec, vec_identity, vec_identity_complement, CMatrix, CVector,
    HermitianEigen, C64, J,
};

/// Condition number above which the bound is reported as undefined.
pub const MAX_CONDITION: f64 = 1e12;
const NOISE_DIRECTION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UlaModel {
    pub n_sensors: usize,
}

fn check_frequency(nu: f64) -> Result<()> {
    if !(-0.5..0.5).contains(&nu) {
        return Err(Error::Domain(format!(
            "spatial frequency must lie in [-0.5, 0.5), got {nu}"
        )));
    }
    Ok(())
}

impl UlaModel {
    pub fn new(n_sensors: usize) -> Result<Self> {
        if n_sensors < 2 {
            return Err(Error::InvalidParameter(format!(
                "array needs at least 2 sensors, got {n_sensors}"
            )));
        }
        Ok(Self { n_sensors })
    }

    fn steering_unchecked(&self, nu: f64) -> CVector {
        CVector::from_fn(self.n_sensors, |n, _| C64::from_polar(1.0, 2.0 * PI * n as f64 * nu))
    }

    fn derivative_unchecked(&self, nu: f64) -> CVector {
        CVector::from_fn(self.n_sensors, |n, _| {
            let w = 2.0 * PI * n as f64;
            J * w * C64::from_polar(1.0, w * nu)
        })
    }

    fn matrix_unchecked(&self, nu: &[f64], col: impl Fn(f64) -> CVector) -> CMatrix {
        let mut a = CMatrix::zeros(self.n_sensors, nu.len());
        for (k, &f) in nu.iter().enumerate() {
            a.set_column(k, &col(f));
        }
        a
    }

    /// `a(ν) = [1, e^{j2πν}, …, e^{j2π(N−1)ν}]ᵀ`.
    pub fn steering_vector(&self, nu: f64) -> Result<CVector> {
        check_frequency(nu)?;
        Ok(self.steering_unchecked(nu))
    }

    pub fn steering_matrix(&self, nu: &[f64]) -> Result<CMatrix> {
        nu.iter().try_for_each(|&f| check_frequency(f))?;
        Ok(self.matrix_unchecked(nu, |f| self.steering_unchecked(f)))
    }

    /// Columns `d a(ν_k) / dν_k`.
    pub fn steering_derivative(&self, nu: &[f64]) -> Result<CMatrix> {
        nu.iter().try_for_each(|&f| check_frequency(f))?;
        Ok(self.matrix_unchecked(nu, |f| self.derivative_unchecked(f)))
    }
}

/// Sources at spatial frequencies `nu` with covariance `gamma`, plus white
/// noise of power `sigma2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaScene {
    pub nu: Vec<f64>,
    pub gamma: CMatrix,
    pub sigma2: f64,
}

impl DoaScene {
    pub fn new(nu: Vec<f64>, gamma: CMatrix, sigma2: f64) -> Result<Self> {
        let k = nu.len();
        if gamma.shape() != (k, k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: gamma.nrows(),
            });
        }
        nu.iter().try_for_each(|&f| check_frequency(f))?;
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise power must be positive, got {sigma2}"
            )));
        }
        if k > 0 {
            if !is_hermitian(&gamma, 1e-12) {
                return Err(Error::InvalidParameter("source covariance is not Hermitian".into()));
            }
            let eig = HermitianEigen::new(&gamma)?;
            if eig.values[0] < -1e-12 * eig.values[k - 1].abs().max(1.0) {
                return Err(Error::InvalidParameter(
                    "source covariance is not positive semidefinite".into(),
                ));
            }
        }
        Ok(Self { nu, gamma, sigma2 })
    }

    /// One source of power `gamma2`.
    pub fn single(nu: f64, gamma2: f64, sigma2: f64) -> Result<Self> {
        Self::new(vec![nu], CMatrix::from_element(1, 1, C64::new(gamma2, 0.0)), sigma2)
    }

    pub fn n_sources(&self) -> usize {
        self.nu.len()
    }
}

fn covariance_from(a: &CMatrix, gamma: &CMatrix, sigma2: f64) -> CMatrix {
    let n = a.nrows();
    let s = a * gamma * a.adjoint() + identity(n).scale(sigma2);
    (&s + s.adjoint()).scale(0.5)
}

/// `Σ = A Γ Aᴴ + σ² I`.
pub fn scene_covariance(model: &UlaModel, scene: &DoaScene) -> Result<CMatrix> {
    let a = model.steering_matrix(&scene.nu)?;
    Ok(covariance_from(&a, &scene.gamma, scene.sigma2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SscrbMethod {
    Hadamard,
    BlockProjection,
    /// Inverse of the full multi-snapshot SSB SFIM over all scene parameters.
    Parametric,
}

#[derive(Debug, Clone)]
pub struct SscrbResult {
    pub bound: DMatrix<f64>,
    pub method: SscrbMethod,
}

fn check_inputs(model: &UlaModel, scene: &DoaScene, gen: &DensityGenerator, l: usize) -> Result<f64> {
    gen.require_unit_scale()?;
    if l == 0 {
        return Err(Error::InvalidParameter("snapshot count must be positive".into()));
    }
    let k = scene.n_sources();
    if k == 0 || k >= model.n_sensors {
        return Err(Error::InvalidParameter(format!(
            "need 1 ≤ K < N sources, got K = {k} with N = {}",
            model.n_sensors
        )));
    }
    gen.moment_a2(model.n_sensors)
}

fn rank_error(context: &str, e: Error) -> Error {
    Error::RankDeficient(format!("{context}: {e}"))
}

/// `Re[(Dᴴ Π⊥_A D) ⊙ (Γ Aᴴ Σ⁻¹ A Γ)ᵀ]`; depends on the scene only.
pub fn hadamard_bracket(model: &UlaModel, scene: &DoaScene) -> Result<DMatrix<f64>> {
    let a = model.steering_matrix(&scene.nu)?;
    let d = model.steering_derivative(&scene.nu)?;
    let sigma = covariance_from(&a, &scene.gamma, scene.sigma2);
    let inv = hermitian_inverse(&sigma)?;
    let pa_perp = complement_projector(&a).map_err(|e| rank_error("steering matrix", e))?;
    let left = d.adjoint() * pa_perp * &d;
    let right = (&scene.gamma * a.adjoint() * inv * &a * &scene.gamma).transpose();
    Ok(left.component_mul(&right).map(|x| x.re))
}

/// `N(N+1) σ² / (2 L a2)`.
pub fn sscrb_coefficient(n: usize, a2: f64, sigma2: f64, l: usize) -> f64 {
    let nf = n as f64;
    nf * (nf + 1.0) * sigma2 / (2.0 * l as f64 * a2)
}

pub fn sscrb_hadamard(
    model: &UlaModel,
    scene: &DoaScene,
    gen: &DensityGenerator,
    l: usize,
) -> Result<SscrbResult> {
    let a2 = check_inputs(model, scene, gen, l)?;
    let bracket = hadamard_bracket(model, scene)?;
    let inv = spd_inverse(&bracket, MAX_CONDITION)?;
    Ok(SscrbResult {
        bound: inv * sscrb_coefficient(model.n_sensors, a2, scene.sigma2, l),
        method: SscrbMethod::Hadamard,
    })
}

/// Intermediate quantities of the projection construction.
#[derive(Debug, Clone)]
pub struct BlockTerms {
    /// `X = Σ^{-1/2} A`
    pub x: CMatrix,
    /// `Z_k = X c_k d_kᴴ Σ^{-1/2}`
    pub z: Vec<CMatrix>,
    /// Columns `g_k = vec(Z_k + Z_kᴴ)`.
    pub g: CMatrix,
    /// `G_s = Π⊥_{vec(I)} G`
    pub g_s: CMatrix,
    /// `u = Π⊥_{vec(I)} vec(Σ⁻¹)`
    pub u: CVector,
    /// `Π⊥_{(Π⊥_{vec(I)} V)}` in closed form, `V = X* ⊗ X`.
    pub proj_v_perp: CMatrix,
    /// `Π⊥_{Δ_s}`
    pub proj_delta_perp: CMatrix,
    /// `Re(G_sᴴ Π⊥_{Δ_s} G_s)`
    pub projected_fim: DMatrix<f64>,
    /// `2 Re tr(Z_i Π⊥_X Z_jᴴ)`
    pub trace_fim: DMatrix<f64>,
}

pub fn block_terms(model: &UlaModel, scene: &DoaScene) -> Result<BlockTerms> {
    let n = model.n_sensors;
    let k = scene.n_sources();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "need 1 ≤ K < N sources, got K = {k} with N = {n}"
        )));
    }
    let a = model.steering_matrix(&scene.nu)?;
    let d = model.steering_derivative(&scene.nu)?;
    let sigma = covariance_from(&a, &scene.gamma, scene.sigma2);
    let w = hermitian_inv_sqrt(&sigma)?;
    let x = &w * &a;
    let pi_x = projector(&x).map_err(|e| rank_error("whitened steering matrix", e))?;
    let pi_x_perp = identity(n) - &pi_x;

    let z: Vec<CMatrix> = (0..k)
        .map(|i| &x * scene.gamma.column(i) * d.column(i).adjoint() * &w)
        .collect();
    let mut g = CMatrix::zeros(n * n, k);
    for (i, zi) in z.iter().enumerate() {
        g.set_column(i, &vec(&(zi + zi.adjoint())));
    }
    let p_vec_i = vec_identity_complement(n);
    let g_s = &p_vec_i * &g;
    let u = &p_vec_i * vec(&(&w * &w));

    let nk = (n - k) as f64;
    let vi = vec_identity(n);
    let vpx = vec(&pi_x);
    let proj_v_perp = identity(n * n) - kron(&pi_x.transpose(), &pi_x)
        - (&vpx * vpx.adjoint()).scale(1.0 / nk)
        + (&vi * vpx.adjoint()).scale(1.0 / nk)
        + (&vpx * vi.transpose()).scale(1.0 / nk)
        - (&vi * vi.transpose()).scale(k as f64 / (n as f64 * nk));
    // With every entry of Γ free, XΓXᴴ + σ² Σ⁻¹ = I puts u in the span of
    // Π⊥_{vec(I)} V, so the rank-one correction vanishes up to rounding.
    let pu = &proj_v_perp * &u;
    let proj_delta_perp = if pu.norm() <= NOISE_DIRECTION_TOLERANCE * u.norm() {
        proj_v_perp.clone()
    } else {
        let denom = u.dotc(&pu).re;
        &proj_v_perp - (&pu * pu.adjoint()).unscale(denom)
    };
    let projected_fim = (g_s.adjoint() * &proj_delta_perp * &g_s).map(|x| x.re);

    let trace_fim = DMatrix::from_fn(k, k, |i, j| {
        2.0 * trace(&(&z[i] * &pi_x_perp * z[j].adjoint())).re
    });

    Ok(BlockTerms {
        x,
        z,
        g,
        g_s,
        u,
        proj_v_perp,
        proj_delta_perp,
        projected_fim: (&projected_fim + projected_fim.transpose()) * 0.5,
        trace_fim: (&trace_fim + trace_fim.transpose()) * 0.5,
    })
}

pub fn sscrb_block(
    model: &UlaModel,
    scene: &DoaScene,
    gen: &DensityGenerator,
    l: usize,
) -> Result<SscrbResult> {
    let a2 = check_inputs(model, scene, gen, l)?;
    let terms = block_terms(model, scene)?;
    let inv = spd_inverse(&terms.trace_fim, MAX_CONDITION)?;
    let nf = model.n_sensors as f64;
    Ok(SscrbResult {
        bound: inv * (nf * (nf + 1.0) / (l as f64 * a2)),
        method: SscrbMethod::BlockProjection,
    })
}

/// The scene as a real parameter vector
/// `θ = [ν, diag Γ, Re Γ_{m>n}, Im Γ_{m>n}, σ²]` with the covariance model
/// `Σ(θ)` and analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct DoaParametric {
    pub model: UlaModel,
    pub n_sources: usize,
}

impl DoaParametric {
    pub fn new(model: UlaModel, n_sources: usize) -> Self {
        Self { model, n_sources }
    }

    fn lower_pairs(&self) -> Vec<(usize, usize)> {
        let k = self.n_sources;
        let mut out = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
        for col in 0..k {
            for row in col + 1..k {
                out.push((row, col));
            }
        }
        out
    }

    pub fn theta_of(&self, scene: &DoaScene) -> Vec<f64> {
        let k = self.n_sources;
        let mut theta = scene.nu.clone();
        theta.extend((0..k).map(|i| scene.gamma[(i, i)].re));
        let pairs = self.lower_pairs();
        theta.extend(pairs.iter().map(|&(m, n)| scene.gamma[(m, n)].re));
        theta.extend(pairs.iter().map(|&(m, n)| scene.gamma[(m, n)].im));
        theta.push(scene.sigma2);
        theta
    }

    fn unpack(&self, theta: &[f64]) -> Result<(Vec<f64>, CMatrix, f64)> {
        if theta.len() != self.dim_theta() {
            return Err(Error::DimensionMismatch {
                expected: self.dim_theta(),
                got: theta.len(),
            });
        }
        let k = self.n_sources;
        let nu = theta[..k].to_vec();
        let mut gamma = CMatrix::zeros(k, k);
        for i in 0..k {
            gamma[(i, i)] = C64::new(theta[k + i], 0.0);
        }
        let pairs = self.lower_pairs();
        let p = pairs.len();
        for (idx, &(m, n)) in pairs.iter().enumerate() {
            let v = C64::new(theta[2 * k + idx], theta[2 * k + p + idx]);
            gamma[(m, n)] = v;
            gamma[(n, m)] = v.conj();
        }
        Ok((nu, gamma, theta[theta.len() - 1]))
    }

    pub fn scene_of(&self, theta: &[f64]) -> Result<DoaScene> {
        let (nu, gamma, sigma2) = self.unpack(theta)?;
        DoaScene::new(nu, gamma, sigma2)
    }
}

impl ParametricModel for DoaParametric {
    fn dim(&self) -> usize {
        self.model.n_sensors
    }

    fn dim_theta(&self) -> usize {
        self.n_sources + self.n_sources * self.n_sources + 1
    }

    fn mean(&self, theta: &[f64]) -> Result<CVector> {
        self.unpack(theta)?;
        Ok(CVector::zeros(self.model.n_sensors))
    }

    fn scatter(&self, theta: &[f64]) -> Result<CMatrix> {
        let (nu, gamma, sigma2) = self.unpack(theta)?;
        let a = self.model.matrix_unchecked(&nu, |f| self.model.steering_unchecked(f));
        Ok(covariance_from(&a, &gamma, sigma2))
    }

    fn jacobian_mode(&self) -> JacobianMode {
        JacobianMode::Analytic
    }

    fn mean_jacobian(&self, theta: &[f64]) -> Result<CMatrix> {
        self.unpack(theta)?;
        Ok(CMatrix::zeros(self.model.n_sensors, self.dim_theta()))
    }

    fn scatter_derivatives(&self, theta: &[f64]) -> Result<Vec<CMatrix>> {
        let (nu, gamma, _) = self.unpack(theta)?;
        let n = self.model.n_sensors;
        let k = self.n_sources;
        let a = self.model.matrix_unchecked(&nu, |f| self.model.steering_unchecked(f));
        let d = self.model.matrix_unchecked(&nu, |f| self.model.derivative_unchecked(f));
        let mut out = Vec::with_capacity(self.dim_theta());
        for i in 0..k {
            let ac = &a * gamma.column(i);
            let t = &ac * d.column(i).adjoint();
            out.push(&t + t.adjoint());
        }
        for i in 0..k {
            out.push(a.column(i) * a.column(i).adjoint());
        }
        let pairs = self.lower_pairs();
        for &(m, nn) in &pairs {
            let t = a.column(m) * a.column(nn).adjoint();
            out.push(&t + t.adjoint());
        }
        for &(m, nn) in &pairs {
            let t = a.column(m) * a.column(nn).adjoint();
            out.push((&t - t.adjoint()) * J);
        }
        out.push(identity(n));
        Ok(out)
    }
}

fn cholesky_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let inv = nalgebra::Cholesky::new(sym)
        .ok_or_else(|| Error::RankDeficient("Fisher information is not positive definite".into()))?
        .inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Frequency block of the inverse of the full multi-snapshot SSB SFIM.
///
/// The semiparametric SFIM over `(ν, ζ, σ²)` is singular: a joint rescaling
/// of `Γ` and `σ²` moves `Σ` along itself, which the generator absorbs. The
/// frequency block is the inverse of the Schur complement
/// `F_νν − F_νζ F_ζζ⁺ F_ζν`, which does not depend on how the nuisance block
/// is (pseudo-)inverted.
pub fn sscrb_parametric(
    model: &UlaModel,
    scene: &DoaScene,
    gen: &DensityGenerator,
    l: usize,
) -> Result<SscrbResult> {
    check_inputs(model, scene, gen, l)?;
    let k = scene.n_sources();
    let par = DoaParametric::new(*model, k);
    let fim = ssb_bangs_multi(&par, &par.theta_of(scene), gen, l)?.matrix;
    let d = fim.nrows();
    let f_nn = fim.view((0, 0), (k, k)).into_owned();
    let f_nz = fim.view((0, k), (k, d - k)).into_owned();
    let f_zz = fim.view((k, k), (d - k, d - k)).into_owned();
    let schur = f_nn - &f_nz * symmetric_pinv(&f_zz, 1e-10) * f_nz.transpose();
    Ok(SscrbResult {
        bound: spd_inverse(&schur, MAX_CONDITION)?,
        method: SscrbMethod::Parametric,
    })
}

fn symmetric_pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5);
    let cutoff = rel_tol * eig.eigenvalues.amax();
    let inv_vals = eig.eigenvalues.map(|x| if x > cutoff { 1.0 / x } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose()
}

/// Classical Gaussian stochastic CRB on `ν`, from the full Slepian-Bangs FIM.
pub fn classical_stochastic_crb(model: &UlaModel, scene: &DoaScene, l: usize) -> Result<DMatrix<f64>> {
    let par = DoaParametric::new(*model, scene.n_sources());
    let fim = classical_slepian_bangs(&par, &par.theta_of(scene), l)?;
    let inv = cholesky_inverse(&fim)?;
    let k = scene.n_sources();
    Ok(inv.view((0, 0), (k, k)).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicConfig {
    pub grid_size: usize,
    pub refine: bool,
    pub refine_tolerance: f64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            refine: true,
            refine_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicEstimate {
    /// Sorted estimates in `[-0.5, 0.5)`.
    pub frequencies: Vec<f64>,
    /// Number of separated pseudospectrum peaks found on the grid.
    pub separated_peaks: usize,
}

/// MUSIC with a precomputed steering grid over `[-0.5, 0.5)`.
#[derive(Debug, Clone)]
pub struct MusicEstimator {
    model: UlaModel,
    config: MusicConfig,
    /// N × G steering vectors of the grid.
    grid: CMatrix,
}

fn wrap_frequency(nu: f64) -> f64 {
    let w = nu - (nu + 0.5).floor();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

impl MusicEstimator {
    pub fn new(model: UlaModel, config: MusicConfig) -> Result<Self> {
        if config.grid_size < 3 {
            return Err(Error::InvalidParameter("MUSIC grid needs at least 3 points".into()));
        }
        if !(config.refine_tolerance > 0.0) {
            return Err(Error::InvalidParameter("refinement tolerance must be positive".into()));
        }
        let g = config.grid_size;
        let nus: Vec<f64> = (0..g).map(|i| -0.5 + i as f64 / g as f64).collect();
        let grid = model.matrix_unchecked(&nus, |f| model.steering_unchecked(f));
        Ok(Self { model, config, grid })
    }

    fn grid_frequency(&self, i: usize) -> f64 {
        -0.5 + i as f64 / self.config.grid_size as f64
    }

    /// Signal-subspace eigenvectors (largest `k` eigenvalues) of `sigma_hat`.
    fn signal_subspace(&self, sigma_hat: &CMatrix, k: usize) -> Result<CMatrix> {
        let n = self.model.n_sensors;
        if sigma_hat.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sigma_hat.nrows(),
            });
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "need 1 ≤ K < N sources, got K = {k} with N = {n}"
            )));
        }
        let eig = HermitianEigen::new(sigma_hat)?;
        Ok(eig.vectors.columns(n - k, k).into_owned())
    }

    /// `‖Π⊥ a(ν)‖² = N − ‖E_sᴴ a(ν)‖²`, the inverse pseudospectrum.
    fn null_energy(&self, es: &CMatrix, nu: f64) -> f64 {
        let a = self.model.steering_unchecked(nu);
        self.model.n_sensors as f64 - (es.adjoint() * a).norm_squared()
    }

    pub fn estimate(&self, sigma_hat: &CMatrix, k: usize) -> Result<MusicEstimate> {
        let es = self.signal_subspace(sigma_hat, k)?;
        let g = self.config.grid_size;
        let n = self.model.n_sensors as f64;
        let proj = es.adjoint() * &self.grid;
        let denom: Vec<f64> = proj.column_iter().map(|c| n - c.norm_squared()).collect();

        let mut peaks: Vec<usize> = (0..g)
            .filter(|&i| {
                let prev = denom[(i + g - 1) % g];
                let next = denom[(i + 1) % g];
                denom[i] < prev && denom[i] <= next
            })
            .collect();
        peaks.sort_by(|&i, &j| denom[i].total_cmp(&denom[j]).then(i.cmp(&j)));
        let separated_peaks = peaks.len();

        let mut chosen: Vec<usize> = peaks.into_iter().take(k).collect();
        if chosen.len() < k {
            let mut rest: Vec<usize> = (0..g).filter(|i| !chosen.contains(i)).collect();
            rest.sort_by(|&i, &j| denom[i].total_cmp(&denom[j]).then(i.cmp(&j)));
            chosen.extend(rest.into_iter().take(k - chosen.len()));
        }

        let step = 1.0 / g as f64;
        let mut frequencies: Vec<f64> = chosen
            .into_iter()
            .map(|i| {
                let center = self.grid_frequency(i);
                if self.config.refine {
                    wrap_frequency(golden_section_min(
                        |nu| self.null_energy(&es, nu),
                        center - step,
                        center + step,
                        self.config.refine_tolerance,
                    ))
                } else {
                    center
                }
            })
            .collect();
        frequencies.sort_by(f64::total_cmp);
        Ok(MusicEstimate {
            frequencies,
            separated_peaks,
        })
    }
}

/// One-shot MUSIC on a scatter or covariance estimate.
pub fn music_estimate(
    model: &UlaModel,
    sigma_hat: &CMatrix,
    k: usize,
    config: MusicConfig,
) -> Result<MusicEstimate> {
    MusicEstimator::new(*model, config)?.estimate(sigma_hat, k)
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}
