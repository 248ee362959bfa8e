//! Complex elliptically symmetric (CES) distributions.
//!
//! A CES vector has the stochastic representation `z = μ + √Q Σ^{1/2} u`
//! with `u` uniform on the complex unit sphere and `Q` the second-order
//! modular variate, whose law is fixed by the density generator `h`:
//!
//! ```text
//! p_Q(q) = πᴺ / Γ(N) · qᴺ⁻¹ · h(q)
//! ```
//!
//! The semiparametric bounds only see the generator through
//! `ψ(t) = d ln h(t) / dt` and the two moment functionals
//! `a1 = E{Q ψ(Q)²}` and `a2 = E{Q² ψ(Q)²}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_inv_sqrt, hermitian_sqrt, is_hermitian, CMatrix, CVector, C64};
use crate::quadrature::{integrate_semi_infinite, Tolerance};

/// Density function `t ↦ h(t)` of a user-supplied generator.
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Draws one realization of the modular variate.
pub type SamplerFn = Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;

/// Scale convention in force for a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    /// `E{Q} = N`, so the scatter matrix equals the covariance matrix.
    UnitScale,
    Free,
}

#[derive(Clone)]
pub struct CustomGenerator {
    pub dim: usize,
    pub density: DensityFn,
    pub log_derivative: Option<DensityFn>,
    pub sampler: Option<SamplerFn>,
}

impl fmt::Debug for CustomGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGenerator")
            .field("dim", &self.dim)
            .field("log_derivative", &self.log_derivative.is_some())
            .field("sampler", &self.sampler.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum GeneratorKind {
    Gaussian,
    /// Complex t with shape `λ > 1` and scale `η > 0`.
    ComplexT { shape: f64, scale: f64 },
    Custom(CustomGenerator),
}

#[derive(Debug, Clone)]
pub struct DensityGenerator {
    pub kind: GeneratorKind,
    pub constraint_mode: ConstraintMode,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    Ok(())
}

fn check_nonnegative(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("expected a finite t ≥ 0, got {t}")));
    }
    Ok(())
}

// (N − 1) ln q with the convention 0 · ln 0 = 0.
fn power_term(n: usize, q: f64) -> f64 {
    if n == 1 {
        0.0
    } else {
        (n as f64 - 1.0) * q.ln()
    }
}

impl DensityGenerator {
    pub fn gaussian() -> Self {
        Self {
            kind: GeneratorKind::Gaussian,
            constraint_mode: ConstraintMode::UnitScale,
        }
    }

    /// Complex t generator. The constraint mode is `UnitScale` exactly when
    /// `η = λ / (λ − 1)`.
    pub fn complex_t(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 1.0) || !shape.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "complex t shape must satisfy 1 < λ < ∞, got {shape}"
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "complex t scale must be positive, got {scale}"
            )));
        }
        let unit = shape / (shape - 1.0);
        let constraint_mode = if (scale - unit).abs() <= 1e-12 * unit {
            ConstraintMode::UnitScale
        } else {
            ConstraintMode::Free
        };
        Ok(Self {
            kind: GeneratorKind::ComplexT { shape, scale },
            constraint_mode,
        })
    }

    pub fn complex_t_unit(shape: f64) -> Result<Self> {
        Self::complex_t(shape, shape / (shape - 1.0))
    }

    /// Complex t generator with data power `E{Q}/N = power`.
    pub fn complex_t_with_power(shape: f64, power: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "data power must be positive, got {power}"
            )));
        }
        Self::complex_t(shape, shape / (power * (shape - 1.0)))
    }

    pub fn custom(generator: CustomGenerator, constraint_mode: ConstraintMode) -> Result<Self> {
        check_dim(generator.dim)?;
        Ok(Self {
            kind: GeneratorKind::Custom(generator),
            constraint_mode,
        })
    }

    pub fn is_unit_scale(&self) -> bool {
        self.constraint_mode == ConstraintMode::UnitScale
    }

    pub fn require_unit_scale(&self) -> Result<()> {
        if self.is_unit_scale() {
            Ok(())
        } else {
            Err(Error::NotUnitScale)
        }
    }

    fn check_custom_dim(&self, n: usize) -> Result<()> {
        check_dim(n)?;
        if let GeneratorKind::Custom(g) = &self.kind {
            if g.dim != n {
                return Err(Error::DimensionMismatch {
                    expected: g.dim,
                    got: n,
                });
            }
        }
        Ok(())
    }

    /// `h(t)` for an N-dimensional distribution.
    pub fn density(&self, t: f64, n: usize) -> Result<f64> {
        check_nonnegative(t)?;
        self.check_custom_dim(n)?;
        let nf = n as f64;
        Ok(match &self.kind {
            GeneratorKind::Gaussian => (-nf * PI.ln() - t).exp(),
            GeneratorKind::ComplexT { shape, scale } => {
                let s = shape / scale;
                (ln_gamma(shape + nf) - ln_gamma(*shape) - nf * PI.ln() + shape * (s.ln())
                    - (shape + nf) * (s + t).ln())
                .exp()
            }
            GeneratorKind::Custom(g) => (g.density)(t),
        })
    }

    /// `ψ(t) = d ln h(t) / dt`.
    pub fn psi(&self, t: f64, n: usize) -> Result<f64> {
        check_nonnegative(t)?;
        self.check_custom_dim(n)?;
        match &self.kind {
            GeneratorKind::Gaussian => Ok(-1.0),
            GeneratorKind::ComplexT { shape, scale } => Ok(-(shape + n as f64) / (shape / scale + t)),
            GeneratorKind::Custom(g) => match &g.log_derivative {
                Some(d) => Ok(d(t)),
                None => numerical_log_derivative(g.density.as_ref(), t),
            },
        }
    }

    /// Natural log of the modular variate pdf.
    pub fn ln_modular_variate_pdf(&self, q: f64, n: usize) -> Result<f64> {
        check_nonnegative(q)?;
        self.check_custom_dim(n)?;
        let nf = n as f64;
        Ok(match &self.kind {
            GeneratorKind::Gaussian => -ln_gamma(nf) + power_term(n, q) - q,
            GeneratorKind::ComplexT { shape, scale } => {
                let s = shape / scale;
                ln_gamma(shape + nf) - ln_gamma(nf) - ln_gamma(*shape) - shape * (q / s).ln_1p()
                    - nf * (s + q).ln()
                    + power_term(n, q)
            }
            GeneratorKind::Custom(g) => {
                nf * PI.ln() - ln_gamma(nf) + power_term(n, q) + (g.density)(q).ln()
            }
        })
    }

    pub fn modular_variate_pdf(&self, q: f64, n: usize) -> Result<f64> {
        Ok(self.ln_modular_variate_pdf(q, n)?.exp())
    }

    /// `∫₀^∞ f(q) p_Q(q) dq` by adaptive quadrature.
    pub fn expectation_quadrature<F: Fn(f64) -> f64>(&self, n: usize, f: F) -> Result<f64> {
        self.expectation_quadrature_tol(n, f, Tolerance::default())
    }

    pub fn expectation_quadrature_tol<F: Fn(f64) -> f64>(
        &self,
        n: usize,
        f: F,
        tol: Tolerance,
    ) -> Result<f64> {
        self.check_custom_dim(n)?;
        let integrand = |q: f64| match self.modular_variate_pdf(q, n) {
            Ok(p) if p > 0.0 => f(q) * p,
            Ok(_) => 0.0,
            Err(_) => f64::NAN,
        };
        Ok(integrate_semi_infinite(integrand, tol)?.value)
    }

    pub fn normalization_quadrature(&self, n: usize) -> Result<f64> {
        self.expectation_quadrature(n, |_| 1.0)
    }

    /// `E{Q}`.
    pub fn mean_modular_variate(&self, n: usize) -> Result<f64> {
        self.check_custom_dim(n)?;
        let nf = n as f64;
        match &self.kind {
            GeneratorKind::Gaussian => Ok(nf),
            GeneratorKind::ComplexT { shape, scale } => Ok(shape / scale * nf / (shape - 1.0)),
            GeneratorKind::Custom(_) => self.mean_modular_variate_quadrature(n),
        }
    }

    pub fn mean_modular_variate_quadrature(&self, n: usize) -> Result<f64> {
        self.expectation_quadrature(n, |q| q)
    }

    /// `a1 = E{Q ψ(Q)²}`.
    pub fn moment_a1(&self, n: usize) -> Result<f64> {
        self.check_custom_dim(n)?;
        let nf = n as f64;
        match &self.kind {
            GeneratorKind::Gaussian => Ok(nf),
            GeneratorKind::ComplexT { shape, scale } => {
                Ok(scale * nf * (shape + nf) / (nf + shape + 1.0))
            }
            GeneratorKind::Custom(_) => self.moment_a1_quadrature(n),
        }
    }

    /// `a2 = E{Q² ψ(Q)²}`.
    pub fn moment_a2(&self, n: usize) -> Result<f64> {
        self.check_custom_dim(n)?;
        let nf = n as f64;
        match &self.kind {
            GeneratorKind::Gaussian => Ok(nf * (nf + 1.0)),
            GeneratorKind::ComplexT { shape, .. } => {
                Ok(nf * (nf + 1.0) * (shape + nf) / (nf + shape + 1.0))
            }
            GeneratorKind::Custom(_) => self.moment_a2_quadrature(n),
        }
    }

    // Finite-difference ψ carries ~1e−8 relative noise, which the default
    // tolerance cannot resolve.
    fn psi_tolerance(&self) -> Tolerance {
        match &self.kind {
            GeneratorKind::Custom(g) if g.log_derivative.is_none() => Tolerance {
                abs: 1e-7,
                rel: 1e-7,
            },
            _ => Tolerance::default(),
        }
    }

    pub fn moment_a1_quadrature(&self, n: usize) -> Result<f64> {
        let f = |q: f64| {
            let psi = self.psi(q, n).unwrap_or(f64::NAN);
            q * psi * psi
        };
        self.expectation_quadrature_tol(n, f, self.psi_tolerance())
    }

    pub fn moment_a2_quadrature(&self, n: usize) -> Result<f64> {
        let f = |q: f64| {
            let psi = self.psi(q, n).unwrap_or(f64::NAN);
            q * q * psi * psi
        };
        self.expectation_quadrature_tol(n, f, self.psi_tolerance())
    }

    /// Verifies `E{Q} = N` to `tol` when the generator claims unit scale.
    pub fn check_unit_scale(&self, n: usize, tol: f64) -> Result<()> {
        let mean = self.mean_modular_variate(n)?;
        if (mean - n as f64).abs() > tol * n as f64 {
            return Err(Error::NotUnitScale);
        }
        Ok(())
    }

    /// One draw of the modular variate `Q`.
    pub fn sample_modular_variate<R: Rng>(&self, n: usize, rng: &mut R) -> Result<f64> {
        self.check_custom_dim(n)?;
        let nf = n as f64;
        match &self.kind {
            GeneratorKind::Gaussian => Ok(gamma(nf)?.sample(rng)),
            GeneratorKind::ComplexT { shape, scale } => {
                let g1 = gamma(nf)?.sample(rng);
                let g2 = gamma(*shape)?.sample(rng);
                Ok(shape / scale * (g1 / g2))
            }
            GeneratorKind::Custom(g) => match &g.sampler {
                Some(sampler) => Ok(sampler(rng)),
                None => Err(Error::InvalidParameter(
                    "custom generator has no sampler".into(),
                )),
            },
        }
    }
}

fn gamma(shape: f64) -> Result<Gamma<f64>> {
    Gamma::new(shape, 1.0)
        .map_err(|e| Error::InvalidParameter(format!("gamma distribution: {e}")))
}

// Central difference of ln h with step √ε·max(1, t), one-sided near t = 0.
fn numerical_log_derivative(h: &(dyn Fn(f64) -> f64 + Send + Sync), t: f64) -> Result<f64> {
    let step = f64::EPSILON.sqrt() * t.max(1.0);
    let ln_h = |x: f64| h(x).ln();
    let value = if t >= step {
        (ln_h(t + step) - ln_h(t - step)) / (2.0 * step)
    } else {
        (-3.0 * ln_h(t) + 4.0 * ln_h(t + step) - ln_h(t + 2.0 * step)) / (2.0 * step)
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!("ln h is not differentiable at {t}")))
    }
}

/// Uniform draw on the complex unit sphere in ℂᴺ.
pub fn sample_unit_complex_sphere<R: Rng>(n: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let norm = v.norm();
        if norm > 0.0 {
            return v.unscale(norm);
        }
    }
}

/// A realization `(q, u)` of the stochastic representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularVariateSample {
    pub q: f64,
    pub u: CVector,
}

impl ModularVariateSample {
    /// Draws `u` from `direction_rng` and `q` from `radial_rng`.
    pub fn draw<R1: Rng, R2: Rng>(
        gen: &DensityGenerator,
        n: usize,
        direction_rng: &mut R1,
        radial_rng: &mut R2,
    ) -> Result<Self> {
        let u = sample_unit_complex_sphere(n, direction_rng);
        let q = gen.sample_modular_variate(n, radial_rng)?;
        Ok(Self { q, u })
    }
}

/// `CES(μ, Σ, h)` with cached Hermitian square roots of the scatter matrix.
#[derive(Debug, Clone)]
pub struct CesDistribution {
    mean: CVector,
    scatter: CMatrix,
    gen: DensityGenerator,
    scatter_sqrt: CMatrix,
    scatter_inv_sqrt: CMatrix,
}

impl CesDistribution {
    pub fn new(mean: CVector, scatter: CMatrix, gen: DensityGenerator) -> Result<Self> {
        let n = scatter.nrows();
        if !scatter.is_square() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: scatter.ncols(),
            });
        }
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        gen.check_custom_dim(n)?;
        if !is_hermitian(&scatter, 1e-10) {
            return Err(Error::NotPositiveDefinite("scatter matrix is not Hermitian".into()));
        }
        let scatter_sqrt = hermitian_sqrt(&scatter)?;
        let scatter_inv_sqrt = hermitian_inv_sqrt(&scatter)?;
        Ok(Self {
            mean,
            scatter,
            gen,
            scatter_sqrt,
            scatter_inv_sqrt,
        })
    }

    pub fn zero_mean(scatter: CMatrix, gen: DensityGenerator) -> Result<Self> {
        let n = scatter.nrows();
        Self::new(CVector::zeros(n), scatter, gen)
    }

    pub fn dim(&self) -> usize {
        self.scatter.nrows()
    }

    pub fn mean(&self) -> &CVector {
        &self.mean
    }

    pub fn scatter(&self) -> &CMatrix {
        &self.scatter
    }

    pub fn generator(&self) -> &DensityGenerator {
        &self.gen
    }

    pub fn scatter_sqrt(&self) -> &CMatrix {
        &self.scatter_sqrt
    }

    pub fn scatter_inv_sqrt(&self) -> &CMatrix {
        &self.scatter_inv_sqrt
    }

    /// `M = N⁻¹ E{Q} Σ`.
    pub fn covariance(&self) -> Result<CMatrix> {
        let n = self.dim();
        Ok(self.scatter.scale(self.gen.mean_modular_variate(n)? / n as f64))
    }

    /// `μ + √q Σ^{1/2} u`.
    pub fn snapshot_from(&self, sample: &ModularVariateSample) -> CVector {
        &self.mean + (&self.scatter_sqrt * &sample.u).scale(sample.q.sqrt())
    }

    /// `L` snapshots as the columns of an N×L matrix, one `(u, q)` pair per
    /// column, both drawn from `rng`.
    pub fn sample_snapshots<R: Rng>(&self, l: usize, rng: &mut R) -> Result<CMatrix> {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, l);
        for col in 0..l {
            let u = sample_unit_complex_sphere(n, rng);
            let q = self.gen.sample_modular_variate(n, rng)?;
            out.set_column(col, &self.snapshot_from(&ModularVariateSample { q, u }));
        }
        Ok(out)
    }

    /// Like [`sample_snapshots`](Self::sample_snapshots) with the directions
    /// and the modular variates taken from separate streams, so that two
    /// distributions sharing `direction_rng` produce the same directions.
    pub fn sample_snapshots_split<R1: Rng, R2: Rng>(
        &self,
        l: usize,
        direction_rng: &mut R1,
        radial_rng: &mut R2,
    ) -> Result<CMatrix> {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, l);
        for col in 0..l {
            let sample = ModularVariateSample::draw(&self.gen, n, direction_rng, radial_rng)?;
            out.set_column(col, &self.snapshot_from(&sample));
        }
        Ok(out)
    }
}
