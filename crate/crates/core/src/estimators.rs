//! Trace-constrained scatter estimators and the MSE indices used to compare
//! them with the bounds. Data are zero mean throughout.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, HermitianEigen, identity, trace, vec, CMatrix};

/// Smallest eigenvalue of the normalized-snapshot SCM, relative to the
/// largest, below which the data are treated as rank deficient.
const SPAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TylerInit {
    Identity,
    Scm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TylerConfig {
    /// Relative Frobenius change between iterates at which to stop.
    pub tol: f64,
    pub max_iter: usize,
    pub init: TylerInit,
}

impl Default for TylerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            init: TylerInit::Identity,
        }
    }
}

impl TylerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TylerEstimate {
    pub scatter: CMatrix,
    pub iterations: usize,
}

/// `S = L⁻¹ Σ_l z_l z_lᴴ` for snapshots stored as columns.
pub fn sample_covariance(snapshots: &CMatrix) -> Result<CMatrix> {
    let l = snapshots.ncols();
    if l == 0 {
        return Err(Error::Degenerate("no snapshots".into()));
    }
    Ok(hermitian_part(&(snapshots * snapshots.adjoint())).unscale(l as f64))
}

fn normalize_to_trace(m: &CMatrix) -> Result<CMatrix> {
    let tr = trace(m).re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Degenerate(format!("trace of estimate is {tr}")));
    }
    Ok(m.scale(m.nrows() as f64 / tr))
}

/// Constrained SCM `N S / tr(S)`.
pub fn scm_constrained(snapshots: &CMatrix) -> Result<CMatrix> {
    normalize_to_trace(&sample_covariance(snapshots)?)
}

/// Constrained Tyler fixed point
/// `Σ ← (N/L) Σ_l z_l z_lᴴ / (z_lᴴ Σ⁻¹ z_l)`, normalized to trace N after
/// every step.
pub fn tyler_constrained(snapshots: &CMatrix, config: &TylerConfig) -> Result<TylerEstimate> {
    config.validate()?;
    let n = snapshots.nrows();
    let l = snapshots.ncols();
    if l <= n {
        return Err(Error::InvalidParameter(format!(
            "Tyler's estimator needs L > N snapshots, got L = {l}, N = {n}"
        )));
    }

    // The fixed point only depends on the directions z/‖z‖.
    let mut dirs = snapshots.clone();
    for (i, mut col) in dirs.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate(format!("snapshot {i} has norm {norm}")));
        }
        col.unscale_mut(norm);
    }

    let dir_scm = scm_constrained(&dirs)?;
    let eig = HermitianEigen::new(&dir_scm)?;
    if !(eig.values[0] > SPAN_TOLERANCE * eig.values[n - 1]) {
        return Err(Error::Degenerate("snapshots do not span the sample space".into()));
    }
    let mut sigma = match config.init {
        TylerInit::Identity => identity(n),
        TylerInit::Scm => dir_scm,
    };
    let scale = n as f64 / l as f64;
    for iteration in 1..=config.max_iter {
        let chol = Cholesky::new(sigma.clone()).ok_or_else(|| {
            Error::Degenerate("Tyler iterate lost positive definiteness".into())
        })?;
        // ‖L⁻¹ z‖² = zᴴ Σ⁻¹ z
        let whitened = chol.l().solve_lower_triangular(&dirs).ok_or_else(|| {
            Error::Degenerate("Tyler iterate is singular".into())
        })?;
        let mut weighted = dirs.clone();
        for (i, mut col) in weighted.column_iter_mut().enumerate() {
            let quad = whitened.column(i).norm_squared();
            if !(quad > 0.0) || !quad.is_finite() {
                return Err(Error::Degenerate(format!("quadratic form {quad} at snapshot {i}")));
            }
            col.unscale_mut(quad);
        }
        let next = hermitian_part(&(&weighted * dirs.adjoint())).scale(scale);
        let next = normalize_to_trace(&next)?;
        let change = (&next - &sigma).norm() / next.norm();
        sigma = next;
        if change < config.tol {
            return Ok(TylerEstimate {
                scatter: sigma,
                iterations: iteration,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: config.max_iter,
        last: Box::new(sigma),
    })
}

/// Monte Carlo MSE index with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseIndex {
    pub value: f64,
    pub stderr: f64,
}

fn sample_sd(x: &[f64], mean: f64) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

/// `ε = ‖E{(vec Σ̂ − vec Σ₀)(vec Σ̂ − vec Σ₀)ᴴ}‖_F` with the expectation
/// replaced by the sample mean over the estimates.
///
/// The standard error follows from the delta method: with `M` the empirical
/// matrix and `e_r` the r-th error vector, `ε ≈ mean_r Re(e_rᴴ M e_r) / ε`.
pub fn scatter_mse_index(estimates: &[CMatrix], sigma0: &CMatrix) -> Result<MseIndex> {
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no estimates".into()));
    }
    let n = sigma0.nrows();
    let errors: Vec<_> = estimates
        .iter()
        .map(|s| {
            if s.shape() != (n, n) {
                Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.nrows(),
                })
            } else {
                Ok(vec(&(s - sigma0)))
            }
        })
        .collect::<Result<_>>()?;
    let r = errors.len() as f64;
    let mut m = CMatrix::zeros(n * n, n * n);
    for e in &errors {
        m += e * e.adjoint();
    }
    m.unscale_mut(r);
    let value = m.norm();
    if value == 0.0 {
        return Ok(MseIndex { value, stderr: 0.0 });
    }
    let contributions: Vec<f64> = errors
        .iter()
        .map(|e| e.dotc(&(&m * e)).re / value)
        .collect();
    let mean = contributions.iter().sum::<f64>() / r;
    Ok(MseIndex {
        value,
        stderr: sample_sd(&contributions, mean) / r.sqrt(),
    })
}

/// `ρ = E{(ν̂ − ν₀)²}` averaged over runs and sources.
pub fn frequency_mse_index(estimates: &[Vec<f64>], nu0: &[f64]) -> Result<MseIndex> {
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no estimates".into()));
    }
    let per_run: Vec<f64> = estimates
        .iter()
        .map(|est| {
            if est.len() != nu0.len() {
                return Err(Error::DimensionMismatch {
                    expected: nu0.len(),
                    got: est.len(),
                });
            }
            Ok(est.iter().zip(nu0).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / nu0.len() as f64)
        })
        .collect::<Result<_>>()?;
    let r = per_run.len() as f64;
    let value = per_run.iter().sum::<f64>() / r;
    Ok(MseIndex {
        value,
        stderr: sample_sd(&per_run, value) / r.sqrt(),
    })
}
