//! Numerical self-checks of the bounds.
//!
//! `run_validate_sfim` compares the closed-form SFIMs with the empirical
//! second moments of sampled efficient scores. `run_validate_sscrb` compares
//! the independent SSCRB constructions on random DOA scenes.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use super::with_threads;
use crate::bounds_joint::{efficient_scores_from, sfim_mean, sfim_scatter};
use crate::bounds_ssb::{ssb_single, JacobianMode, ParametricModel, SsbScoreSampler};
use crate::ces_model::{CesDistribution, DensityGenerator, ModularVariateSample};
use crate::doa::{
    block_terms, classical_stochastic_crb, sscrb_block, sscrb_hadamard, sscrb_parametric, DoaScene,
    UlaModel,
};
use crate::error::{Error, Result};
use crate::linalg::{
    complement_projector, conj, identity, kron, real_relative_frobenius, relative_frobenius,
    vec_identity_complement, CMatrix, CVector, C64,
};
use crate::rng::{split_streams, stream};

const CHUNK: usize = 1000;

/// Mean shift along a steering-like vector plus three trace-free scatter
/// perturbations of `Σ₀`, evaluated at the origin.
struct ProbeModel {
    sigma0: CMatrix,
    direction: CVector,
    perturbations: [CMatrix; 3],
}

impl ProbeModel {
    fn new(sigma0: CMatrix) -> Self {
        let n = sigma0.nrows();
        let direction = CVector::from_fn(n, |i, _| C64::from_polar(1.0, 0.7 * i as f64));
        let mut re = CMatrix::zeros(n, n);
        re[(1, 0)] = C64::new(1.0, 0.0);
        re[(0, 1)] = C64::new(1.0, 0.0);
        let mut im = CMatrix::zeros(n, n);
        im[(n - 1, 0)] = C64::new(0.0, 1.0);
        im[(0, n - 1)] = C64::new(0.0, -1.0);
        let mut diag = CMatrix::zeros(n, n);
        diag[(0, 0)] = C64::new(1.0, 0.0);
        diag[(n - 1, n - 1)] = C64::new(-1.0, 0.0);
        Self {
            sigma0,
            direction,
            perturbations: [re, im, diag],
        }
    }
}

impl ParametricModel for ProbeModel {
    fn dim(&self) -> usize {
        self.sigma0.nrows()
    }

    fn dim_theta(&self) -> usize {
        5
    }

    fn mean(&self, theta: &[f64]) -> Result<CVector> {
        Ok(&self.direction * C64::new(theta[0], theta[1]))
    }

    fn scatter(&self, theta: &[f64]) -> Result<CMatrix> {
        let mut s = self.sigma0.clone();
        for (p, &t) in self.perturbations.iter().zip(&theta[2..]) {
            s += p.scale(t);
        }
        Ok(s)
    }

    fn jacobian_mode(&self) -> JacobianMode {
        JacobianMode::Analytic
    }

    fn mean_jacobian(&self, _theta: &[f64]) -> Result<CMatrix> {
        let n = self.dim();
        let mut j = CMatrix::zeros(n, 5);
        j.set_column(0, &self.direction);
        j.set_column(1, &(&self.direction * C64::new(0.0, 1.0)));
        Ok(j)
    }

    fn scatter_derivatives(&self, _theta: &[f64]) -> Result<Vec<CMatrix>> {
        let n = self.dim();
        let mut out = vec![CMatrix::zeros(n, n), CMatrix::zeros(n, n)];
        out.extend(self.perturbations.iter().cloned());
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SfimCase {
    pub label: String,
    /// Shape used for the scores and the closed forms; `None` is Gaussian.
    pub lambda: Option<f64>,
    /// Shape the data were drawn from.
    pub sample_lambda: Option<f64>,
    pub mean_rel_error: f64,
    pub scatter_rel_error: f64,
    pub ssb_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SfimReport {
    pub n: usize,
    pub draws: usize,
    pub threshold: f64,
    pub cases: Vec<SfimCase>,
    pub passed: bool,
}

struct Moments {
    mean: CMatrix,
    scatter: CMatrix,
    ssb: DMatrix<f64>,
}

impl Moments {
    fn zeros(n: usize, d: usize) -> Self {
        Self {
            mean: CMatrix::zeros(2 * n, 2 * n),
            scatter: CMatrix::zeros(n * n, n * n),
            ssb: DMatrix::zeros(d, d),
        }
    }

    fn add(mut self, other: &Self) -> Self {
        self.mean += &other.mean;
        self.scatter += &other.scatter;
        self.ssb += &other.ssb;
        self
    }
}

fn sfim_case(
    cfg: &ExperimentConfig,
    case: usize,
    bound_gen: &DensityGenerator,
    sample_gen: &DensityGenerator,
) -> Result<(f64, f64, f64)> {
    let n = cfg.n;
    let sigma0 = cfg.toeplitz_scatter();
    let dist = CesDistribution::zero_mean(sigma0.clone(), bound_gen.clone())?;
    let probe = ProbeModel::new(sigma0.clone());
    let theta = [0.0; 5];
    let sampler = SsbScoreSampler::new(&probe, &theta, bound_gen)?;
    let exp = Experiment::ValidateSfim.id();

    let chunks: Vec<Moments> = with_threads(cfg.threads, || {
        (0..cfg.runs.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut m = Moments::zeros(n, 5);
                for r in c * CHUNK..((c + 1) * CHUNK).min(cfg.runs) {
                    let (mut dir, mut rad) = split_streams(&[cfg.seed, exp, case as u64, r as u64]);
                    let sample = ModularVariateSample::draw(sample_gen, n, &mut dir, &mut rad)?;
                    let s = efficient_scores_from(&dist, &sample)?;
                    let aug = CVector::from_iterator(
                        2 * n,
                        s.mean.iter().copied().chain(s.mean.iter().map(|x| x.conj())),
                    );
                    m.mean += &aug * aug.adjoint();
                    m.scatter += &s.scatter * s.scatter.adjoint();
                    let g = sampler.score(&sample)?;
                    m.ssb += &g * g.transpose();
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let total = chunks
        .iter()
        .fold(Moments::zeros(n, 5), |acc, m| acc.add(m));
    let r = cfg.runs as f64;

    let a1 = bound_gen.moment_a1(n)?;
    let a2 = bound_gen.moment_a2(n)?;
    let mean_err = relative_frobenius(&total.mean.unscale(r), &sfim_mean(&sigma0, a1)?);
    let scatter_err = relative_frobenius(&total.scatter.unscale(r), &sfim_scatter(&sigma0, a2)?);
    let ssb = ssb_single(&probe, &theta, bound_gen)?.matrix;
    let ssb_err = real_relative_frobenius(&total.ssb.unscale(r), &ssb);
    Ok((mean_err, scatter_err, ssb_err))
}

/// Empirical efficient-score covariances against the closed-form SFIMs for
/// the Gaussian generator and a unit-scale complex-t generator per grid
/// value. With `sample_lambda` set, the complex-t data come from that shape
/// instead, which should make the check fail.
pub fn run_validate_sfim(cfg: &ExperimentConfig) -> Result<SfimReport> {
    cfg.validate()?;
    let mut specs: Vec<(String, Option<f64>, Option<f64>)> = vec![("gaussian".into(), None, None)];
    for &lambda in &cfg.lambda_grid {
        let sample = cfg.sample_lambda.unwrap_or(lambda);
        specs.push((format!("complex_t(lambda={lambda})"), Some(lambda), Some(sample)));
    }
    let gen_for = |lambda: Option<f64>| match lambda {
        None => Ok(DensityGenerator::gaussian()),
        Some(l) => DensityGenerator::complex_t_unit(l),
    };

    let mut cases = Vec::new();
    for (i, (label, lambda, sample_lambda)) in specs.into_iter().enumerate() {
        let (mean, scatter, ssb) = sfim_case(cfg, i, &gen_for(lambda)?, &gen_for(sample_lambda)?)?;
        cases.push(SfimCase {
            label,
            lambda,
            sample_lambda,
            mean_rel_error: mean,
            scatter_rel_error: scatter,
            ssb_rel_error: ssb,
            passed: mean < cfg.sfim_threshold && scatter < cfg.sfim_threshold && ssb < cfg.sfim_threshold,
        });
    }
    Ok(SfimReport {
        n: cfg.n,
        draws: cfg.runs,
        threshold: cfg.sfim_threshold,
        passed: cases.iter().all(|c| c.passed),
        cases,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SscrbReport {
    pub scenes: usize,
    pub threshold: f64,
    /// Worst relative Frobenius gap between the Hadamard and block bounds.
    pub max_block_error: f64,
    /// Worst gap between the Hadamard bound and the inverse of the full
    /// multi-snapshot SSB SFIM.
    pub max_parametric_error: f64,
    /// Worst gap between `Re(G_sᴴ Π⊥_{Δ_s} G_s)` and the trace form.
    pub max_projected_fim_error: f64,
    /// Worst entrywise gap between the closed-form `Π⊥_{(Π⊥V)}` and a
    /// numerically built projector.
    pub max_projector_error: f64,
    /// Worst gap between the Gaussian SSCRB and the classical stochastic CRB.
    pub max_gaussian_error: f64,
    /// Coincident directions and a zero-power source are both rejected as
    /// rank deficient.
    pub rank_controls_rejected: bool,
    pub passed: bool,
}

/// Tolerance for the comparisons that go through a pseudo-inverse or a
/// full-parameter FIM inversion.
const PARAMETRIC_TOLERANCE: f64 = 1e-6;

fn random_scene<R: Rng>(rng: &mut R) -> Result<(UlaModel, DoaScene)> {
    let n = rng.random_range(4..=8usize);
    let k = rng.random_range(1..=3usize.min(n - 1));
    let min_sep = 1.0 / n as f64;
    let mut nu: Vec<f64> = Vec::with_capacity(k);
    while nu.len() < k {
        let cand = rng.random_range(-0.5..0.5);
        let far = nu.iter().all(|&f: &f64| {
            let d = (cand - f).abs();
            d.min(1.0 - d) >= min_sep
        });
        if far {
            nu.push(cand);
        }
    }
    let b = CMatrix::from_fn(k, k, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let gamma = &b * b.adjoint() + identity(k).scale(0.2);
    let gamma = (&gamma + gamma.adjoint()).scale(0.5);
    let sigma2 = rng.random_range(0.5..2.0);
    Ok((UlaModel::new(n)?, DoaScene::new(nu, gamma, sigma2)?))
}

fn numeric_projector_error(model: &UlaModel, scene: &DoaScene) -> Result<f64> {
    let terms = block_terms(model, scene)?;
    let n = model.n_sensors;
    let v = kron(&conj(&terms.x), &terms.x);
    let numeric = complement_projector(&(vec_identity_complement(n) * v))?;
    Ok((numeric - &terms.proj_v_perp).camax())
}

fn rank_controls_rejected(l: usize) -> Result<bool> {
    let model = UlaModel::new(6)?;
    let gen = DensityGenerator::complex_t_unit(3.0)?;
    let coincident = DoaScene::new(vec![0.1, 0.1], identity(2), 1.0)?;
    let mut silent_gamma = identity(2);
    silent_gamma[(1, 1)] = C64::new(0.0, 0.0);
    let silent = DoaScene::new(vec![-0.2, 0.15], silent_gamma, 1.0)?;
    let mut ok = true;
    for scene in [&coincident, &silent] {
        ok &= matches!(sscrb_hadamard(&model, scene, &gen, l), Err(Error::RankDeficient(_)));
        ok &= matches!(sscrb_block(&model, scene, &gen, l), Err(Error::RankDeficient(_)));
    }
    Ok(ok)
}

/// Cross-checks the SSCRB constructions on `runs` random scenes with
/// `N ≤ 8`, `K ≤ 3` and complex-t shapes cycled from the λ grid.
pub fn run_validate_sscrb(cfg: &ExperimentConfig) -> Result<SscrbReport> {
    cfg.validate()?;
    let exp = Experiment::ValidateSscrb.id();
    let gaussian = DensityGenerator::gaussian();
    let per_scene: Vec<[f64; 5]> = with_threads(cfg.threads, || {
        (0..cfg.runs)
            .into_par_iter()
            .map(|s| {
                let mut rng = stream(&[cfg.seed, exp, s as u64]);
                let (model, scene) = random_scene(&mut rng)?;
                let lambda = cfg.lambda_grid[s % cfg.lambda_grid.len()];
                let gen = DensityGenerator::complex_t_unit(lambda)?;
                let h = sscrb_hadamard(&model, &scene, &gen, cfg.l)?.bound;
                let b = sscrb_block(&model, &scene, &gen, cfg.l)?.bound;
                let p = sscrb_parametric(&model, &scene, &gen, cfg.l)?.bound;
                let terms = block_terms(&model, &scene)?;
                let hg = sscrb_hadamard(&model, &scene, &gaussian, cfg.l)?.bound;
                let classical = classical_stochastic_crb(&model, &scene, cfg.l)?;
                Ok([
                    real_relative_frobenius(&b, &h),
                    real_relative_frobenius(&p, &h),
                    real_relative_frobenius(&terms.projected_fim, &terms.trace_fim),
                    numeric_projector_error(&model, &scene)?,
                    real_relative_frobenius(&classical, &hg),
                ])
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let worst = |i: usize| per_scene.iter().map(|e| e[i]).fold(0.0, f64::max);
    let rank_controls_rejected = rank_controls_rejected(cfg.l)?;
    let report = SscrbReport {
        scenes: cfg.runs,
        threshold: cfg.sscrb_threshold,
        max_block_error: worst(0),
        max_parametric_error: worst(1),
        max_projected_fim_error: worst(2),
        max_projector_error: worst(3),
        max_gaussian_error: worst(4),
        rank_controls_rejected,
        passed: false,
    };
    let passed = report.max_block_error <= cfg.sscrb_threshold
        && report.max_projected_fim_error <= cfg.sscrb_threshold
        && report.max_projector_error <= cfg.sscrb_threshold
        && report.max_parametric_error <= PARAMETRIC_TOLERANCE
        && report.max_gaussian_error <= PARAMETRIC_TOLERANCE
        && rank_controls_rejected;
    Ok(SscrbReport { passed, ..report })
}
