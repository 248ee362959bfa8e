//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then
//! asserts the same condition.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cesbound::bounds_joint::{ccscrb, frobenius_bound_index, TraceNullspace};
use cesbound::bounds_ssb::{fd_mean_jacobian, fd_scatter_derivatives, stack_vec, t_matrix, FnModel, ParametricModel};
use cesbound::ces_model::{CesDistribution, DensityGenerator};
use cesbound::doa::{block_terms, sscrb_hadamard, DoaParametric, DoaScene, UlaModel};
use cesbound::estimators::{tyler_constrained, TylerConfig};
use cesbound::harness::records::ExperimentOutput;
use cesbound::harness::{
    run_fig1, run_fig2, run_validate_sfim, run_validate_sscrb, Experiment, ExperimentConfig,
};
use cesbound::linalg::{hermitian_toeplitz, identity, relative_frobenius, vec, CMatrix, CVector, C64};
use cesbound::rng::split_streams;
use nalgebra::DMatrix;

fn verdict(name: &str, pass: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn moment_oracle() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &lambda in &[2.0, 5.0, 10.0] {
        for &n in &[2usize, 4, 8] {
            for gen in [
                DensityGenerator::complex_t_unit(lambda).unwrap(),
                DensityGenerator::complex_t_with_power(lambda, 4.0).unwrap(),
            ] {
                let a1 = gen.moment_a1(n).unwrap();
                let a2 = gen.moment_a2(n).unwrap();
                worst = worst
                    .max(rel(gen.moment_a1_quadrature(n).unwrap(), a1))
                    .max(rel(gen.moment_a2_quadrature(n).unwrap(), a2));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-8 && elapsed < Duration::from_secs(1);
    assert!(verdict(
        "moment oracle",
        pass,
        format!("max rel. err {worst:.2e} (≤ 1e-8), {elapsed:.2?} (< 1 s)")
    ));
}

#[test]
fn unit_scale_constraint() {
    let mut worst: f64 = 0.0;
    for &lambda in &[1.5, 2.0, 5.0, 10.0, 100.0] {
        let gen = DensityGenerator::complex_t_unit(lambda).unwrap();
        for &n in &[2usize, 4, 8] {
            let mean = gen.mean_modular_variate_quadrature(n).unwrap();
            worst = worst.max(rel(mean, n as f64));
        }
    }
    assert!(verdict(
        "unit-scale constraint",
        worst <= 1e-8,
        format!("max |E{{Q}} − N| / N = {worst:.2e} (≤ 1e-8)")
    ));
}

#[test]
fn gaussian_limit() {
    let cfg = ExperimentConfig::defaults(Experiment::Fig1);
    let sigma0 = cfg.toeplitz_scatter();
    let heavy = DensityGenerator::complex_t_unit(1e5).unwrap();
    let gauss = DensityGenerator::gaussian();
    let cs_t = frobenius_bound_index(&ccscrb(&sigma0, &heavy).unwrap());
    let cs_g = frobenius_bound_index(&ccscrb(&sigma0, &gauss).unwrap());

    let model = UlaModel::new(8).unwrap();
    let scene = DoaScene::single(0.3, 1.0, 1.0).unwrap();
    let ss_t = sscrb_hadamard(&model, &scene, &heavy, 24).unwrap().bound[(0, 0)];
    let ss_g = sscrb_hadamard(&model, &scene, &gauss, 24).unwrap().bound[(0, 0)];
    let (e1, e2) = (rel(cs_t, cs_g), rel(ss_t, ss_g));
    assert!(verdict(
        "Gaussian limit",
        e1 <= 1e-3 && e2 <= 1e-3,
        format!("CCSCRB rel. gap {e1:.2e}, SSCRB rel. gap {e2:.2e} (≤ 1e-3)")
    ));
}

#[test]
fn sfim_monte_carlo_validation() {
    let cfg = ExperimentConfig::defaults(Experiment::ValidateSfim);
    assert_eq!((cfg.n, cfg.runs, cfg.lambda_grid.as_slice()), (4, 100_000, &[3.0][..]));
    let start = Instant::now();
    let report = run_validate_sfim(&cfg).unwrap();
    let elapsed = start.elapsed();
    let detail: Vec<String> = report
        .cases
        .iter()
        .map(|c| {
            format!(
                "{} mean {:.2}% scatter {:.2}% ssb {:.2}%",
                c.label,
                100.0 * c.mean_rel_error,
                100.0 * c.scatter_rel_error,
                100.0 * c.ssb_rel_error
            )
        })
        .collect();
    let pass = report.passed && report.threshold == 0.02 && elapsed < Duration::from_secs(30);
    assert!(verdict(
        "SFIM Monte Carlo validation",
        pass,
        format!("{} (< 2%), {elapsed:.2?} (< 30 s)", detail.join("; "))
    ));
}

#[test]
fn appendix_oracle() {
    let cfg = ExperimentConfig::defaults(Experiment::ValidateSscrb);
    assert_eq!(cfg.runs, 100);
    let start = Instant::now();
    let report = run_validate_sscrb(&cfg).unwrap();
    let elapsed = start.elapsed();
    let pass = report.max_block_error <= 1e-9 && elapsed < Duration::from_secs(10);
    assert!(verdict(
        "appendix oracle",
        pass,
        format!(
            "Hadamard vs block max rel. err {:.2e} over {} scenes (≤ 1e-9), {elapsed:.2?} (< 10 s)",
            report.max_block_error, report.scenes
        )
    ));
}

#[test]
fn projector_and_basis_suite() {
    let tol = 1e-10;
    let mut worst_u: f64 = 0.0;
    for n in 2..=8 {
        for basis in [TraceNullspace::from_eigen(n).unwrap(), TraceNullspace::from_householder(n).unwrap()] {
            let m = n * n;
            let utu = basis.u.transpose() * &basis.u - DMatrix::<f64>::identity(m - 1, m - 1);
            let vi = DMatrix::from_fn(1, m, |_, k| if k % (n + 1) == 0 { 1.0 } else { 0.0 });
            worst_u = worst_u.max(utu.amax()).max((vi * &basis.u).amax());
        }
    }

    let mut worst_proj: f64 = 0.0;
    let scenes = [
        (6, DoaScene::single(0.1, 2.0, 0.7).unwrap()),
        (
            7,
            DoaScene::new(
                vec![-0.2, 0.05, 0.3],
                CMatrix::from_fn(3, 3, |i, j| {
                    if i == j {
                        C64::new(1.0 + i as f64, 0.0)
                    } else {
                        C64::new(0.2, if i > j { 0.1 } else { -0.1 })
                    }
                }),
                1.3,
            )
            .unwrap(),
        ),
    ];
    for (n, scene) in &scenes {
        let p = block_terms(&UlaModel::new(*n).unwrap(), scene).unwrap().proj_delta_perp;
        worst_proj = worst_proj
            .max((&p * &p - &p).camax())
            .max((&p - p.adjoint()).camax());
    }

    let mut worst_t: f64 = 0.0;
    let sigmas = [
        ExperimentConfig::defaults(Experiment::Fig1).toeplitz_scatter(),
        hermitian_toeplitz(&[C64::new(2.0, 0.0), C64::new(0.3, -0.4), C64::new(0.1, 0.2)]),
    ];
    for s in &sigmas {
        let t = t_matrix(s).unwrap().t;
        worst_t = worst_t.max((t * vec(s)).camax());
    }
    let pass = worst_u <= tol && worst_proj <= tol && worst_t <= tol;
    assert!(verdict(
        "projector/U suite",
        pass,
        format!(
            "UᵀU, vec(I)ᵀU {worst_u:.1e}; Π⊥_Δs idempotent/Hermitian {worst_proj:.1e}; T vec(Σ₀) {worst_t:.1e} (≤ 1e-10)"
        )
    ));
}

#[test]
fn jacobian_suite() {
    let ula = UlaModel::new(7).unwrap();
    let nus = [-0.31, 0.02, 0.27];
    // D₀ against central differences of the steering vectors
    let d = ula.steering_derivative(&nus).unwrap();
    let h = 1e-6;
    let fd_d = CMatrix::from_fn(7, 3, |i, k| {
        (ula.steering_vector(nus[k] + h).unwrap()[i] - ula.steering_vector(nus[k] - h).unwrap()[i]) / (2.0 * h)
    });
    let err_d = relative_frobenius(&fd_d, &d);

    // N₀ for a mean model μ(θ) = Σ_k s_k a(ν_k)
    let amps = [C64::new(1.0, 0.5), C64::new(-0.4, 0.8), C64::new(0.3, 0.0)];
    let mean_model = FnModel::new(
        7,
        3,
        move |t| {
            let a = ula.steering_matrix(t).unwrap();
            a * CVector::from_column_slice(&amps)
        },
        |_| identity(7),
    )
    .with_analytic(
        move |t| {
            let mut d = ula.steering_derivative(t).unwrap();
            for (k, s) in amps.iter().enumerate() {
                let col = d.column(k) * *s;
                d.set_column(k, &col);
            }
            d
        },
        |_| vec![CMatrix::zeros(7, 7); 3],
    );
    let n0 = mean_model.mean_jacobian(&nus).unwrap();
    let err_n = relative_frobenius(&fd_mean_jacobian(&mean_model, &nus, 1e-6).unwrap(), &n0);

    // V₀ for the DOA covariance model
    let scene = DoaScene::new(
        nus.to_vec(),
        CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(1.5, 0.0)
            } else {
                C64::new(0.25, if i > j { 0.2 } else { -0.2 })
            }
        }),
        0.8,
    )
    .unwrap();
    let par = DoaParametric::new(ula, 3);
    let theta = par.theta_of(&scene);
    let v0 = par.scatter_jacobian(&theta).unwrap();
    let fd_v = stack_vec(&fd_scatter_derivatives(&par, &theta, 1e-6).unwrap(), 7);
    let err_v = relative_frobenius(&fd_v, &v0);

    let pass = err_d <= 1e-6 && err_n <= 1e-6 && err_v <= 1e-6;
    assert!(verdict(
        "Jacobian suite",
        pass,
        format!("N₀ {err_n:.1e}, V₀ {err_v:.1e}, D₀ {err_d:.1e} (≤ 1e-6)")
    ));
}

struct Timed {
    output: ExperimentOutput,
    elapsed: Duration,
}

fn fig1() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = ExperimentConfig::defaults(Experiment::Fig1);
        assert_eq!((cfg.runs, cfg.n, cfg.l), (10_000, 8, 24));
        let start = Instant::now();
        let output = run_fig1(&cfg).unwrap();
        Timed {
            output,
            elapsed: start.elapsed(),
        }
    })
}

fn fig2() -> &'static Timed {
    static RUN: OnceLock<Timed> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = ExperimentConfig::defaults(Experiment::Fig2);
        assert_eq!(cfg.runs, 10_000);
        let start = Instant::now();
        let output = run_fig2(&cfg).unwrap();
        Timed {
            output,
            elapsed: start.elapsed(),
        }
    })
}

fn series(out: &ExperimentOutput, metric: &str) -> Vec<(f64, f64)> {
    out.records
        .iter()
        .filter(|r| r.metric == metric)
        .map(|r| (r.lambda, r.value))
        .collect()
}

fn at(out: &ExperimentOutput, lambda: f64, metric: &str) -> f64 {
    out.find(lambda, metric).unwrap().value
}

fn spread(values: &[(f64, f64)]) -> f64 {
    let max = values.iter().map(|v| v.1).fold(f64::MIN, f64::max);
    let min = values.iter().map(|v| v.1).fold(f64::MAX, f64::min);
    (max - min) / min
}

#[test]
fn fig1_a_ordering_reverses() {
    let f = fig1();
    let o = &f.output;
    let low = (at(o, 2.0, "eps_ctyler"), at(o, 2.0, "eps_cscm"));
    let high = (at(o, 100.0, "eps_ctyler"), at(o, 100.0, "eps_cscm"));
    let pass = low.0 < low.1 && high.0 > high.1 && f.elapsed < Duration::from_secs(300);
    assert!(verdict(
        "Fig. 1 (a) Tyler/SCM ordering",
        pass,
        format!(
            "λ=2: ε_CTyler {:.4} < ε_CSCM {:.4}; λ=100: ε_CTyler {:.4} > ε_CSCM {:.4}; run {:.1?} (< 5 min)",
            low.0, low.1, high.0, high.1, f.elapsed
        )
    ));
}

#[test]
fn fig1_b_scm_approaches_bound() {
    let o = &fig1().output;
    let scm = o.find(100.0, "eps_cscm").unwrap();
    let bound = at(o, 100.0, "eps_ccscrb");
    let ratio = scm.value / bound;
    assert!(verdict(
        "Fig. 1 (b) ε_CSCM/ε_CCSCRB at λ=100",
        (1.0..=1.10).contains(&ratio),
        format!(
            "ratio {ratio:.4} ± {:.4} (1σ), required in [1, 1.10]",
            scm.stderr / bound
        )
    ));
}

#[test]
fn fig1_c_tyler_flat() {
    let s = spread(&series(&fig1().output, "eps_ctyler"));
    assert!(verdict(
        "Fig. 1 (c) ε_CTyler flat in λ",
        s <= 0.10,
        format!("(max − min)/min = {:.2}% (≤ 10%)", 100.0 * s)
    ));
}

#[test]
fn fig1_d_indices_above_bound() {
    let o = &fig1().output;
    let mut worst = f64::MAX;
    for (lambda, bound) in series(o, "eps_ccscrb") {
        for m in ["eps_cscm", "eps_ctyler"] {
            worst = worst.min(at(o, lambda, m) / bound);
        }
    }
    assert!(verdict(
        "Fig. 1 (d) indices ≥ 0.95·ε_CCSCRB",
        worst >= 0.95,
        format!("min index/bound {worst:.4}")
    ));
}

#[test]
fn fig2_regeneration() {
    let f = fig2();
    let o = &f.output;
    let tyler = series(o, "rho_tyler");
    let flat = spread(&tyler);
    let low = (at(o, 2.0, "rho_tyler"), at(o, 2.0, "rho_scm"));
    let high = (at(o, 100.0, "rho_scm"), at(o, 100.0, "rho_tyler"));
    let mut worst = f64::MAX;
    for (lambda, bound) in series(o, "sscrb") {
        for m in ["rho_scm", "rho_tyler"] {
            worst = worst.min(at(o, lambda, m) / bound);
        }
    }
    let pass = flat <= 0.15
        && low.0 < low.1
        && high.0 < high.1
        && worst >= 0.95
        && f.elapsed < Duration::from_secs(600);
    assert!(verdict(
        "Fig. 2 regeneration",
        pass,
        format!(
            "ρ_Tyler spread {:.2}% (≤ 15%); λ=2 ρ_Tyler {:.3e} < ρ_SCM {:.3e}; λ=100 ρ_SCM {:.3e} < ρ_Tyler {:.3e}; min MSE/SSCRB {worst:.3}; run {:.1?} (< 10 min)",
            100.0 * flat, low.0, low.1, high.0, high.1, f.elapsed
        )
    ));
}

#[test]
fn tyler_invariances() {
    let sigma0 = ExperimentConfig::defaults(Experiment::Fig1).toeplitz_scatter();
    let cfg = TylerConfig::default();
    let gens = [
        DensityGenerator::gaussian(),
        DensityGenerator::complex_t_unit(2.0).unwrap(),
        DensityGenerator::complex_t_with_power(100.0, 4.0).unwrap(),
    ];
    let mut exact_scale = true;
    let mut worst_scale: f64 = 0.0;
    let mut worst_paired: f64 = 0.0;
    let mut same_iterations = true;
    for trial in 0..20u64 {
        let outputs: Vec<_> = gens
            .iter()
            .enumerate()
            .map(|(g, gen)| {
                let dist = CesDistribution::zero_mean(sigma0.clone(), gen.clone()).unwrap();
                let (mut dir, _) = split_streams(&[7, trial]);
                let (_, mut rad) = split_streams(&[8, trial, g as u64]);
                let z = dist.sample_snapshots_split(24, &mut dir, &mut rad).unwrap();
                (z.clone(), tyler_constrained(&z, &cfg).unwrap())
            })
            .collect();
        let (z, base) = &outputs[0];
        for (_, other) in &outputs[1..] {
            worst_paired = worst_paired.max(relative_frobenius(&other.scatter, &base.scatter));
            same_iterations &= other.iterations == base.iterations;
        }
        let doubled = tyler_constrained(&z.scale(0.25), &cfg).unwrap();
        exact_scale &= doubled.scatter == base.scatter;
        let mut rescaled = z.clone();
        for (l, mut col) in rescaled.column_iter_mut().enumerate() {
            col.scale_mut(0.3 + 1.7 * l as f64);
        }
        let r = tyler_constrained(&rescaled.scale(3.7), &cfg).unwrap();
        worst_scale = worst_scale.max(relative_frobenius(&r.scatter, &base.scatter));
    }
    let pass = exact_scale && worst_scale <= 1e-12 && worst_paired <= 1e-12 && same_iterations;
    assert!(verdict(
        "Tyler invariances",
        pass,
        format!(
            "power-of-two scaling bitwise equal: {exact_scale}; per-snapshot scaling {worst_scale:.1e}; \
             paired-seed across generators {worst_paired:.1e} with equal iteration counts: {same_iterations} (≤ 1e-12)"
        )
    ));
}
