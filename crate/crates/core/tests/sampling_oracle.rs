//! The modular-variate samplers against their exact distribution functions.

use cesbound::ces_model::{sample_unit_complex_sphere, DensityGenerator};
use cesbound::rng::stream;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_lr;

const DRAWS: usize = 20_000;

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`.
fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the one-sample KS test.
fn critical() -> f64 {
    1.63 / (DRAWS as f64).sqrt()
}

#[test]
fn complex_t_modular_variate_is_scaled_beta_prime() {
    // Q = s X / (1 − X) with X ~ Beta(N, λ), so F_Q(q) = I_{q/(s+q)}(N, λ).
    for (i, &(lambda, n)) in [(2.0, 2usize), (3.0, 4), (10.0, 8), (2.5, 8)].iter().enumerate() {
        for gen in [
            DensityGenerator::complex_t_unit(lambda).unwrap(),
            DensityGenerator::complex_t_with_power(lambda, 4.0).unwrap(),
        ] {
            let s = match gen.kind {
                cesbound::ces_model::GeneratorKind::ComplexT { shape, scale } => shape / scale,
                _ => unreachable!(),
            };
            let mut rng = stream(&[11, i as u64, s.to_bits()]);
            let draws: Vec<f64> = (0..DRAWS)
                .map(|_| gen.sample_modular_variate(n, &mut rng).unwrap())
                .collect();
            let d = ks_statistic(draws, |q| beta_reg(n as f64, lambda, q / (s + q)));
            assert!(d < critical(), "λ = {lambda}, N = {n}: KS {d}");
        }
    }
}

#[test]
fn gaussian_modular_variate_is_gamma() {
    let gen = DensityGenerator::gaussian();
    for n in [1usize, 4, 8] {
        let mut rng = stream(&[12, n as u64]);
        let draws: Vec<f64> = (0..DRAWS)
            .map(|_| gen.sample_modular_variate(n, &mut rng).unwrap())
            .collect();
        let d = ks_statistic(draws, |q| gamma_lr(n as f64, q));
        assert!(d < critical(), "N = {n}: KS {d}");
    }
}

#[test]
fn sampled_pdf_matches_displayed_pdf_moments() {
    // E{Q} and E{log Q} by quadrature against sample means.
    let gen = DensityGenerator::complex_t_unit(5.0).unwrap();
    let n = 4;
    let mut rng = stream(&[13]);
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| gen.sample_modular_variate(n, &mut rng).unwrap())
        .collect();
    let m = draws.iter().sum::<f64>() / DRAWS as f64;
    let sd = (draws.iter().map(|q| (q - m).powi(2)).sum::<f64>() / DRAWS as f64).sqrt();
    assert!((m - gen.mean_modular_variate_quadrature(n).unwrap()).abs() < 4.0 * sd / (DRAWS as f64).sqrt());
    let ml = draws.iter().map(|q| q.ln()).sum::<f64>() / DRAWS as f64;
    let ql = gen.expectation_quadrature(n, f64::ln).unwrap();
    assert!((ml - ql).abs() < 0.02, "{ml} vs {ql}");
}

#[test]
fn sphere_draws_are_isotropic() {
    // E{u uᴴ} = I/N and E{u uᵀ} = 0.
    let n = 3;
    let mut rng = stream(&[14]);
    let mut second = nalgebra::DMatrix::<num_complex::Complex64>::zeros(n, n);
    let mut pseudo = second.clone();
    for _ in 0..DRAWS {
        let u = sample_unit_complex_sphere(n, &mut rng);
        second += &u * u.adjoint();
        pseudo += &u * u.transpose();
    }
    second /= num_complex::Complex64::new(DRAWS as f64, 0.0);
    pseudo /= num_complex::Complex64::new(DRAWS as f64, 0.0);
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 / n as f64 } else { 0.0 };
            assert!((second[(i, j)].re - want).abs() < 0.01 && second[(i, j)].im.abs() < 0.01);
            assert!(pseudo[(i, j)].norm() < 0.015);
        }
    }
}

#[test]
fn mean_and_scatter_scores_are_uncorrelated() {
    use cesbound::bounds_joint::efficient_scores_from;
    use cesbound::ces_model::{CesDistribution, ModularVariateSample};
    use cesbound::linalg::hermitian_toeplitz;
    use cesbound::rng::split_streams;
    use num_complex::Complex64;

    let sigma = hermitian_toeplitz(&[Complex64::new(1.0, 0.0), Complex64::new(0.4, 0.3), Complex64::new(0.1, 0.0)]);
    let dist = CesDistribution::zero_mean(sigma, DensityGenerator::complex_t_unit(4.0).unwrap()).unwrap();
    let mut cross = nalgebra::DMatrix::<Complex64>::zeros(3, 9);
    let mut mean_sq = 0.0;
    let mut scatter_sq = 0.0;
    for r in 0..DRAWS {
        let (mut dir, mut rad) = split_streams(&[15, r as u64]);
        let sample = ModularVariateSample::draw(dist.generator(), 3, &mut dir, &mut rad).unwrap();
        let s = efficient_scores_from(&dist, &sample).unwrap();
        cross += &s.mean * s.scatter.adjoint();
        mean_sq += s.mean.norm_squared();
        scatter_sq += s.scatter.norm_squared();
    }
    let d = DRAWS as f64;
    // normalized cross-covariance, O(1/√draws) under independence
    let corr = cross.norm() / d / ((mean_sq / d) * (scatter_sq / d)).sqrt();
    assert!(corr < 0.05, "{corr}");
}
