use mcbeam::channel::*;
use mcbeam::linalg::HermitianMatrix;
use mcbeam::quadrature::gauss_laguerre;
use mcbeam::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal, StandardNormal};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    c(rng.sample::<f64, _>(StandardNormal) * h, rng.sample::<f64, _>(StandardNormal) * h)
}

/// Kolmogorov–Smirnov distance of sorted samples from `cdf`. `cdf` is only
/// evaluated at every `stride`-th sample; between checkpoints the distance
/// is bounded using the monotonicity of both functions.
fn ks_upper_bound(sorted: &[f64], cdf: impl Fn(f64) -> f64, stride: usize) -> f64 {
    let n = sorted.len() as f64;
    let idx: Vec<usize> = (0..sorted.len()).step_by(stride).chain([sorted.len() - 1]).collect();
    let f: Vec<f64> = idx.iter().map(|&i| cdf(sorted[i])).collect();
    let mut d: f64 = f[0].max(1.0 / n - f[0]);
    for w in 0..idx.len() - 1 {
        let (i, j) = (idx[w], idx[w + 1]);
        // empirical cdf is (i+1)/n at sorted[i] and below (j+1)/n before sorted[j]
        d = d.max((j as f64 + 1.0) / n - f[w]).max(f[w + 1] - i as f64 / n);
    }
    d
}

#[test]
fn exponential_model_examples() {
    let r = make_correlation::<f64>(&CorrelationModel::Exponential { rho: 0.0, phase: 0.0 }, 5).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((r.get(i, j) - want).norm() < 1e-12);
        }
    }
    let r = make_correlation::<f64>(&CorrelationModel::Exponential { rho: 0.9, phase: 0.0 }, 3).unwrap();
    let want = [[1.0, 0.9, 0.81], [0.9, 1.0, 0.9], [0.81, 0.9, 1.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((r.get(i, j) - want[i][j]).norm() < 1e-12);
        }
    }
    assert!(make_correlation::<f64>(&CorrelationModel::Exponential { rho: 1.0, phase: 0.0 }, 3).is_err());
    assert!(make_correlation::<f64>(&CorrelationModel::LocalScattering { angle: 0.0, spread: 0.0 }, 3).is_err());
}

#[test]
fn local_scattering_matches_angle_monte_carlo() {
    let (angle, spread, n) = (0.0, 0.1, 4);
    let r = make_correlation::<f64>(&CorrelationModel::LocalScattering { angle, spread }, n).unwrap();
    assert!(r.hermitian_residual() < 1e-12);
    assert!(r.eigenvalues().iter().all(|&v| v >= -1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let normal = Normal::new(0.0, spread).unwrap();
    let draws = 1_000_000;
    let mut acc = vec![c(0.0, 0.0); n * n];
    for _ in 0..draws {
        let s = (angle + rng.sample(normal)).sin();
        for i in 0..n {
            for j in 0..n {
                acc[i * n + j] += Complex64::from_polar(1.0, std::f64::consts::PI * (i as f64 - j as f64) * s);
            }
        }
    }
    for i in 0..n {
        assert!((r.get(i, i).re - 1.0).abs() < 1e-6);
        for j in 0..n {
            let mc = acc[i * n + j] / draws as f64;
            assert!((r.get(i, j) - mc).norm() < 1e-3, "entry ({i},{j})");
        }
    }
}

#[test]
fn effective_snr_examples() {
    let id = HermitianMatrix::<f64>::identity(4);
    let e = ChannelEnsemble::new(vec![id.clone(), id.clone(), id], 10.0).unwrap();
    let p = PhaseVector::new(vec![0.3, -2.0, 1.0, 3.0]);
    for g in e.effective_snrs(&p).unwrap() {
        assert!((g - 10.0).abs() < 1e-12);
    }

    // rank-1 with phases aligned to a: phi^H a a^H phi = (sum |a_n|)^2
    let a = [c(0.5, -1.0), c(-0.3, 0.2), c(1.1, 0.4)];
    let e = ChannelEnsemble::new(vec![HermitianMatrix::outer(&a)], 0.0).unwrap();
    let aligned = PhaseVector::from_phi(&a);
    let g = e.effective_snrs(&aligned).unwrap()[0];
    let phi = aligned.phi();
    let direct: Complex64 = phi.iter().zip(&a).map(|(p, x)| p.conj() * x).sum();
    let l1: f64 = a.iter().map(|x| x.norm()).sum();
    assert!((g - direct.norm_sqr() / 3.0).abs() < 1e-12);
    assert!((g - l1 * l1 / 3.0).abs() < 1e-12);

    // phi orthogonal to a: a = (1, 1), phi = (1, -1)
    let a = [c(1.0, 0.0), c(1.0, 0.0)];
    let e = ChannelEnsemble::new(vec![HermitianMatrix::outer(&a)], 0.0).unwrap();
    let p = PhaseVector::new(vec![0.0, std::f64::consts::PI]);
    assert!(matches!(e.effective_snrs(&p), Err(Error::NulledUser { user: 0, .. })));
}

#[test]
fn ensemble_validation() {
    let id = HermitianMatrix::<f64>::identity(2);
    assert!(ChannelEnsemble::<f64>::new(vec![], 0.0).is_err());
    assert!(ChannelEnsemble::new(vec![id.clone(), HermitianMatrix::identity(3)], 0.0).is_err());
    assert!(ChannelEnsemble::new(vec![id.clone()], f64::NAN).is_err());
    let skew = HermitianMatrix::from_row_major(2, vec![c(1.0, 0.0), c(0.5, 0.0), c(0.1, 0.0), c(1.0, 0.0)]).unwrap();
    assert!(ChannelEnsemble::new(vec![skew], 0.0).is_err());
    let indefinite = HermitianMatrix::from_row_major(2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]).unwrap();
    assert!(ChannelEnsemble::new(vec![indefinite], 0.0).is_err());
    let zero = HermitianMatrix::from_row_major(2, vec![c(0.0, 0.0); 4]).unwrap();
    assert!(ChannelEnsemble::new(vec![zero], 0.0).is_err());
    let e = ChannelEnsemble::new(vec![id], 0.0).unwrap();
    assert!(matches!(e.quadratic_forms(&PhaseVector::zeros(3)), Err(Error::DimensionMismatch(_))));
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    let model = EnsembleModel::Exponential { rho: 0.7 };
    let a = ChannelEnsemble::<f64>::generate(4, 5, 3.0, model, 42).unwrap();
    let b = ChannelEnsemble::<f64>::generate(4, 5, 3.0, model, 42).unwrap();
    let other = ChannelEnsemble::<f64>::generate(4, 5, 3.0, model, 43).unwrap();
    assert_eq!(a.correlations(), b.correlations());
    assert_ne!(a.correlations(), other.correlations());
    assert_eq!(a.provenance().unwrap().seed, 42);

    let back = ChannelEnsemble::<f64>::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back.correlations(), a.correlations());
    assert_eq!(back.snr_db(), 3.0);
    assert_eq!(back.provenance(), a.provenance());
    let ls = EnsembleModel::LocalScattering { spread: 0.2, max_angle: 1.0 };
    let e = ChannelEnsemble::<f64>::generate(3, 6, 0.0, ls, 1).unwrap();
    assert_eq!((e.users(), e.antennas()), (3, 6));
}

#[test]
fn projected_channel_variance_is_quadratic_form() {
    let e = ChannelEnsemble::<f64>::generate(1, 5, 0.0, EnsembleModel::Exponential { rho: 0.7 }, 8).unwrap();
    let r = &e.correlations()[0];
    let root = r.sqrt_psd();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = PhaseVector::random(5, &mut rng);
    let f = p.beamformer();
    let draws = 1_000_000;
    let mut s2 = 0.0;
    for _ in 0..draws {
        let g: Vec<Complex64> = (0..5).map(|_| cn(&mut rng)).collect();
        let h = root.mul_vec(&g);
        let y: Complex64 = f.iter().zip(&h).map(|(a, b)| a.conj() * b).sum();
        s2 += y.norm_sqr();
    }
    let want = r.quad_form(&f);
    assert!((s2 / draws as f64 / want - 1.0).abs() < 0.01);
}

#[test]
fn min_law_examples() {
    assert_eq!(min_snr_law(&[2.0]).unwrap().gamma_non, 2.0);
    assert!((min_snr_law(&[1.0f64; 4]).unwrap().gamma_non - 0.25).abs() < 1e-15);
    let law = min_snr_law(&[1.0f64, 2.0]).unwrap();
    assert!((law.gamma_non - 2.0 / 3.0).abs() < 1e-15);
    assert!((law.cdf(2.0 / 3.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    assert!(min_snr_law(&[1.0, 0.0]).is_err());
    assert!(min_snr_law::<f64>(&[]).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (e1, e2) = (Exp::<f64>::new(1.0).unwrap(), Exp::<f64>::new(0.5).unwrap());
    let mut xs: Vec<f64> = (0..1_000_000).map(|_| rng.sample(e1).min(rng.sample(e2))).collect();
    xs.sort_by(f64::total_cmp);
    assert!(ks_upper_bound(&xs, |x| law.cdf(x), 1) < 0.002);
}

#[test]
fn mrc_equal_means_is_erlang() {
    let law = mrc_law(&[1.5; 3], 1e-10).unwrap();
    assert_eq!(law.psi()[0], 1.0);
    assert!(law.psi()[1..].iter().all(|&p| p == 0.0));
    for x in [0.1, 1.0, 4.0, 12.0] {
        let v: f64 = x / 1.5;
        let erlang = v * v * (-v).exp() / (2.0 * 1.5);
        assert!((law.pdf(x) - erlang).abs() < 1e-14);
    }
}

#[test]
fn mrc_two_users_is_hypoexponential() {
    let law = mrc_law(&[1.0, 2.0], 1e-10).unwrap();
    assert!(law.tail_bound() < 1e-10);
    for i in 0..=199 {
        let x = 0.1 + i as f64 * 0.1;
        let closed = (-x / 2.0).exp() - (-x).exp();
        assert!((law.pdf(x) - closed).abs() < 1e-8, "x = {x}");
    }
    assert!((law.cdf(3.0 * 1e3) - 1.0).abs() < 1e-8);
    assert_eq!(law.cdf(0.0), 0.0);
}

/// Normalization of the truncated density via Gauss–Laguerre after the
/// substitution `v = u / (1 - beta)`, which turns the `e^{-(1-beta) v}`
/// decay of the series into the rule's own weight.
fn laguerre_mass(law: &MrcLaw<f64>) -> f64 {
    let gmin = law.gamma_min();
    let beta = law.gammas().iter().map(|g| 1.0 - gmin / g).fold(0.0, f64::max);
    let s = 1.0 - beta;
    let rule = gauss_laguerre::<f64>(150).unwrap();
    rule.integrate(|u| {
        let v = u / s;
        (law.ln_scaled_series(v) - v + u).exp() / s
    })
}

#[test]
fn mrc_mass_and_ks_on_random_ensembles() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..5 {
        let k = rng.random_range(2..=6);
        let gammas: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..5.0)).collect();
        let law = mrc_law(&gammas, 1e-10).unwrap();
        assert!(law.psi().iter().all(|&p| p >= 0.0));
        let mass = laguerre_mass(&law);
        assert!((mass - 1.0).abs() <= 10.0 * law.tail_bound().max(1e-12), "trial {trial}: mass {mass}");

        let exps: Vec<Exp<f64>> = gammas.iter().map(|g| Exp::new(1.0 / g).unwrap()).collect();
        let mut xs: Vec<f64> = (0..1_000_000).map(|_| exps.iter().map(|d| rng.sample(d)).sum()).collect();
        xs.sort_by(f64::total_cmp);
        let ks = ks_upper_bound(&xs, |x| law.cdf(x), 100);
        assert!(ks < 0.002, "trial {trial}: KS bound {ks}");
        for x in [0.01, 0.5, 3.0, 20.0] {
            assert!(law.pdf(x) >= 0.0);
        }
    }
}

#[test]
fn series_gives_up_on_extreme_disparity() {
    assert!(matches!(mrc_law(&[1e-6, 1.0, 1.0], 1e-10), Err(Error::SeriesTruncation { .. })));
    assert!(mrc_law(&[1.0, -1.0], 1e-10).is_err());
}

#[test]
fn harmonic_min_sum_ordering() {
    let model = EnsembleModel::Exponential { rho: 0.7 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..100 {
        let e = ChannelEnsemble::<f64>::generate(4, 5, 0.0, model, seed).unwrap();
        let g = e.effective_snrs(&PhaseVector::random(5, &mut rng)).unwrap();
        let h = min_snr_law(&g).unwrap().gamma_non;
        let min = g.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(h <= min && min <= g.iter().sum::<f64>());
    }
}

proptest! {
    #[test]
    fn phase_vectors_are_feasible(thetas in prop::collection::vec(-50.0f64..50.0, 1..12)) {
        let p = PhaseVector::new(thetas);
        let pi = std::f64::consts::PI;
        prop_assert!(p.thetas().iter().all(|&t| t > -pi && t <= pi));
        prop_assert!(p.phi().iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        let f2: f64 = p.beamformer().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((f2 - 1.0).abs() < 1e-14);
        let back = PhaseVector::from_phi(&p.phi());
        for (a, b) in back.thetas().iter().zip(p.thetas()) {
            let d = (a - b).abs();
            prop_assert!(d < 1e-12 || (d - 2.0 * pi).abs() < 1e-12);
        }
    }

    #[test]
    fn mrc_psi_nonnegative_and_cdf_monotone(gammas in prop::collection::vec(0.1f64..10.0, 1..6)) {
        let law = mrc_law(&gammas, 1e-10).unwrap();
        prop_assert_eq!(law.psi()[0], 1.0);
        prop_assert!(law.psi().iter().all(|&p| p >= 0.0));
        let mut last = 0.0;
        for i in 0..40 {
            let f = law.cdf(i as f64 * 0.5);
            prop_assert!(f >= last - 1e-15 && f <= 1.0);
            last = f;
        }
    }
}
