use std::f64::consts::{PI, TAU};

use kpz_sync::cone::{birkhoff, hilbert_distance, normalize, projective_apply, Density, PositiveKernel};
use kpz_sync::field::{GridFunction, TorusGrid};
use kpz_sync::noise::{FbmNoise, FgnMethod, SpatialProfile};
use kpz_sync::rds::{
    apply_cocycle, estimate_lyapunov, fit_line, kernel_matrix, run_forward_sync, run_pullback, static_krein_rutman,
    Cocycle, LyapunovEstimate, SyncOptions,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NU: f64 = 3.0 / (4.0 * PI * PI);

fn fractional(n: usize, window: std::ops::Range<i64>, seed: u64) -> Cocycle {
    let g = TorusGrid::new(n).unwrap();
    let profile = SpatialProfile::new(GridFunction::from_fn(g, |x| (TAU * x).sin()));
    let noise = FbmNoise::materialize(0.75, 16, window, seed, FgnMethod::Auto).unwrap();
    Cocycle::fractional(g, 32, NU, profile, noise).unwrap()
}

fn bump(g: TorusGrid, a: f64, phase: f64) -> GridFunction {
    GridFunction::from_fn(g, |x| (a * (TAU * (x - phase)).cos()).exp())
}

#[test]
fn krein_rutman_matches_dense_eigensolver() {
    let g = TorusGrid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = g.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = rng.random_range(0.5..2.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let entries: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect();
    let k = PositiveKernel::new(g, entries).unwrap();
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iamax();
    let v = eig.eigenvectors.column(top);
    let sign = v[0].signum();
    let oracle = normalize(&GridFunction::new(g, v.iter().map(|x| x * sign).collect()).unwrap()).unwrap();
    let kr = static_krein_rutman(&k, 1e-13).unwrap();
    assert!(hilbert_distance(&kr, &oracle).unwrap() < 1e-8);
}

#[test]
fn heat_kernel_matches_spectral_sum() {
    let g = TorusGrid::new(32).unwrap();
    let c = Cocycle::zero(g, 64, 1.0).unwrap();
    let t = 0.25;
    let k = kernel_matrix(&c, 0, t).unwrap();
    for i in 0..g.len() {
        for j in 0..g.len() {
            let r = g.point(i) - g.point(j);
            let oracle = 1.0
                + 2.0
                    * (1..16)
                        .map(|m| (-4.0 * PI * PI * (m * m) as f64 * t).exp() * (TAU * m as f64 * r).cos())
                        .sum::<f64>();
            assert!((k.get(i, j) - oracle).abs() < 1e-6, "{i},{j}");
        }
    }
    let uniform = static_krein_rutman(&k, 1e-13).unwrap();
    assert!(hilbert_distance(&uniform, &Density::uniform(g)).unwrap() < 1e-12);
}

#[test]
fn kernels_are_strictly_positive_and_reproduce_solutions() {
    let c = fractional(32, 0..4, 3);
    let w = Cocycle::white(TorusGrid::new(32).unwrap(), 800, NU, 3).unwrap();
    for c in [c, w] {
        let g = c.grid();
        let k = kernel_matrix(&c, 1, 1.0).unwrap();
        assert!(k.entries().iter().all(|&v| v > 0.0));
        let u0 = bump(g, 0.8, 0.3);
        let direct = apply_cocycle(&c, 1, 1.0, &u0).unwrap();
        let via = GridFunction::new(g, k.apply(u0.values())).unwrap();
        assert!(direct.sup_distance(&via).unwrap() < 1e-9 * direct.sup_norm());
        for j in [0, 7, 31] {
            let mut delta = vec![0.0; g.len()];
            delta[j] = 1.0 / g.dx();
            let col = apply_cocycle(&c, 1, 1.0, &GridFunction::new(g, delta).unwrap()).unwrap();
            let max_diff = col
                .values()
                .iter()
                .zip(k.column(j))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_diff < 1e-12 * col.sup_norm());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cocycle_property(s in 0usize..3, t_steps in 1usize..64, a in 0.1f64..2.0, phase in 0.0f64..1.0) {
        let c = fractional(16, 0..6, 13);
        let g = c.grid();
        let u0 = bump(g, a, phase);
        let t = t_steps as f64 / 32.0;
        let whole = apply_cocycle(&c, 0, s as f64 + t, &u0).unwrap();
        let first = apply_cocycle(&c, 0, s as f64, &u0).unwrap();
        let split = apply_cocycle(&c, s as i64, t, &first).unwrap();
        prop_assert!(whole.sup_distance(&split).unwrap() < 1e-9 * whole.sup_norm());
    }

    #[test]
    fn projective_images_contract(a in 0.1f64..2.0, b in 0.1f64..2.0, phase in 0.0f64..1.0) {
        let c = fractional(16, 0..4, 2);
        let g = c.grid();
        let k = kernel_matrix(&c, 2, 1.0).unwrap();
        let f = normalize(&bump(g, a, 0.0)).unwrap();
        let h = normalize(&bump(g, b, phase)).unwrap();
        let before = hilbert_distance(&f, &h).unwrap();
        let after = hilbert_distance(&projective_apply(&k, &f).unwrap(), &projective_apply(&k, &h).unwrap()).unwrap();
        prop_assert!(after <= birkhoff(&k).unwrap().tau * before + 1e-12);
    }
}

#[test]
fn forward_distance_is_non_increasing() {
    let c = fractional(32, 0..20, 6);
    let g = c.grid();
    let r = run_forward_sync(
        &c,
        &bump(g, 1.5, 0.0),
        &bump(g, -1.0, 0.2),
        16,
        SyncOptions { track_tau: true },
    )
    .unwrap();
    let resolved = r.underflow_at.unwrap_or(r.d_h.len());
    for w in r.d_h[..resolved].windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", r.d_h);
    }
    assert!(r.bound_excess().unwrap() <= 1e-12);
    let lyap = r.lyapunov.as_ref().unwrap();
    let fit = r.fit.unwrap();
    assert!(fit.slope <= lyap.mean + 2.0 * (fit.slope_se + lyap.ci_half_width));
}

#[test]
fn fractional_lyapunov_is_negative() {
    let est = estimate_lyapunov(&fractional(32, 0..64, 1), 64).unwrap();
    assert!(est.samples.iter().all(|&s| s <= 1e-12));
    assert!(
        est.mean + est.ci_half_width < 0.0,
        "{} ± {}",
        est.mean,
        est.ci_half_width
    );
}

#[test]
fn pullback_limit_is_independent_of_data_and_invariant() {
    let c = fractional(32, -21..2, 9);
    let g = c.grid();
    let a = run_pullback(&c, &bump(g, 1.2, 0.1), 20, 0.0).unwrap();
    let b = run_pullback(&c, &bump(g, -0.7, 0.6), 20, 0.0).unwrap();
    assert!(a.monotone);
    assert!(hilbert_distance(&a.limit, &b.limit).unwrap() < 1e-8);
    let at_one = run_pullback(&c, &bump(g, 1.2, 0.1), 20, 1.0).unwrap();
    let pushed = normalize(&apply_cocycle(&c, 0, 1.0, a.limit.as_function()).unwrap()).unwrap();
    let tail = *a.diameters.last().unwrap();
    assert!(hilbert_distance(&pushed, &at_one.limit).unwrap() <= tail.max(1e-12));
}

#[test]
fn line_fit_agrees_with_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.5).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.3 * x + rng.random_range(-0.2..0.2)).collect();
    let fit = fit_line(&xs, &ys).unwrap();
    let x = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    let y = DMatrix::from_column_slice(ys.len(), 1, &ys);
    let xtx = x.transpose() * &x;
    let inv = xtx.clone().try_inverse().unwrap();
    let beta = &inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let sigma2 = resid.norm_squared() / (xs.len() - 2) as f64;
    assert!((fit.intercept - beta[0]).abs() < 1e-12);
    assert!((fit.slope - beta[1]).abs() < 1e-12);
    assert!((fit.slope_se - (sigma2 * inv[(1, 1)]).sqrt()).abs() < 1e-12);
}

#[test]
fn lyapunov_statistics_by_hand() {
    let samples: Vec<f64> = (0..100).map(|i| -1.0 - 0.01 * ((i * 37) % 11) as f64).collect();
    let est = LyapunovEstimate::from_samples(samples.clone()).unwrap();
    assert_eq!(est.batches, 10);
    let means: Vec<f64> = samples.chunks(10).map(|c| c.iter().sum::<f64>() / 10.0).collect();
    let m = means.iter().sum::<f64>() / 10.0;
    let se = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 9.0 / 10.0).sqrt();
    assert!((est.std_error - se).abs() < 1e-15);
    // t_{0.975, 9}
    assert!((est.ci_half_width / se - 2.262157).abs() < 1e-5);
    assert!((est.mean - samples.iter().sum::<f64>() / 100.0).abs() < 1e-15);
    assert!((est.running_average[99] - est.mean).abs() < 1e-15);
}
