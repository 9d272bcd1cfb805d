mod common;

use common::{ou_variance, rel};
use fbm_cond::mc::{
    empirical_conditional_stats, gen_fbm_paths, gen_fou_paths, terminal_values, ConditionalSampler, ConditionalStats,
    McConfig, ProcessKind, Scheme,
};
use fbm_cond::model::{increment_autocov, FouParams};
use proptest::prelude::*;

fn cfg(dt: f64, n: usize, seed: u64, scheme: Scheme) -> McConfig {
    McConfig {
        dt,
        n_paths: n,
        seed,
        scheme,
    }
}

// sample variance within `z` standard errors of the truth
fn var_close(samples: &[f64], truth: f64, z: f64) -> bool {
    let st = ConditionalStats::from_samples(samples).unwrap();
    let se = truth * (2.0 / (samples.len() - 1) as f64).sqrt();
    (st.variance - truth).abs() < z * se
}

#[test]
fn fbm_terminal_variance_both_schemes() {
    for scheme in [Scheme::Spectral, Scheme::Cholesky] {
        for h in [0.2, 0.5, 0.8] {
            let c = cfg(0.05, 20_000, 11, scheme);
            let x = terminal_values(ProcessKind::Fbm { hurst: h }, 2.0, &c).unwrap();
            assert!(var_close(&x, 2f64.powf(2.0 * h), 4.0), "{scheme:?} H={h}");
        }
    }
}

#[test]
fn increment_covariance_is_reproduced() {
    let h = 0.75;
    let b = gen_fbm_paths(h, 1.0, &cfg(0.1, 20_000, 5, Scheme::Spectral)).unwrap();
    // lag-1 covariance of unit-scaled increments
    let scale = 0.1f64.powf(2.0 * h);
    let mut acc = 0.0;
    for p in b.paths() {
        acc += (p[4] - p[3]) * (p[5] - p[4]);
    }
    let est = acc / b.paths().len() as f64 / scale;
    assert!((est - increment_autocov(1.0, h).unwrap()).abs() < 0.05);
}

#[test]
fn ou_euler_variance_at_half() {
    let p = FouParams::new(0.5, 1.0, 0.3, 0.5).unwrap();
    let c = cfg(0.01, 20_000, 3, Scheme::Spectral);
    let x = terminal_values(ProcessKind::Fou { params: p, x0: 1.0 }, 2.0, &c).unwrap();
    // Euler recursion variance: sigma^2 dt sum q^{2k}
    let q: f64 = 1.0 - 0.5 * 0.01;
    let euler = 0.09 * 0.01 * (1.0 - q.powi(400)) / (1.0 - q * q);
    assert!(rel(euler, ou_variance(0.5, 0.3, 2.0)) < 1e-2);
    assert!(var_close(&x, euler, 4.0));
    let st = ConditionalStats::from_samples(&x).unwrap();
    assert!((st.mean - 1.0).abs() < 4.0 * st.se_mean);
}

#[test]
fn reproducible_by_seed() {
    let c = cfg(0.1, 50, 42, Scheme::Spectral);
    let a = gen_fbm_paths(0.3, 2.0, &c).unwrap();
    let b = gen_fbm_paths(0.3, 2.0, &c).unwrap();
    assert_eq!(a.paths(), b.paths());
    let d = gen_fbm_paths(0.3, 2.0, &McConfig { seed: 43, ..c }).unwrap();
    assert_ne!(a.paths(), d.paths());
    // path i does not depend on how many paths are drawn
    let more = gen_fbm_paths(0.3, 2.0, &McConfig { n_paths: 80, ..c }).unwrap();
    assert_eq!(&more.paths()[..50], a.paths());
}

#[test]
fn csv_dump_has_one_row_per_grid_point() {
    let p = FouParams::new(0.5, 0.0, 0.3, 0.6).unwrap();
    let b = gen_fou_paths(&p, 1.0, &cfg(0.25, 3, 1, Scheme::Cholesky), 0.0).unwrap();
    let mut out = Vec::new();
    b.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1 + 5);
    assert_eq!(rows[1].split(',').count(), 1 + 3);
}

#[test]
fn brownian_continuations_ignore_the_past() {
    let s = ConditionalSampler::new(0.5, 0.1, 10, 20).unwrap();
    let past: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
    assert!(s.shift(&past).unwrap().iter().all(|m| m.abs() < 1e-12));
}

#[test]
fn conditional_fbm_variance_matches_schur_complement() {
    // Var(B_t | increments up to s) on the grid, from the increment covariance
    let (h, dt, n1, n): (f64, f64, usize, usize) = (0.7, 0.1, 10, 20);
    let scale = dt.powf(2.0 * h);
    let cov = |i: usize, j: usize| scale * increment_autocov((i as f64 - j as f64).abs(), h).unwrap();
    // Schur complement: sum over the future block minus its projection on the past
    let fut: f64 = (n1..n).flat_map(|i| (n1..n).map(move |j| (i, j))).map(|(i, j)| cov(i, j)).sum();
    let a: Vec<Vec<f64>> = (0..n1).map(|i| (0..n1).map(|j| cov(i, j)).collect()).collect();
    let b: Vec<f64> = (0..n1).map(|i| (n1..n).map(|j| cov(i, j)).sum()).collect();
    let y = solve(a, b.clone());
    let truth = fut - b.iter().zip(&y).map(|(u, v)| u * v).sum::<f64>();

    let s = ConditionalSampler::new(h, dt, n1, n).unwrap();
    let past = vec![0.0; n1 + 1];
    let x = s.terminal_samples(&ProcessKind::Fbm { hurst: h }, &past, 0.0, 40_000, 9).unwrap();
    assert!(var_close(&x, truth, 4.0), "truth {truth}");
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        x[r] = (b[r] - (r + 1..n).map(|k| a[r][k] * x[k]).sum::<f64>()) / a[r][r];
    }
    x
}

#[test]
fn empirical_stats_at_origin_are_ensemble_stats() {
    let c = cfg(0.05, 2_000, 2, Scheme::Spectral);
    let b = gen_fbm_paths(0.4, 2.0, &c).unwrap();
    let st = empirical_conditional_stats(&b, 0.0, 2.0, 1e-9).unwrap();
    let direct = ConditionalStats::from_samples(&b.column(40)).unwrap();
    assert_eq!(st, direct);
    assert!(empirical_conditional_stats(&b, 1.0, 2.0, 1e-9).is_ok());
}

#[test]
fn guards() {
    assert!(gen_fbm_paths(0.5, 1.0, &cfg(0.1, 0, 0, Scheme::Spectral)).is_err());
    assert!(gen_fbm_paths(0.5, 1.0, &cfg(0.0, 10, 0, Scheme::Spectral)).is_err());
    assert!(gen_fbm_paths(0.5, 0.0, &cfg(0.1, 10, 0, Scheme::Spectral)).is_err());
    assert!(ConditionalStats::from_samples(&[1.0; 10]).is_err());
    assert!(ConditionalSampler::new(0.5, 0.1, 30, 20).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn paths_start_at_zero_and_have_grid_length(h in 0.05f64..0.95, n in 1usize..40, seed in 0u64..1000) {
        let b = gen_fbm_paths(h, n as f64 * 0.1, &cfg(0.1, 4, seed, Scheme::Spectral)).unwrap();
        for p in b.paths() {
            prop_assert_eq!(p.len(), n + 1);
            prop_assert_eq!(p[0], 0.0);
            prop_assert!(p.iter().all(|x| x.is_finite()));
        }
    }
}
