//! Independent reference computations for the integration tests.
//!
//! Everything here is written from the defining integrals with its own
//! quadrature (double-exponential) and linear algebra, sharing no numerical
//! code with the library beyond parameter types.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

/// Tanh-sinh quadrature of `f` over `[a, b]`.
///
/// `f(x, da, db)` receives the node together with its exact distances to the
/// two endpoints, so integrands singular at an endpoint lose no precision.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let half = 0.5 * (b - a);
    let h = 1.0 / 128.0;
    let mut sum = half * FRAC_PI_2 * f(a + half, half, half);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (ch * ch);
        // distance from the nearer endpoint: half (1 - tanh u) = half * 2 / (e^{2u} + 1)
        let near = half * 2.0 / ((2.0 * u).exp() + 1.0);
        let far = 2.0 * half - near;
        if w < 1e-300 || near == 0.0 {
            break;
        }
        sum += w * (f(a + near, near, far) + f(b - near, far, near));
        k += 1;
        if t > 6.0 {
            break;
        }
    }
    sum * h
}

/// `int_0^inf f` via the split `[0, 1] + (u -> 1/u)`.
pub fn half_line<F: Fn(f64) -> f64>(f: F) -> f64 {
    let lo = tanh_sinh(0.0, 1.0, |u, du, _| if du == 0.0 { 0.0 } else { f(u) });
    let hi = tanh_sinh(0.0, 1.0, |v, _, _| if v < 1e-150 { 0.0 } else { f(1.0 / v) / (v * v) });
    lo + hi
}

/// `R_n(kappa, z) = kappa int_z^t r^{kappa+n} (r - z)^{kappa-1} dr` for `kappa > 0`
/// after `w = (r - z)^kappa`; for `kappa < 0` the integrated-by-parts form
/// `t^{kappa+n} (t-z)^kappa - (kappa+n) int_z^t r^{kappa+n-1} (r-z)^kappa dr`
/// with `w = (r - z)^{1+kappa}`.
pub fn r_n_oracle(n: usize, kappa: f64, z: f64, t: f64) -> f64 {
    let nf = n as f64;
    if kappa > 0.0 {
        let top = (t - z).powf(kappa);
        tanh_sinh(0.0, top, |w, _, _| (z + w.powf(1.0 / kappa)).powf(kappa + nf))
    } else {
        let e = 1.0 + kappa;
        let top = (t - z).powf(e);
        let inner = tanh_sinh(0.0, top, |w, _, _| {
            let r = z + w.powf(1.0 / e);
            // integrable singularity at r = 0; underflowed nodes carry no weight
            if r == 0.0 {
                0.0
            } else {
                r.powf(kappa + nf - 1.0)
            }
        }) / e;
        t.powf(kappa + nf) * (t - z).powf(kappa) - (kappa + nf) * inner
    }
}

/// `c(r) = sigma e^{-lambda (t - r)}`.
pub fn c_of(r: f64, t: f64, lambda: f64, sigma: f64) -> f64 {
    sigma * (-lambda * (t - r)).exp()
}

/// `h(kappa, z) = kappa int_z^t r^kappa c(r) (r - z)^{kappa - 1} dr` for `kappa > 0`,
/// or its integrated-by-parts continuation for `kappa < 0`.
pub fn h_oracle(kappa: f64, z: f64, t: f64, lambda: f64, sigma: f64) -> f64 {
    if kappa > 0.0 {
        let top = (t - z).powf(kappa);
        tanh_sinh(0.0, top, |w, _, _| {
            let r = z + w.powf(1.0 / kappa);
            r.powf(kappa) * c_of(r, t, lambda, sigma)
        })
    } else {
        // d/dr [r^kappa c(r)] = r^kappa c(r) (kappa / r + lambda)
        let e = 1.0 + kappa;
        let top = (t - z).powf(e);
        let inner = tanh_sinh(0.0, top, |w, _, _| {
            let r = z + w.powf(1.0 / e);
            if r == 0.0 {
                0.0
            } else {
                r.powf(kappa) * c_of(r, t, lambda, sigma) * (kappa / r + lambda)
            }
        }) / e;
        t.powf(kappa) * sigma * (t - z).powf(kappa) - inner
    }
}

/// `Psi_c(s, t, v)` from its raw integral, split at the midpoint of `[s, t]`
/// so the endpoint singularity at `s` sits alone in its own piece.
pub fn psi_oracle(v: f64, s: f64, t: f64, hurst: f64, lambda: f64, sigma: f64) -> f64 {
    psi_oracle_gap(v, s - v, s, t, hurst, lambda, sigma)
}

/// As [`psi_oracle`] with `s - v` supplied exactly.
pub fn psi_oracle_gap(v: f64, sv: f64, s: f64, t: f64, hurst: f64, lambda: f64, sigma: f64) -> f64 {
    let k = hurst - 0.5;
    // (s - v)^{-kappa} goes inside so tiny gaps cannot overflow
    let f = |r: f64, dr: f64| r.powf(k) * (dr / sv).powf(k) * c_of(r, t, lambda, sigma) / (dr + sv);
    let mid = 0.5 * (s + t);
    let left = tanh_sinh(s, mid, |r, da, _| f(r, da));
    let right = tanh_sinh(mid, t, |r, _, _| f(r, r - s));
    (PI * k).sin() / PI * v.powf(-k) * (left + right)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// Exact variance of the `kappa = 0` fOU: `sigma^2 (1 - e^{-2 lambda d}) / (2 lambda)`.
pub fn ou_variance(lambda: f64, sigma: f64, d: f64) -> f64 {
    if lambda == 0.0 {
        sigma * sigma * d
    } else {
        -sigma * sigma * (-2.0 * lambda * d).exp_m1() / (2.0 * lambda)
    }
}

/// Reference conditional standard deviations: H, fBm s=0, fBm s=3, fOU s=0, fOU s=3.
pub const REFERENCE_STD: [(f64, f64, f64, f64, f64); 9] = [
    (0.1, 1.1662, 0.9774, 0.2186, 0.2175),
    (0.2, 1.3796, 1.2546, 0.2310, 0.2296),
    (0.3, 1.6207, 1.5544, 0.2482, 0.2470),
    (0.4, 1.9036, 1.8832, 0.2708, 0.2702),
    (0.5, 2.2361, 2.2361, 0.2990, 0.2990),
    (0.6, 2.6265, 2.5924, 0.3334, 0.3317),
    (0.7, 3.0852, 2.9025, 0.3746, 0.3633),
    (0.8, 3.6239, 3.0555, 0.4238, 0.3808),
    (0.9, 4.2568, 2.7760, 0.4822, 0.3491),
];

/// COS errors at L = 4 for H = 0.1, ..., 0.9.
pub const COS_L4_ERRORS: [f64; 9] = [8.4e-2, 9.0e-2, 9.8e-2, 1.1e-1, 1.2e-1, 1.3e-1, 1.5e-1, 1.6e-1, 1.8e-1];
