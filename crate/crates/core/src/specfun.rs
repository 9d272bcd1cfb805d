//! Real-argument special functions: gamma, log-gamma, erfc, the standard
//! normal CDF and the Gauss hypergeometric series.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Default relative stopping tolerance of [`hyp2f1`].
pub const HYP2F1_TOL: f64 = 1e-15;
/// Default term cap of [`hyp2f1`].
pub const HYP2F1_MAX_TERMS: usize = 10_000;
/// Distance to a nonpositive integer below which `gamma_param` is rejected.
pub const NEAR_POLE: f64 = 1e-8;

/// Outcome of a power-series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    pub value: f64,
    pub terms_used: usize,
    pub converged: bool,
}

/// `sin(pi x)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let mut r = x % 2.0;
    if r > 1.0 {
        r -= 2.0;
    } else if r < -1.0 {
        r += 2.0;
    }
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (x - 1)
    LANCZOS
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + i as f64))
}

/// The gamma function.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("gamma of non-finite argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(domain(format!("gamma pole at {x}")));
    }
    if x > 171.7 {
        return Err(Error::Overflow(format!("gamma({x})")));
    }
    if x == x.floor() && x <= 30.0 {
        // exact factorial for small positive integers
        let n = x as u32;
        return Ok((1..n).fold(1.0, |acc, k| acc * k as f64));
    }
    let value = if x < 0.5 {
        let s = sin_pi(x);
        let g = gamma(1.0 - x)?;
        PI / (s * g)
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        let half = t.powf((z + 0.5) / 2.0);
        SQRT_2PI * half * (half * (-t).exp()) * lanczos_sum(z)
    };
    if !value.is_finite() {
        return Err(Error::Overflow(format!("gamma({x})")));
    }
    Ok(value)
}

/// Natural log of `|gamma(x)|`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("ln_gamma of non-finite argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(domain(format!("ln_gamma pole at {x}")));
    }
    if x < 0.5 {
        let s = sin_pi(x).abs();
        return Ok(PI.ln() - s.ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

// erf by the positive-term series erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// Continued fraction x + (1/2)/(x + 1/(x + (3/2)/(x + ...))) by modified Lentz.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    // split x^2 to keep the exponent exact for large x
    let hi = (x * 4096.0).round() / 4096.0;
    let lo = x - hi;
    (-hi * hi).exp() * (-(2.0 * hi + lo) * lo).exp() / (f * PI.sqrt())
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else if x < 27.3 {
        erfc_continued_fraction(x)
    } else {
        0.0
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() < 2.0 {
        if x < 0.0 {
            -erf_series(-x)
        } else {
            erf_series(x)
        }
    } else {
        1.0 - erfc(x)
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Gauss hypergeometric function by its power series, default tolerance and term cap.
pub fn hyp2f1(alpha: f64, beta: f64, gamma_param: f64, zeta: f64) -> Result<SeriesResult> {
    hyp2f1_with(alpha, beta, gamma_param, zeta, HYP2F1_TOL, HYP2F1_MAX_TERMS)
}

/// Gauss hypergeometric series, stopping once `|term / sum| < tol` or after `max_terms` terms.
pub fn hyp2f1_with(
    alpha: f64,
    beta: f64,
    gamma_param: f64,
    zeta: f64,
    tol: f64,
    max_terms: usize,
) -> Result<SeriesResult> {
    if ![alpha, beta, gamma_param, zeta].iter().all(|v| v.is_finite()) {
        return Err(domain("hyp2f1 with non-finite argument"));
    }
    if gamma_param <= NEAR_POLE && (gamma_param - gamma_param.round()).abs() < NEAR_POLE {
        return Err(domain(format!(
            "hyp2f1 gamma parameter {gamma_param} at or near a nonpositive integer"
        )));
    }
    if zeta.abs() >= 1.0 {
        return Err(domain(format!("hyp2f1 argument |{zeta}| >= 1")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..max_terms.saturating_sub(1) {
        let k = n as f64;
        term *= (alpha + k) * (beta + k) / ((gamma_param + k) * (k + 1.0)) * zeta;
        sum += term;
        if term == 0.0 || (term / sum).abs() < tol {
            return Ok(SeriesResult {
                value: sum,
                terms_used: n + 2,
                converged: sum.is_finite(),
            });
        }
    }
    Ok(SeriesResult {
        value: sum,
        terms_used: max_terms,
        converged: false,
    })
}
