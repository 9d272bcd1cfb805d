//! European options on `Z_T = g(X_T)` by the Fourier-cosine expansion of the
//! Gaussian state density, and the closed form for `g = exp`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditional::ConditionalNormal;
use crate::derived::{MapKind, ProcessMap};
use crate::error::{domain, invalid, Result};
use crate::quad::GaussLegendre;
use crate::specfun::norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Call,
    Put,
}

impl Side {
    pub fn eta(self) -> f64 {
        match self {
            Side::Call => 1.0,
            Side::Put => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub strike: f64,
    pub rate: f64,
    /// Valuation time.
    pub t: f64,
    pub maturity: f64,
    pub side: Side,
}

impl OptionSpec {
    pub fn new(strike: f64, rate: f64, t: f64, maturity: f64, side: Side) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(invalid("strike", format!("must be > 0, got {strike}")));
        }
        if !rate.is_finite() {
            return Err(invalid("rate", format!("must be finite, got {rate}")));
        }
        if !(t.is_finite() && maturity.is_finite() && maturity > t) {
            return Err(invalid("T", format!("maturity {maturity} must exceed valuation time {t}")));
        }
        Ok(Self {
            strike,
            rate,
            t,
            maturity,
            side,
        })
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * (self.maturity - self.t)).exp()
    }

    pub fn payoff(&self, z: f64) -> f64 {
        (self.side.eta() * (z - self.strike)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosConfig {
    pub n_terms: usize,
    pub width_mult: f64,
    /// Gauss-Legendre panels per payoff interval for maps without closed-form coefficients.
    pub panels: usize,
}

impl Default for CosConfig {
    fn default() -> Self {
        Self {
            n_terms: 16,
            width_mult: 10.0,
            panels: 64,
        }
    }
}

impl CosConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_terms < 1 {
            return Err(invalid("terms_L", "must be >= 1"));
        }
        if !(self.width_mult.is_finite() && self.width_mult > 0.0) {
            return Err(invalid("width_mult", format!("must be > 0, got {}", self.width_mult)));
        }
        if self.panels < 1 {
            return Err(invalid("panels", "must be >= 1"));
        }
        Ok(())
    }

    /// `[b, d] = mean -+ width_mult * sd`.
    pub fn interval(&self, law: &ConditionalNormal) -> (f64, f64) {
        let half = self.width_mult * law.std_dev();
        (law.mean - half, law.mean + half)
    }
}

/// `phi(u) = exp(i mean u - variance u^2 / 2)`.
pub fn char_fn(law: &ConditionalNormal, u: f64) -> Complex64 {
    Complex64::from_polar((-0.5 * law.variance * u * u).exp(), law.mean * u)
}

// Re{phi(l pi / (d - b)) exp(-i l pi b / (d - b))} for l < n, the l = 0 term halved.
fn weights(law: &ConditionalNormal, b: f64, d: f64, n: usize) -> Vec<f64> {
    let w = d - b;
    (0..n)
        .map(|l| {
            let u = l as f64 * PI / w;
            let v = (char_fn(law, u) * Complex64::from_polar(1.0, -u * b)).re;
            if l == 0 {
                0.5 * v
            } else {
                v
            }
        })
        .collect()
}

/// Cosine-series approximation of the state density at `y`.
pub fn cos_density(law: &ConditionalNormal, cfg: &CosConfig, y: f64) -> Result<f64> {
    cfg.validate()?;
    let (b, d) = cfg.interval(law);
    if !(d > b) {
        return Err(domain("degenerate law has no cosine expansion"));
    }
    if !(y >= b && y <= d) {
        return Err(domain(format!("{y} outside the expansion interval [{b}, {d}]")));
    }
    let w = d - b;
    let sum: f64 = weights(law, b, d, cfg.n_terms)
        .iter()
        .enumerate()
        .map(|(l, f)| f * (l as f64 * PI * (y - b) / w).cos())
        .sum();
    Ok(2.0 / w * sum)
}

// Integrals over [c, e] of e^y cos(l pi (y - b)/w) and of cos(l pi (y - b)/w).
fn chi(l: usize, b: f64, w: f64, c: f64, e: f64) -> f64 {
    let k = l as f64 * PI / w;
    let (ac, ae) = (k * (c - b), k * (e - b));
    (ae.cos() * e.exp() - ac.cos() * c.exp() + k * (ae.sin() * e.exp() - ac.sin() * c.exp())) / (1.0 + k * k)
}

fn psi(l: usize, b: f64, w: f64, c: f64, e: f64) -> f64 {
    if l == 0 {
        return e - c;
    }
    let k = l as f64 * PI / w;
    ((k * (e - b)).sin() - (k * (c - b)).sin()) / k
}

/// Cosine coefficients `V_l` of the payoff `max(eta (g(y) - K), 0)` on `[b, d]`,
/// without discounting.
pub fn payoff_coeffs(spec: &OptionSpec, map: &ProcessMap, cfg: &CosConfig, law: &ConditionalNormal) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (b, d) = cfg.interval(law);
    if !(d > b) {
        return Err(domain("degenerate law has no cosine expansion"));
    }
    let w = d - b;
    let n = cfg.n_terms;
    let k = spec.strike;
    if map.kind() == MapKind::Gfou {
        let ystar = k.ln().clamp(b, d);
        let (lo, hi) = match spec.side {
            Side::Call => (ystar, d),
            Side::Put => (b, ystar),
        };
        let eta = spec.side.eta();
        return Ok((0..n)
            .map(|l| 2.0 / w * eta * (chi(l, b, w, lo, hi) - k * psi(l, b, w, lo, hi)))
            .collect());
    }

    let gl = GaussLegendre::new(10);
    let mut coeffs = vec![0.0; n];
    for (lo, hi) in positive_pieces(spec, map, b, d) {
        for (l, c) in coeffs.iter_mut().enumerate() {
            let kk = l as f64 * PI / w;
            *c += gl.composite(lo, hi, cfg.panels, |y| spec.payoff(map.forward(y)) * (kk * (y - b)).cos());
        }
    }
    Ok(coeffs.into_iter().map(|c| 2.0 / w * c).collect())
}

// Sub-intervals of [b, d] on which the payoff is positive, split at the map's
// stationary points and at the strike crossings of each monotone piece.
fn positive_pieces(spec: &OptionSpec, map: &ProcessMap, b: f64, d: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![b];
    cuts.extend(map.critical_points().into_iter().filter(|&c| c > b && c < d));
    cuts.push(d);
    let f = |y: f64| map.forward(y) - spec.strike;
    let mut pts = vec![b];
    for piece in cuts.windows(2) {
        let (p, q) = (piece[0], piece[1]);
        let (fp, fq) = (f(p), f(q));
        if fp * fq < 0.0 {
            pts.push(bisect(&f, p, q, fp));
        }
        pts.push(q);
    }
    pts.dedup();
    pts.windows(2)
        .filter(|iv| iv[1] > iv[0] && spec.payoff(map.forward(0.5 * (iv[0] + iv[1]))) > 0.0)
        .map(|iv| (iv[0], iv[1]))
        .collect()
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let sign = flo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid).signum() == sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Price from precomputed coefficients.
pub fn cos_price_from_coeffs(spec: &OptionSpec, law: &ConditionalNormal, cfg: &CosConfig, coeffs: &[f64]) -> Result<f64> {
    let (b, d) = cfg.interval(law);
    if !(d > b) {
        return Err(domain("degenerate law has no cosine expansion"));
    }
    let wts = weights(law, b, d, coeffs.len());
    Ok(spec.discount() * wts.iter().zip(coeffs).map(|(a, v)| a * v).sum::<f64>())
}

/// COS price of the option on `Z_T = g(X_T)` with `X_T ~ law`.
pub fn cos_price(spec: &OptionSpec, map: &ProcessMap, law: &ConditionalNormal, cfg: &CosConfig) -> Result<f64> {
    if law.variance == 0.0 {
        return Ok(spec.discount() * spec.payoff(map.forward(law.mean)));
    }
    let coeffs = payoff_coeffs(spec, map, cfg, law)?;
    cos_price_from_coeffs(spec, law, cfg, &coeffs)
}

/// Lognormal closed form for `g = exp`.
pub fn gfou_closed_form(spec: &OptionSpec, law: &ConditionalNormal) -> Result<f64> {
    let disc = spec.discount();
    let (mu, var) = (law.mean, law.variance);
    if var == 0.0 {
        return Ok(disc * spec.payoff(mu.exp()));
    }
    let sd = var.sqrt();
    let lk = spec.strike.ln();
    let fwd = (mu + 0.5 * var).exp();
    let d1 = (lk - var - mu) / sd;
    let d2 = (lk - mu) / sd;
    let price = match spec.side {
        Side::Call => disc * (fwd * norm_cdf(-d1) - spec.strike * norm_cdf(-d2)),
        Side::Put => disc * (spec.strike * norm_cdf(d2) - fwd * norm_cdf(d1)),
    };
    Ok(price.max(0.0))
}
