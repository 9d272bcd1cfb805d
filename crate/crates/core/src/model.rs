//! Model parameters, conditioning windows and the fBm covariance structure.

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};

/// Parameters of `dX = lambda (mu - X) dt + sigma dB^H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FouParams {
    lambda: f64,
    mu: f64,
    sigma: f64,
    hurst: f64,
}

impl FouParams {
    pub fn new(lambda: f64, mu: f64, sigma: f64, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        if !mu.is_finite() {
            return Err(invalid("mu", format!("must be finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("sigma", format!("must be finite and > 0, got {sigma}")));
        }
        Ok(Self {
            lambda,
            mu,
            sigma,
            hurst,
        })
    }

    /// Plain fBm: `lambda = 0`, `sigma = 1`.
    pub fn fbm(hurst: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 1.0, hurst)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `H - 1/2`.
    pub fn kappa(&self) -> f64 {
        self.hurst - 0.5
    }

    /// `c(r) = sigma exp(-lambda (t - r))`.
    pub fn kernel(&self, r: f64, t: f64) -> f64 {
        self.sigma * (-self.lambda * (t - r)).exp()
    }
}

/// Conditioning time `s`, forecast time `t` and an optional horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub s: f64,
    pub t: f64,
    pub horizon: f64,
}

impl TimeWindow {
    pub fn new(s: f64, t: f64) -> Result<Self> {
        Self::with_horizon(s, t, t)
    }

    pub fn with_horizon(s: f64, t: f64, horizon: f64) -> Result<Self> {
        if !(s.is_finite() && t.is_finite() && horizon.is_finite()) {
            return Err(domain("time window must be finite"));
        }
        if s < 0.0 {
            return Err(invalid("s", format!("must be >= 0, got {s}")));
        }
        if t < s {
            return Err(invalid("t", format!("must be >= s = {s}, got {t}")));
        }
        if horizon < t {
            return Err(invalid("T", format!("must be >= t = {t}, got {horizon}")));
        }
        Ok(Self { s, t, horizon })
    }

    pub fn len(&self) -> f64 {
        self.t - self.s
    }

    pub fn is_empty(&self) -> bool {
        self.t == self.s
    }
}

/// A realized fBm path on `0 = t_0 < ... < t_n = s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmGrid {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl FbmGrid {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(domain(format!(
                "path needs equal, non-zero lengths (times {}, values {})",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(domain("path must start at (0, 0)"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("path times must be strictly increasing"));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(domain("path contains non-finite entries"));
        }
        Ok(Self { times, values })
    }

    /// The trivial path `{(0, 0)}` used when conditioning at `s = 0`.
    pub fn origin() -> Self {
        Self {
            times: vec![0.0],
            values: vec![0.0],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty by construction")
    }

    /// Increments `B(t_{i+1}) - B(t_i)`.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

pub(crate) fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(invalid("hurst", format!("must lie in (0, 1), got {hurst}")));
    }
    Ok(())
}

/// `Cov(B_t, B_s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(t: f64, s: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(t >= 0.0 && s >= 0.0) {
        return Err(domain(format!("covariance needs nonnegative times, got ({t}, {s})")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// Autocovariance of unit increments `B_{k+1} - B_k` at the given lag.
///
/// Any nonnegative real lag is accepted; for `lag < 1` the same closed form
/// applies with `|lag - 1|`.
pub fn increment_autocov(lag: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(lag >= 0.0) {
        return Err(domain(format!("lag must be >= 0, got {lag}")));
    }
    let h2 = 2.0 * hurst;
    Ok(0.5 * ((lag + 1.0).powf(h2) - 2.0 * lag.powf(h2) + (lag - 1.0).abs().powf(h2)))
}
