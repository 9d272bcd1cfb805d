//! Conditional mean and variance of the fractional Ornstein-Uhlenbeck process.
//!
//! The variance is an integral over `[s, t]` of `h(z)^2`, where `h` is a
//! fractional integral of the kernel `c(r) = sigma exp(-lambda (t - r))`.
//! Expanding `c` in powers of `r` reduces `h` to a series in the functions
//! `R_n(kappa, z)`, each a Gauss hypergeometric value, and the outer integral is
//! mapped to the real line through `erfc` so the trapezoidal rule converges
//! geometrically.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::model::{FbmGrid, FouParams, TimeWindow};
use crate::quad::GaussLegendre;
use crate::specfun::{erfc, gamma, hyp2f1, sin_pi};

/// Ratio of the last series term to `h` above which an exhausted series is an error.
pub const HARD_SERIES_RATIO: f64 = 1e-3;

/// `|1 - 2 kappa|` below which the `z` reconstruction is rejected.
pub const EXPONENT_GUARD: f64 = 2e-3;

// erfc underflows shortly after this.
const MAX_ABS_W: f64 = 26.0;

/// How Psi_c weights each fBm increment in the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelRule {
    /// Average of Psi_c over `[t_i, t_{i+1}]`.
    CellAverage,
    /// Psi_c at the left end `t_i`.
    LeftPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub step_m: f64,
    pub range_a: f64,
    pub max_terms_n: usize,
    pub series_tol: f64,
    pub psi_nodes: usize,
    /// Stretch the trapezoidal range for `kappa < 0`, where `h^2` decays more slowly.
    pub widen_tails: bool,
    /// Use the origin form of `R_0` whenever `z / t < 1/2`, not only for `s = 0`.
    pub origin_everywhere: bool,
    pub kernel_rule: KernelRule,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            step_m: 0.5,
            range_a: 5.0,
            max_terms_n: 20,
            series_tol: 1e-8,
            psi_nodes: 200,
            widen_tails: true,
            origin_everywhere: true,
            kernel_rule: KernelRule::CellAverage,
        }
    }
}

impl QuadratureConfig {
    /// The unmodified scheme: no tail widening, origin form only at `s = 0`.
    pub fn literal() -> Self {
        Self {
            widen_tails: false,
            origin_everywhere: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_m.is_finite() && self.step_m > 0.0) {
            return Err(invalid("step_m", format!("must be > 0, got {}", self.step_m)));
        }
        if !(self.range_a.is_finite() && self.range_a > 0.0) {
            return Err(invalid("range_a", format!("must be > 0, got {}", self.range_a)));
        }
        if self.max_terms_n < 1 {
            return Err(invalid("max_terms_n", "must be >= 1"));
        }
        if !(self.series_tol.is_finite() && self.series_tol > 0.0) {
            return Err(invalid("series_tol", format!("must be > 0, got {}", self.series_tol)));
        }
        if self.psi_nodes < 8 {
            return Err(invalid("psi_nodes", format!("must be >= 8, got {}", self.psi_nodes)));
        }
        Ok(())
    }
}

/// The Gaussian law `N(mean, variance)` of `X_t` given the past up to `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalNormal {
    pub mean: f64,
    pub variance: f64,
}

impl ConditionalNormal {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(domain(format!(
                "conditional law needs finite mean and variance >= 0, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa.abs() < 0.5) || kappa == 0.0 {
        return Err(domain(format!("kappa must lie in (-1/2, 1/2) \\ {{0}}, got {kappa}")));
    }
    Ok(())
}

/// Front factor `kappa (1 - 4 kappa^2) Gamma(1 - kappa) / (Gamma(2 - 2 kappa) Gamma(kappa))`.
pub fn a_kappa(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(kappa * (1.0 - 4.0 * kappa * kappa) * gamma(1.0 - kappa)?
        / (gamma(2.0 - 2.0 * kappa)? * gamma(kappa)?))
}

/// The same constant as [`a_kappa`] in its sine form
/// `pi kappa (2 kappa + 1) / (Gamma(1 - 2 kappa) sin(pi kappa) Gamma(kappa)^2)`.
pub fn a_kappa_sine(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let g = gamma(kappa)?;
    Ok(PI * kappa * (2.0 * kappa + 1.0) / (gamma(1.0 - 2.0 * kappa)? * sin_pi(kappa) * g * g))
}

/// `c_n = sigma exp(-lambda t) lambda^n / n!`, the Taylor coefficients of `c(r)` in `r`.
pub fn series_coeff(n: usize, params: &FouParams, t: f64) -> f64 {
    let lam = params.lambda();
    let mut c = params.sigma() * (-lam * t).exp();
    for k in 1..=n {
        c *= lam / k as f64;
    }
    c
}

fn check_point(kappa: f64, z: f64, t: f64) -> Result<()> {
    check_kappa(kappa)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain(format!("t must be positive, got {t}")));
    }
    if !(z >= 0.0 && z <= t) {
        return Err(domain(format!("z = {z} outside [0, t = {t}]")));
    }
    Ok(())
}

fn hyp_value(a: f64, b: f64, c: f64, zeta: f64) -> Result<f64> {
    let r = hyp2f1(a, b, c, zeta)?;
    if !r.converged {
        return Err(Error::NonConvergence(format!(
            "2F1({a}, {b}; {c}; {zeta}) after {} terms",
            r.terms_used
        )));
    }
    Ok(r.value)
}

/// `R_n(kappa, z) = z^{2 kappa + n} (1 - z/t)^kappa 2F1(n + 2 kappa + 1, kappa; kappa + 1; 1 - z/t)`.
pub fn r_n_hyp(n: usize, kappa: f64, z: f64, t: f64) -> Result<f64> {
    check_point(kappa, z, t)?;
    r_n_hyp_gap(n, kappa, z, t - z, t)
}

/// [`r_n_hyp`] with the gap `t - z` supplied separately, so that it keeps full
/// relative precision when `z` is within rounding of `t`.
pub fn r_n_hyp_gap(n: usize, kappa: f64, z: f64, gap: f64, t: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(z > 0.0) {
        return Err(domain("r_n_hyp is undefined at z = 0; use r_n_origin"));
    }
    if !(gap >= 0.0) {
        return Err(domain(format!("negative gap t - z = {gap}")));
    }
    if gap == 0.0 {
        if kappa > 0.0 {
            return Ok(0.0);
        }
        return Err(domain("r_n_hyp diverges at z = t for kappa < 0"));
    }
    let nf = n as f64;
    let zeta = gap / t;
    let f = hyp_value(nf + 2.0 * kappa + 1.0, kappa, kappa + 1.0, zeta)?;
    Ok(z.powf(2.0 * kappa + nf) * zeta.powf(kappa) * f)
}

/// Representation of `R_n` valid down to `z = 0`, for `z / t < 1/2`.
pub fn r_n_origin(n: usize, kappa: f64, z: f64, t: f64) -> Result<f64> {
    check_point(kappa, z, t)?;
    r_n_origin_gap(n, kappa, z, t - z, t)
}

pub fn r_n_origin_gap(n: usize, kappa: f64, z: f64, gap: f64, t: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if !(z >= 0.0) || !(z / t < 0.5) {
        return Err(domain(format!("r_n_origin needs 0 <= z/t < 1/2, got z = {z}, t = {t}")));
    }
    let nf = n as f64;
    let e = 2.0 * kappa + nf;
    if z == 0.0 && e < 0.0 {
        return Err(domain("r_n_origin diverges at z = 0 for n = 0, kappa < 0"));
    }
    let lead = gamma(kappa + 1.0)? * gamma(nf + 1.0 + kappa)?
        / (2.0 * (PI * kappa).cos() * gamma(nf + 1.0 + 2.0 * kappa)?);
    let first = if z == 0.0 { 0.0 } else { lead * z.powf(e) };
    let f = hyp_value(-kappa - nf, 1.0, 1.0 - nf - 2.0 * kappa, z / t)?;
    let second = kappa * gap.powf(kappa) * t.powf(nf + kappa) / e * f;
    Ok(first + second)
}

/// `R_n = [kappa t^{kappa + n} (t - z)^kappa + z (kappa + n) R_{n-1}] / (2 kappa + n)`.
pub fn r_n_recursion(r_prev: f64, n: usize, kappa: f64, z: f64, t: f64) -> Result<f64> {
    check_point(kappa, z, t)?;
    r_n_recursion_gap(r_prev, n, kappa, z, t - z, t)
}

pub fn r_n_recursion_gap(r_prev: f64, n: usize, kappa: f64, z: f64, gap: f64, t: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let nf = n as f64;
    let denom = 2.0 * kappa + nf;
    if n == 0 || denom == 0.0 {
        return Err(domain("r_n_recursion needs n >= 1"));
    }
    let edge = if gap == 0.0 {
        if kappa > 0.0 {
            0.0
        } else {
            return Err(domain("r_n_recursion diverges at z = t for kappa < 0"));
        }
    } else {
        kappa * t.powf(kappa + nf) * gap.powf(kappa)
    };
    Ok((edge + z * (kappa + nf) * r_prev) / denom)
}

/// Value of the truncated `h` series and how it ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HEval {
    pub value: f64,
    pub terms_used: usize,
    /// Term cap reached with the last ratio between the tolerance and [`HARD_SERIES_RATIO`].
    pub warning: bool,
}

/// `h(kappa, z) = sum_n c_n R_n(kappa, z)`.
pub fn h_eval(
    kappa: f64,
    z: f64,
    t: f64,
    params: &FouParams,
    cfg: &QuadratureConfig,
    at_origin: bool,
) -> Result<HEval> {
    check_point(kappa, z, t)?;
    h_eval_gap(kappa, z, t - z, t, params, cfg, at_origin)
}

pub fn h_eval_gap(
    kappa: f64,
    z: f64,
    gap: f64,
    t: f64,
    params: &FouParams,
    cfg: &QuadratureConfig,
    at_origin: bool,
) -> Result<HEval> {
    let mut r = if at_origin && z / t < 0.5 {
        r_n_origin_gap(0, kappa, z, gap, t)?
    } else {
        r_n_hyp_gap(0, kappa, z, gap, t)?
    };
    let lam = params.lambda();
    let mut c = series_coeff(0, params, t);
    let mut h = c * r;
    if lam == 0.0 {
        return Ok(HEval {
            value: h,
            terms_used: 1,
            warning: false,
        });
    }
    let mut ratio = 0.0;
    for n in 1..=cfg.max_terms_n {
        c *= lam / n as f64;
        r = r_n_recursion_gap(r, n, kappa, z, gap, t)?;
        let term = c * r;
        h += term;
        ratio = if term == 0.0 { 0.0 } else { (term / h).abs() };
        if ratio < cfg.series_tol {
            return Ok(HEval {
                value: h,
                terms_used: n + 1,
                warning: false,
            });
        }
    }
    if !(ratio <= HARD_SERIES_RATIO) {
        return Err(Error::NonConvergence(format!(
            "h series at z = {z}, t = {t}: last term ratio {ratio:.3e} after {} terms",
            cfg.max_terms_n + 1
        )));
    }
    Ok(HEval {
        value: h,
        terms_used: cfg.max_terms_n + 1,
        warning: true,
    })
}

/// Diagnostics of one variance evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport {
    pub variance: f64,
    pub nodes: usize,
    pub max_terms_used: usize,
    pub series_warning: bool,
    /// Taken from the `kappa = 0` closed form.
    pub closed_form: bool,
}

/// `Var[X_t | F_s]`.
pub fn conditional_variance(params: &FouParams, window: &TimeWindow, cfg: &QuadratureConfig) -> Result<f64> {
    conditional_variance_report(params, window, cfg).map(|r| r.variance)
}

pub fn conditional_variance_report(
    params: &FouParams,
    window: &TimeWindow,
    cfg: &QuadratureConfig,
) -> Result<VarianceReport> {
    cfg.validate()?;
    let (s, t) = (window.s, window.t);
    let kappa = params.kappa();
    let closed = |variance| VarianceReport {
        variance,
        nodes: 0,
        max_terms_used: 0,
        series_warning: false,
        closed_form: true,
    };
    if t == s {
        return Ok(closed(0.0));
    }
    let (lam, sig) = (params.lambda(), params.sigma());
    if kappa == 0.0 {
        let dt = t - s;
        let v = if lam == 0.0 {
            sig * sig * dt
        } else {
            -sig * sig * (-2.0 * lam * dt).exp_m1() / (2.0 * lam)
        };
        return Ok(closed(v));
    }
    let p = 1.0 - 2.0 * kappa;
    if p.abs() < EXPONENT_GUARD {
        return Err(domain(format!("|1 - 2 kappa| = {p:.2e} too small to map nodes")));
    }
    let tp = t.powf(p);
    let sp = s.powf(p);
    let span = tp - sp;
    let at_origin = cfg.origin_everywhere || s == 0.0;

    let (mut a_minus, mut a_plus) = (cfg.range_a, cfg.range_a);
    if cfg.widen_tails && kappa < 0.0 {
        a_plus = cfg.range_a / (1.0 + 2.0 * kappa).sqrt();
        if s == 0.0 {
            a_minus = cfg.range_a / ((1.0 + 2.0 * kappa) / (1.0 - 2.0 * kappa)).sqrt();
        }
        a_plus = a_plus.min(MAX_ABS_W);
        a_minus = a_minus.min(MAX_ABS_W);
    }
    let m = cfg.step_m;
    let lo = -((a_minus / m) * (1.0 + 1e-12)).floor() as i64;
    let hi = ((a_plus / m) * (1.0 + 1e-12)).floor() as i64;

    let mut sum = 0.0;
    let mut nodes = 0;
    let mut max_terms = 0;
    let mut warn = false;
    for i in lo..=hi {
        let w = m * i as f64;
        let Some((z, gap)) = node_point(w, t, tp, sp, span, p) else {
            continue;
        };
        if !(z > 0.0) || (gap <= 0.0 && kappa < 0.0) {
            continue;
        }
        let he = h_eval_gap(kappa, z, gap, t, params, cfg, at_origin)?;
        let scaled = (-0.5 * w * w).exp() * he.value;
        sum += scaled * scaled;
        nodes += 1;
        max_terms = max_terms.max(he.terms_used);
        warn |= he.warning;
    }
    let front = gamma(1.0 - kappa)? / (gamma(2.0 - 2.0 * kappa)? * gamma(kappa + 1.0)?)
        * (1.0 + 2.0 * kappa)
        * span
        / PI.sqrt();
    let variance = front * m * sum;
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::Overflow(format!("conditional variance evaluated to {variance}")));
    }
    Ok(VarianceReport {
        variance,
        nodes,
        max_terms_used: max_terms,
        series_warning: warn,
        closed_form: false,
    })
}

// Quadrature node on (s, t) for the real-line abscissa w, returned with its gap to t.
fn node_point(w: f64, t: f64, tp: f64, sp: f64, span: f64, p: f64) -> Option<(f64, f64)> {
    let y = 0.5 * erfc(-w);
    let yc = 0.5 * erfc(w);
    // t - z = t (1 - (1 - span yc / t^p)^{1/p})
    let gap = -t * ((-span * yc / tp).ln_1p() / p).exp_m1();
    if y < 0.5 {
        let x = span * y + sp;
        Some((x.powf(1.0 / p), gap))
    } else {
        Some((t - gap, gap))
    }
}

/// The kernel `Psi_c(s, t, v)` of the conditional mean, with its inner
/// quadrature rule over `[s, t]` built once.
#[derive(Debug, Clone)]
pub struct PsiKernel {
    kappa: f64,
    s: f64,
    // (r_j, weight_j * r_j^kappa c(r_j) / (1 + kappa))
    rule: Vec<(f64, f64)>,
}

impl PsiKernel {
    pub fn new(params: &FouParams, window: &TimeWindow, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let kappa = params.kappa();
        let (s, t) = (window.s, window.t);
        let mut rule = Vec::new();
        if kappa != 0.0 && t > s {
            let e = 1.0 + kappa;
            let top = (t - s).powf(e);
            let gl = GaussLegendre::new(6);
            for (w, wt) in gl.graded_rule(0.0, top, cfg.psi_nodes, 3.0) {
                let r = s + w.powf(1.0 / e);
                rule.push((r, wt * r.powf(kappa) * params.kernel(r, t) / e));
            }
        }
        Ok(Self { kappa, s, rule })
    }

    /// `Psi_c(s, t, v)` for `v` in `(0, s)`.
    pub fn eval(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v < self.s) {
            return Err(domain(format!("Psi_c needs 0 < v < s = {}, got {v}", self.s)));
        }
        Ok(self.eval_interior(v))
    }

    fn eval_interior(&self, v: f64) -> f64 {
        if self.rule.is_empty() {
            return 0.0;
        }
        let k = self.kappa;
        let integral: f64 = self.rule.iter().map(|&(r, w)| w / (r - v)).sum();
        sin_pi(k) / PI * v.powf(-k) * (self.s - v).powf(-k) * integral
    }

    /// Mean of `Psi_c` over `[a, b]`, with `0 <= a < b <= s`. Cells touching 0 or
    /// `s` are integrated after `v = edge +- (b - a) u^4`, which tames the
    /// endpoint power singularity.
    pub fn cell_average(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0 <= a && a < b && b <= self.s) {
            return Err(domain(format!("cell [{a}, {b}] not inside [0, {}]", self.s)));
        }
        if self.rule.is_empty() {
            return Ok(0.0);
        }
        let at_lo = a == 0.0;
        let at_hi = b == self.s;
        let len = b - a;
        let avg = match (at_lo, at_hi) {
            (false, false) => GaussLegendre::new(4).integrate(0.0, 1.0, |u| self.eval_interior(a + len * u)),
            (true, false) => edge_average(|d| self.eval_interior(a + len * d)),
            (false, true) => edge_average(|d| self.eval_interior(b - len * d)),
            (true, true) => {
                let h = 0.5 * len;
                0.5 * (edge_average(|d| self.eval_interior(a + h * d))
                    + edge_average(|d| self.eval_interior(b - h * d)))
            }
        };
        Ok(avg)
    }
}

// Mean over d in (0, 1) of f(d), where f may blow up like d^{-1/2} at 0.
fn edge_average<F: Fn(f64) -> f64>(f: F) -> f64 {
    GaussLegendre::new(8).integrate(0.0, 1.0, |u| {
        let u3 = u * u * u;
        4.0 * u3 * f(u3 * u)
    })
}

/// `Psi_c(s, t, v)` for a single `v`; prefer [`PsiKernel`] for many evaluations.
pub fn psi_c(v: f64, window: &TimeWindow, params: &FouParams, cfg: &QuadratureConfig) -> Result<f64> {
    if !(v > 0.0 && v < window.s) {
        return Err(domain(format!("Psi_c needs 0 < v < s = {}, got {v}", window.s)));
    }
    PsiKernel::new(params, window, cfg)?.eval(v)
}

fn check_path(window: &TimeWindow, path: &FbmGrid) -> Result<()> {
    let end = path.end_time();
    if (end - window.s).abs() > 1e-9 * window.s.max(1.0) {
        return Err(domain(format!("path ends at {end}, conditioning time is {}", window.s)));
    }
    Ok(())
}

/// `X_s` rebuilt from the fBm path by the left-point discretization
/// `X_0 e^{-lambda s} + mu (1 - e^{-lambda s}) + sigma sum e^{-lambda (s - t_i)} dB_i`.
pub fn reconstruct_state(params: &FouParams, path: &FbmGrid, x0: f64) -> f64 {
    let (lam, mu, sig) = (params.lambda(), params.mu(), params.sigma());
    let s = path.end_time();
    let decay = (-lam * s).exp();
    let noise: f64 = path
        .times()
        .iter()
        .zip(path.increments())
        .map(|(&ti, db)| (-lam * (s - ti)).exp() * db)
        .sum();
    x0 * decay + mu * (1.0 - decay) + sig * noise
}

/// `E[X_t | F_s]` with `X_s` rebuilt from the path and the start value `x0`.
pub fn conditional_mean(
    params: &FouParams,
    window: &TimeWindow,
    path: &FbmGrid,
    cfg: &QuadratureConfig,
    x0: f64,
) -> Result<f64> {
    check_path(window, path)?;
    let xs = reconstruct_state(params, path, x0);
    conditional_mean_given_state(params, window, path, cfg, xs)
}

/// `E[X_t | F_s]` when `X_s` is observed directly.
pub fn conditional_mean_given_state(
    params: &FouParams,
    window: &TimeWindow,
    path: &FbmGrid,
    cfg: &QuadratureConfig,
    x_s: f64,
) -> Result<f64> {
    check_path(window, path)?;
    cfg.validate()?;
    let (lam, mu) = (params.lambda(), params.mu());
    let decay = (-lam * window.len()).exp();
    let mut mean = x_s * decay + mu * (1.0 - decay);
    if params.kappa() != 0.0 && window.s > 0.0 && window.t > window.s {
        let kernel = PsiKernel::new(params, window, cfg)?;
        let times = path.times();
        let mut acc = 0.0;
        for (i, db) in path.increments().enumerate() {
            let weight = match cfg.kernel_rule {
                KernelRule::CellAverage => kernel.cell_average(times[i], times[i + 1])?,
                KernelRule::LeftPoint if i == 0 => 0.0,
                KernelRule::LeftPoint => kernel.eval_interior(times[i]),
            };
            acc += weight * db;
        }
        mean += acc;
    }
    if !mean.is_finite() {
        return Err(Error::Overflow(format!("conditional mean evaluated to {mean}")));
    }
    Ok(mean)
}

/// Conditional mean and variance together.
pub fn conditional_law(
    params: &FouParams,
    window: &TimeWindow,
    path: &FbmGrid,
    cfg: &QuadratureConfig,
    x0: f64,
) -> Result<ConditionalNormal> {
    let mean = conditional_mean(params, window, path, cfg, x0)?;
    let variance = conditional_variance(params, window, cfg)?;
    ConditionalNormal::new(mean, variance)
}

/// Conditional law at `t` given only `X_0 = x0` (conditioning time 0).
pub fn unconditional_law(params: &FouParams, t: f64, cfg: &QuadratureConfig, x0: f64) -> Result<ConditionalNormal> {
    let window = TimeWindow::new(0.0, t)?;
    conditional_law(params, &window, &FbmGrid::origin(), cfg, x0)
}
