//! Seeded Monte Carlo paths of fBm and Euler-discretized fOU, and empirical
//! conditional statistics by block-conditioned resimulation.
//!
//! Every path draws its normals from its own ChaCha stream (master seed, stream
//! = path index), so bundles are identical for any number of worker threads.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::model::{check_hurst, increment_autocov, FouParams};
use crate::output::sig17;

/// Largest grid for which a dense Cholesky factor is built.
pub const CHOLESKY_MAX_STEPS: usize = 10_000;

/// Fewest samples for which standard errors are reported.
pub const MIN_PATHS_FOR_STATS: usize = 100;

const CONTINUATION_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Cholesky,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            n_paths: 10_000,
            seed: 0,
            scheme: Scheme::Spectral,
        }
    }
}

impl McConfig {
    /// Finer grid and ten times the paths.
    pub fn fine() -> Self {
        Self {
            dt: 0.005,
            n_paths: 100_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.n_paths < 1 {
            return Err(invalid("paths", "must be >= 1"));
        }
        Ok(())
    }

    fn steps(&self, horizon: f64) -> Result<usize> {
        self.validate()?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(invalid("T", format!("horizon must be > 0, got {horizon}")));
        }
        let n = (horizon / self.dt).round();
        if (n * self.dt - horizon).abs() > 1e-9 * horizon.max(1.0) || n < 1.0 {
            return Err(domain(format!("horizon {horizon} is not a multiple of dt = {}", self.dt)));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "kebab-case")]
pub enum ProcessKind {
    Fbm { hurst: f64 },
    Fou { params: FouParams, x0: f64 },
}

impl ProcessKind {
    pub fn hurst(&self) -> f64 {
        match self {
            ProcessKind::Fbm { hurst } => *hurst,
            ProcessKind::Fou { params, .. } => params.hurst(),
        }
    }

    // Running state from increments, returning every grid value.
    fn integrate(&self, incs: &[f64], dt: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(incs.len() + 1);
        match self {
            ProcessKind::Fbm { .. } => {
                let mut acc = Neumaier::default();
                out.push(0.0);
                for d in incs {
                    acc.add(*d);
                    out.push(acc.sum());
                }
            }
            ProcessKind::Fou { params, x0 } => {
                let (lam, mu, sig) = (params.lambda(), params.mu(), params.sigma());
                let mut x = *x0;
                out.push(x);
                for d in incs {
                    x = x + lam * (mu - x) * dt + sig * d;
                    out.push(x);
                }
            }
        }
        out
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Dense lower-triangular factor of the increment covariance on `n` steps.
#[derive(Debug, Clone)]
struct CholeskyFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholeskyFactor {
    fn fgn(hurst: f64, n: usize, scale: f64) -> Result<Self> {
        if n > CHOLESKY_MAX_STEPS {
            return Err(domain(format!(
                "Cholesky grid of {n} steps exceeds the {CHOLESKY_MAX_STEPS}-step memory guard"
            )));
        }
        let gam: Vec<f64> = (0..n)
            .map(|k| increment_autocov(k as f64, hurst).map(|g| g * scale))
            .collect::<Result<_>>()?;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = gam[i - j];
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NonConvergence(format!(
                            "increment covariance not positive definite at row {i}"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    fn apply(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.l[i * self.n..i * self.n + i + 1].iter().zip(xi).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Circulant embedding of the increment covariance.
struct Spectral {
    n: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Spectral {
    // None when the embedding has a materially negative eigenvalue.
    fn fgn(hurst: f64, n: usize) -> Result<Option<Self>> {
        let m = 2 * n;
        let mut row = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..=n {
            let g = increment_autocov(k as f64, hurst)?;
            row[k] = Complex64::new(g, 0.0);
            if k > 0 && k < n {
                row[m - k] = Complex64::new(g, 0.0);
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let top = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        if row.iter().any(|c| c.re < -1e-10 * top) {
            return Ok(None);
        }
        let sqrt_eig = row.iter().map(|c| (c.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(Some(Self { n, sqrt_eig, fft }))
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        let (n, m) = (self.n, 2 * self.n);
        let mut w = vec![Complex64::new(0.0, 0.0); m];
        w[0] = Complex64::new(self.sqrt_eig[0] * normal(rng), 0.0);
        w[n] = Complex64::new(self.sqrt_eig[n] * normal(rng), 0.0);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..n {
            let a = self.sqrt_eig[k] * half;
            let z = Complex64::new(a * normal(rng), a * normal(rng));
            w[k] = z;
            w[m - k] = z.conj();
        }
        self.fft.process(&mut w);
        w[..n].iter().map(|c| c.re).collect()
    }
}

enum Generator {
    Cholesky(CholeskyFactor),
    Spectral(Spectral),
}

impl Generator {
    fn build(hurst: f64, n: usize, scheme: Scheme, warnings: &mut Vec<String>) -> Result<Self> {
        check_hurst(hurst)?;
        match scheme {
            Scheme::Cholesky => Ok(Generator::Cholesky(CholeskyFactor::fgn(hurst, n, 1.0)?)),
            Scheme::Spectral => match Spectral::fgn(hurst, n)? {
                Some(s) => Ok(Generator::Spectral(s)),
                None => {
                    warnings.push(format!(
                        "circulant embedding of {n} steps not nonnegative definite; fell back to cholesky"
                    ));
                    Ok(Generator::Cholesky(CholeskyFactor::fgn(hurst, n, 1.0)?))
                }
            },
        }
    }

    // Unit-spacing fractional Gaussian noise.
    fn sample(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        match self {
            Generator::Cholesky(c) => {
                let xi: Vec<f64> = (0..c.n).map(|_| normal(rng)).collect();
                c.apply(&xi)
            }
            Generator::Spectral(s) => s.sample(rng),
        }
    }
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn stream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulated paths on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBundle {
    times: Vec<f64>,
    paths: Vec<Vec<f64>>,
    kind: ProcessKind,
    config: McConfig,
    warnings: Vec<String>,
    // driving fBm of the first path, kept for conditional resimulation
    reference_fbm: Vec<f64>,
}

impl PathBundle {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn paths(&self) -> &[Vec<f64>] {
        &self.paths
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    pub fn config(&self) -> McConfig {
        self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// fBm values driving the first path.
    pub fn reference_fbm(&self) -> &[f64] {
        &self.reference_fbm
    }

    /// Values of every path at grid index `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[i]).collect()
    }

    /// One row per time, one column per path, metadata in `#` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# kind={}", serde_json::to_string(&self.kind).unwrap_or_default())?;
        writeln!(w, "# config={}", serde_json::to_string(&self.config).unwrap_or_default())?;
        for warning in &self.warnings {
            writeln!(w, "# warning={warning}")?;
        }
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.paths.len()).map(|i| format!("path{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in self.times.iter().enumerate() {
            let row: Vec<String> = std::iter::once(sig17(*t)).chain(self.paths.iter().map(|p| sig17(p[i]))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn simulate<T: Send, F>(kind: ProcessKind, horizon: f64, cfg: &McConfig, finish: F) -> Result<(Vec<T>, Vec<f64>, Vec<String>)>
where
    F: Fn(Vec<f64>) -> T + Sync,
{
    let n = cfg.steps(horizon)?;
    let hurst = kind.hurst();
    let mut warnings = Vec::new();
    let gen = Generator::build(hurst, n, cfg.scheme, &mut warnings)?;
    let scale = cfg.dt.powf(hurst);
    let draw = |i: usize| {
        let mut rng = stream(cfg.seed, i as u64);
        let mut inc = gen.sample(&mut rng);
        inc.iter_mut().for_each(|v| *v *= scale);
        inc
    };
    let reference = ProcessKind::Fbm { hurst }.integrate(&draw(0), cfg.dt);
    let out = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| finish(kind.integrate(&draw(i), cfg.dt)))
        .collect();
    Ok((out, reference, warnings))
}

fn bundle(kind: ProcessKind, horizon: f64, cfg: &McConfig) -> Result<PathBundle> {
    let (paths, reference_fbm, warnings) = simulate(kind, horizon, cfg, |p| p)?;
    let n = paths[0].len() - 1;
    let times = (0..=n).map(|i| i as f64 * cfg.dt).collect();
    Ok(PathBundle {
        times,
        paths,
        kind,
        config: *cfg,
        warnings,
        reference_fbm,
    })
}

/// fBm paths with `B_0 = 0`.
pub fn gen_fbm_paths(hurst: f64, horizon: f64, cfg: &McConfig) -> Result<PathBundle> {
    check_hurst(hurst)?;
    bundle(ProcessKind::Fbm { hurst }, horizon, cfg)
}

/// Euler paths `X_{k+1} = X_k + lambda (mu - X_k) dt + sigma dB_k` from `X_0 = initial`.
pub fn gen_fou_paths(params: &FouParams, horizon: f64, cfg: &McConfig, initial: f64) -> Result<PathBundle> {
    if !initial.is_finite() {
        return Err(invalid("z0", "initial value must be finite"));
    }
    bundle(
        ProcessKind::Fou {
            params: *params,
            x0: initial,
        },
        horizon,
        cfg,
    )
}

/// The terminal value of every path the bundle generators would produce, without storing paths.
pub fn terminal_values(kind: ProcessKind, horizon: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    simulate(kind, horizon, cfg, |p| *p.last().expect("non-empty path")).map(|r| r.0)
}

/// Sample mean and spread with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub se_mean: f64,
    pub se_std: f64,
}

impl ConditionalStats {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < MIN_PATHS_FOR_STATS {
            return Err(invalid(
                "paths",
                format!("{n} samples; at least {MIN_PATHS_FOR_STATS} needed for standard errors"),
            ));
        }
        let mut s = Neumaier::default();
        xs.iter().for_each(|&x| s.add(x));
        let mean = s.sum() / n as f64;
        let mut q = Neumaier::default();
        xs.iter().for_each(|&x| q.add((x - mean) * (x - mean)));
        let variance = q.sum() / (n - 1) as f64;
        let std_dev = variance.sqrt();
        Ok(Self {
            n,
            mean,
            variance,
            std_dev,
            se_mean: std_dev / (n as f64).sqrt(),
            se_std: std_dev / (2.0 * (n - 1) as f64).sqrt(),
        })
    }
}

/// Exact Gaussian continuation of the increments after step `n1` given the
/// first `n1`, through the Cholesky factor of the full increment covariance:
/// `x2 = L21 L11^{-1} x1 + L22 xi`.
pub struct ConditionalSampler {
    hurst: f64,
    dt: f64,
    n1: usize,
    factor: CholeskyFactor,
}

impl ConditionalSampler {
    /// Continuations from grid index `n1` (time `n1 dt`) to index `n`.
    pub fn new(hurst: f64, dt: f64, n1: usize, n: usize) -> Result<Self> {
        check_hurst(hurst)?;
        if n1 > n || n == 0 {
            return Err(domain(format!("conditioning index {n1} beyond horizon index {n}")));
        }
        let factor = CholeskyFactor::fgn(hurst, n, dt.powf(2.0 * hurst))?;
        Ok(Self { hurst, dt, n1, factor })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Conditional mean of the future increments, `L21 L11^{-1} x1`.
    pub fn shift(&self, past: &[f64]) -> Result<Vec<f64>> {
        let (n1, n) = (self.n1, self.factor.n);
        if past.len() != n1 {
            return Err(domain(format!("expected {n1} past increments, got {}", past.len())));
        }
        let mut xi = vec![0.0; n1];
        for i in 0..n1 {
            let s: f64 = (0..i).map(|j| self.factor.at(i, j) * xi[j]).sum();
            xi[i] = (past[i] - s) / self.factor.at(i, i);
        }
        Ok((n1..n).map(|i| (0..n1).map(|j| self.factor.at(i, j) * xi[j]).sum()).collect())
    }

    /// `X_t` for `count` continuations of the process from a fixed past.
    ///
    /// `past_fbm` holds the driving fBm on grid indices `0..=n1` and `x_s` the
    /// process value at index `n1`. `X_t` is linear in the redrawn normals, so
    /// the Euler recursion is folded into a single weight vector.
    pub fn terminal_samples(&self, kind: &ProcessKind, past_fbm: &[f64], x_s: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
        if (kind.hurst() - self.hurst).abs() > 0.0 {
            return Err(domain("process Hurst index differs from the sampler's"));
        }
        if past_fbm.len() != self.n1 + 1 {
            return Err(domain(format!("expected {} past fBm values, got {}", self.n1 + 1, past_fbm.len())));
        }
        let past: Vec<f64> = past_fbm.windows(2).map(|w| w[1] - w[0]).collect();
        let m = self.shift(&past)?;
        let n2 = self.factor.n - self.n1;
        let (q, drift, sig) = match kind {
            ProcessKind::Fbm { .. } => (1.0, 0.0, 1.0),
            ProcessKind::Fou { params, .. } => (
                1.0 - params.lambda() * self.dt,
                params.lambda() * params.mu() * self.dt,
                params.sigma(),
            ),
        };
        // w_j = q^{n2 - 1 - j}
        let mut w = vec![1.0; n2];
        for j in (0..n2.saturating_sub(1)).rev() {
            w[j] = w[j + 1] * q;
        }
        let qn = if n2 == 0 { 1.0 } else { w[0] * q };
        let base = qn * x_s
            + drift * w.iter().sum::<f64>()
            + sig * w.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>();
        // v_k = sum_{j >= k} w_j L22[j][k]
        let v: Vec<f64> = (0..n2)
            .map(|k| (k..n2).map(|j| w[j] * self.factor.at(self.n1 + j, self.n1 + k)).sum())
            .collect();
        Ok((0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, CONTINUATION_STREAM + i as u64);
                let mut acc = Neumaier::default();
                for vk in &v {
                    acc.add(vk * normal(&mut rng));
                }
                base + sig * acc.sum()
            })
            .collect())
    }
}

fn grid_index(x: f64, dt: f64, tol: f64, name: &'static str) -> Result<usize> {
    let i = (x / dt).round();
    if !(x >= 0.0) || (i * dt - x).abs() > tol.max(1e-12 * x.max(1.0)) {
        return Err(invalid(name, format!("{x} is not on the grid of step {dt}")));
    }
    Ok(i as usize)
}

/// Statistics of `X_t` given the bundle's information up to `s`. For `s = 0`
/// these are plain ensemble statistics; otherwise the first path's `[0, s]`
/// segment is held fixed and `n_paths` continuations are redrawn.
/// `tol` bounds the distance of `s` and `t` from grid points.
pub fn empirical_conditional_stats(bundle: &PathBundle, s: f64, t: f64, tol: f64) -> Result<ConditionalStats> {
    let cfg = bundle.config();
    if cfg.n_paths < MIN_PATHS_FOR_STATS {
        return Err(invalid(
            "paths",
            format!("{} paths; at least {MIN_PATHS_FOR_STATS} needed", cfg.n_paths),
        ));
    }
    let i_s = grid_index(s, cfg.dt, tol, "s")?;
    let i_t = grid_index(t, cfg.dt, tol, "t")?;
    if i_t > bundle.n_steps() || i_s > i_t {
        return Err(domain(format!("need 0 <= s <= t <= {}", bundle.times.last().unwrap_or(&0.0))));
    }
    if i_s == 0 {
        return ConditionalStats::from_samples(&bundle.column(i_t));
    }
    let sampler = ConditionalSampler::new(bundle.kind.hurst(), cfg.dt, i_s, i_t)?;
    let xs = bundle.paths[0][i_s];
    let samples = sampler.terminal_samples(&bundle.kind, &bundle.reference_fbm[..=i_s], xs, cfg.n_paths, cfg.seed)?;
    ConditionalStats::from_samples(&samples)
}
