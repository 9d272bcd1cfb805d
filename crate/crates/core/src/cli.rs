//! The `fbmcond` command line: variance, mean, pdf, price and mc-validate.
//!
//! Every numeric flag takes a number or a grid `lo:hi:step`; rows are emitted
//! for the Cartesian product of all grids in flag order.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::{
    conditional_mean_given_state, conditional_variance_report, reconstruct_state, ConditionalNormal, KernelRule,
    QuadratureConfig,
};
use crate::cos::{cos_price, gfou_closed_form, CosConfig, OptionSpec, Side};
use crate::derived::{fcir_initial_state, fcir_state_params, pdf_curve, trapezoid, ProcessMap};
use crate::error::{domain, invalid, Error, Result};
use crate::mc::{empirical_conditional_stats, gen_fbm_paths, gen_fou_paths, McConfig, Scheme};
use crate::model::{FbmGrid, FouParams, TimeWindow};
use crate::output::{Cell, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fbmcond", version, about = "Conditional laws of fBm and fOU processes, densities and option prices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Conditional variance of the state process.
    Variance(Args),
    /// Conditional mean given a realized fBm path.
    Mean(Args),
    /// Density of the derived process on a grid.
    Pdf(Args),
    /// European option prices by the COS method.
    Price(Args),
    /// Compare analytic moments with Monte Carlo.
    McValidate(Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Variance(_) => "variance",
            Command::Mean(_) => "mean",
            Command::Pdf(_) => "pdf",
            Command::Price(_) => "price",
            Command::McValidate(_) => "mc-validate",
        }
    }

    pub fn args(&self) -> &Args {
        match self {
            Command::Variance(a) | Command::Mean(a) | Command::Pdf(a) | Command::Price(a) | Command::McValidate(a) => a,
        }
    }

    fn args_mut(&mut self) -> &mut Args {
        match self {
            Command::Variance(a) | Command::Mean(a) | Command::Pdf(a) | Command::Price(a) | Command::McValidate(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Fbm,
    Fou,
    Gfou,
    Fcir,
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideArg {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Cholesky,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    CellAverage,
    LeftPoint,
}

/// Flags shared by all subcommands. Numeric values are kept as given so that
/// the echoed configuration replays exactly.
#[derive(Debug, Clone, clap::Args, Serialize, Deserialize, PartialEq)]
pub struct Args {
    #[arg(long, value_enum, default_value = "fou")]
    pub model: Model,
    #[arg(long, default_value = "0.5")]
    pub hurst: String,
    /// Mean reversion; defaults to 0.5 (ignored for fbm).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Long-term mean; defaults to 0, ln z0 (gfou) or g^{-1}(z0) (poly).
    #[arg(long)]
    pub mu: Option<String>,
    /// Volatility; defaults to 0.3 (1 for fbm).
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long, default_value = "0.8")]
    pub delta: String,
    /// Conditioning time.
    #[arg(long, default_value = "0")]
    pub s: String,
    /// Forecast time, default 5; the valuation time for `price`, default 0.
    #[arg(long)]
    pub t: Option<String>,
    /// Maturity for `price`.
    #[arg(long = "T", default_value = "3")]
    pub horizon: String,
    /// Initial value of the derived process (of the state for fbm/fou); defaults to 10 or 0.
    #[arg(long)]
    pub z0: Option<String>,

    #[arg(long, default_value = "0.5")]
    pub step_m: String,
    #[arg(long, default_value = "5")]
    pub range_a: String,
    #[arg(long, default_value = "20")]
    pub max_terms: String,
    #[arg(long, default_value = "1e-8")]
    pub tol: String,
    #[arg(long, default_value = "200")]
    pub psi_nodes: String,
    /// Untouched trapezoid range, and origin form only at s = 0.
    #[arg(long)]
    pub literal_scheme: bool,
    #[arg(long, value_enum, default_value = "cell-average")]
    pub kernel_rule: KernelArg,

    #[arg(long = "terms-L", default_value = "16")]
    pub terms_l: String,
    #[arg(long, default_value = "10")]
    pub width_mult: String,

    #[arg(long, default_value = "10")]
    pub strike: String,
    #[arg(long, default_value = "0.1")]
    pub rate: String,
    #[arg(long, value_enum, default_value = "call")]
    pub side: SideArg,

    #[arg(long, default_value = "0.01")]
    pub dt: String,
    #[arg(long, default_value = "10000")]
    pub paths: String,
    #[arg(long, default_value = "0")]
    pub seed: String,
    #[arg(long, value_enum, default_value = "spectral")]
    pub scheme: SchemeArg,
    /// Independent seeds averaged by `mc-validate`.
    #[arg(long, default_value = "10")]
    pub repeats: String,

    /// Density grid size for `pdf`.
    #[arg(long, default_value = "401")]
    pub points: String,
    /// Conditioning fBm path as CSV rows `time,value`; a seeded path is drawn otherwise.
    #[arg(long)]
    pub path: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rerun the configuration echoed in an earlier output's metadata.
    #[arg(long)]
    #[serde(skip)]
    pub from_meta: Option<PathBuf>,
}

impl Args {
    /// Fill model-dependent defaults so the echoed configuration is complete.
    fn resolved(&self, pricing: bool) -> Self {
        let mut a = self.clone();
        a.t.get_or_insert_with(|| if pricing { "0" } else { "5" }.into());
        let derived = matches!(a.model, Model::Gfou | Model::Fcir | Model::Poly);
        a.lambda.get_or_insert_with(|| if a.model == Model::Fbm { "0" } else { "0.5" }.into());
        a.sigma.get_or_insert_with(|| if a.model == Model::Fbm { "1" } else { "0.3" }.into());
        a.z0.get_or_insert_with(|| if derived { "10" } else { "0" }.into());
        a.format.get_or_insert(Format::Csv);
        a.from_meta = None;
        a
    }
}

/// Parse `x` or `lo:hi:step`.
pub fn parse_grid(flag: &'static str, text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| invalid(flag, format!("`{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(invalid(flag, format!("`{s}` is not finite")));
        }
        Ok(v)
    };
    match parts.as_slice() {
        [x] => Ok(vec![num(x)?]),
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(invalid(flag, format!("grid `{text}` needs lo <= hi and step > 0")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(invalid(flag, format!("grid `{text}` has more than a million points")));
            }
            Ok((0..=n).map(|i| lo + step * i as f64).collect())
        }
        _ => Err(invalid(flag, format!("`{text}` is neither a number nor lo:hi:step"))),
    }
}

fn parse_count(flag: &'static str, v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v > 1e15 {
        return Err(invalid(flag, format!("must be a nonnegative integer, got {v}")));
    }
    Ok(v as usize)
}

/// One point of the flag grid.
#[derive(Debug, Clone, Copy)]
struct Point {
    hurst: f64,
    lambda: f64,
    mu: Option<f64>,
    sigma: f64,
    delta: f64,
    s: f64,
    t: f64,
    horizon: f64,
    z0: f64,
    step_m: f64,
    range_a: f64,
    max_terms: f64,
    tol: f64,
    psi_nodes: f64,
    terms_l: f64,
    width_mult: f64,
    strike: f64,
    rate: f64,
    dt: f64,
    paths: f64,
    seed: f64,
    repeats: f64,
    points: f64,
}

fn expand(a: &Args) -> Result<Vec<Point>> {
    let opt = |flag: &'static str, v: &Option<String>| -> Result<Vec<Option<f64>>> {
        match v {
            Some(s) => Ok(parse_grid(flag, s)?.into_iter().map(Some).collect()),
            None => Ok(vec![None]),
        }
    };
    let req = |flag: &'static str, v: &Option<String>| -> Result<Vec<f64>> {
        parse_grid(flag, v.as_deref().expect("resolved before expansion"))
    };
    let dims: Vec<Vec<Option<f64>>> = vec![
        parse_grid("hurst", &a.hurst)?.into_iter().map(Some).collect(),
        req("lambda", &a.lambda)?.into_iter().map(Some).collect(),
        opt("mu", &a.mu)?,
        req("sigma", &a.sigma)?.into_iter().map(Some).collect(),
        parse_grid("delta", &a.delta)?.into_iter().map(Some).collect(),
        parse_grid("s", &a.s)?.into_iter().map(Some).collect(),
        parse_grid("t", a.t.as_deref().unwrap_or("5"))?.into_iter().map(Some).collect(),
        parse_grid("T", &a.horizon)?.into_iter().map(Some).collect(),
        req("z0", &a.z0)?.into_iter().map(Some).collect(),
        parse_grid("step-m", &a.step_m)?.into_iter().map(Some).collect(),
        parse_grid("range-a", &a.range_a)?.into_iter().map(Some).collect(),
        parse_grid("max-terms", &a.max_terms)?.into_iter().map(Some).collect(),
        parse_grid("tol", &a.tol)?.into_iter().map(Some).collect(),
        parse_grid("psi-nodes", &a.psi_nodes)?.into_iter().map(Some).collect(),
        parse_grid("terms-L", &a.terms_l)?.into_iter().map(Some).collect(),
        parse_grid("width-mult", &a.width_mult)?.into_iter().map(Some).collect(),
        parse_grid("strike", &a.strike)?.into_iter().map(Some).collect(),
        parse_grid("rate", &a.rate)?.into_iter().map(Some).collect(),
        parse_grid("dt", &a.dt)?.into_iter().map(Some).collect(),
        parse_grid("paths", &a.paths)?.into_iter().map(Some).collect(),
        parse_grid("seed", &a.seed)?.into_iter().map(Some).collect(),
        parse_grid("repeats", &a.repeats)?.into_iter().map(Some).collect(),
        parse_grid("points", &a.points)?.into_iter().map(Some).collect(),
    ];
    let total: usize = dims.iter().map(Vec::len).product();
    if total > 1_000_000 {
        return Err(invalid("hurst", format!("flag grid has {total} points; limit is a million")));
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        let v = |k: usize| dims[k][idx[k]];
        let g = |k: usize| v(k).expect("required flag");
        out.push(Point {
            hurst: g(0),
            lambda: g(1),
            mu: v(2),
            sigma: g(3),
            delta: g(4),
            s: g(5),
            t: g(6),
            horizon: g(7),
            z0: g(8),
            step_m: g(9),
            range_a: g(10),
            max_terms: g(11),
            tol: g(12),
            psi_nodes: g(13),
            terms_l: g(14),
            width_mult: g(15),
            strike: g(16),
            rate: g(17),
            dt: g(18),
            paths: g(19),
            seed: g(20),
            repeats: g(21),
            points: g(22),
        });
        // odometer, last flag fastest
        for k in (0..dims.len()).rev() {
            idx[k] += 1;
            if idx[k] < dims[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(out)
}

/// State dynamics, initial state and map of one model at one grid point.
struct Resolved {
    params: FouParams,
    x0: f64,
    map: ProcessMap,
}

fn resolve(model: Model, p: &Point) -> Result<Resolved> {
    match model {
        Model::Fbm => Ok(Resolved {
            params: FouParams::fbm(p.hurst)?,
            x0: p.z0,
            map: ProcessMap::identity(),
        }),
        Model::Fou => Ok(Resolved {
            params: FouParams::new(p.lambda, p.mu.unwrap_or(0.0), p.sigma, p.hurst)?,
            x0: p.z0,
            map: ProcessMap::identity(),
        }),
        Model::Gfou => {
            if !(p.z0 > 0.0) {
                return Err(invalid("z0", format!("gfou needs z0 > 0, got {}", p.z0)));
            }
            let x0 = p.z0.ln();
            Ok(Resolved {
                params: FouParams::new(p.lambda, p.mu.unwrap_or(x0), p.sigma, p.hurst)?,
                x0,
                map: ProcessMap::gfou(),
            })
        }
        Model::Fcir => {
            if !(p.z0 >= 0.0) {
                return Err(invalid("z0", format!("fcir needs z0 >= 0, got {}", p.z0)));
            }
            Ok(Resolved {
                params: fcir_state_params(p.lambda, p.hurst)?,
                x0: fcir_initial_state(p.z0, p.sigma)?,
                map: ProcessMap::fcir(p.sigma)?,
            })
        }
        Model::Poly => {
            let map = ProcessMap::polynomial(p.delta)?;
            if !(p.z0 >= 0.0) {
                return Err(invalid("z0", format!("poly needs z0 >= 0, got {}", p.z0)));
            }
            let x0 = map.inverse(p.z0)?;
            Ok(Resolved {
                params: FouParams::new(p.lambda, p.mu.unwrap_or(x0), p.sigma, p.hurst)?,
                x0,
                map,
            })
        }
    }
}

fn quad_cfg(a: &Args, p: &Point) -> Result<QuadratureConfig> {
    let base = if a.literal_scheme {
        QuadratureConfig::literal()
    } else {
        QuadratureConfig::default()
    };
    let cfg = QuadratureConfig {
        step_m: p.step_m,
        range_a: p.range_a,
        max_terms_n: parse_count("max-terms", p.max_terms)?,
        series_tol: p.tol,
        psi_nodes: parse_count("psi-nodes", p.psi_nodes)?,
        kernel_rule: match a.kernel_rule {
            KernelArg::CellAverage => KernelRule::CellAverage,
            KernelArg::LeftPoint => KernelRule::LeftPoint,
        },
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

fn mc_cfg(a: &Args, p: &Point) -> Result<McConfig> {
    let cfg = McConfig {
        dt: p.dt,
        n_paths: parse_count("paths", p.paths)?,
        seed: parse_count("seed", p.seed)? as u64,
        scheme: match a.scheme {
            SchemeArg::Cholesky => Scheme::Cholesky,
            SchemeArg::Spectral => Scheme::Spectral,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cos_cfg(p: &Point) -> Result<CosConfig> {
    let cfg = CosConfig {
        n_terms: parse_count("terms-L", p.terms_l)?,
        width_mult: p.width_mult,
        ..CosConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_path(file: &PathBuf) -> Result<FbmGrid> {
    let text = fs::read_to_string(file)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',');
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            return Err(invalid("path", format!("malformed line `{line}`")));
        };
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                times.push(x);
                values.push(y);
            }
            // header
            _ if times.is_empty() => continue,
            _ => return Err(invalid("path", format!("malformed line `{line}`"))),
        }
    }
    FbmGrid::new(times, values).map_err(|e| invalid("path", e.to_string()))
}

/// The conditioning fBm path on `[0, s]`: from `--path`, or the first path of a seeded bundle.
fn conditioning_path(a: &Args, hurst: f64, s: f64, mc: &McConfig) -> Result<(FbmGrid, &'static str)> {
    if s == 0.0 {
        return Ok((FbmGrid::origin(), "origin"));
    }
    if let Some(file) = &a.path {
        let g = read_path(file)?;
        if (g.end_time() - s).abs() > 1e-9 * s.max(1.0) {
            return Err(invalid("path", format!("path ends at {}, but --s is {s}", g.end_time())));
        }
        return Ok((g, "file"));
    }
    let cfg = McConfig { n_paths: 1, ..*mc };
    let b = gen_fbm_paths(hurst, s, &cfg).map_err(|e| match e {
        Error::Domain(m) => invalid("s", m),
        other => other,
    })?;
    Ok((FbmGrid::new(b.times().to_vec(), b.reference_fbm().to_vec())?, "seeded"))
}

fn window(s: f64, t: f64) -> Result<TimeWindow> {
    TimeWindow::new(s, t)
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Fbm => "fbm",
        Model::Fou => "fou",
        Model::Gfou => "gfou",
        Model::Fcir => "fcir",
        Model::Poly => "poly",
    }
}

fn cmd_variance(a: &Args, pts: &[Point]) -> Result<Table> {
    let mut table = Table::new(vec![
        "model", "hurst", "lambda", "sigma", "s", "t", "variance", "std", "nodes", "max_terms_used", "series_warning",
    ]);
    let rows: Vec<Result<Vec<Cell>>> = pts
        .par_iter()
        .map(|p| {
            let r = resolve(a.model, p)?;
            let w = window(p.s, p.t)?;
            let rep = conditional_variance_report(&r.params, &w, &quad_cfg(a, p)?)?;
            Ok(vec![
                Cell::Text(model_name(a.model).into()),
                Cell::Num(p.hurst),
                Cell::Num(r.params.lambda()),
                Cell::Num(r.params.sigma()),
                Cell::Num(p.s),
                Cell::Num(p.t),
                Cell::Num(rep.variance),
                Cell::Num(rep.variance.sqrt()),
                Cell::Int(rep.nodes as i64),
                Cell::Int(rep.max_terms_used as i64),
                Cell::Bool(rep.series_warning),
            ])
        })
        .collect();
    for (row, p) in rows.into_iter().zip(pts) {
        let row = row?;
        if row[10] == Cell::Bool(true) {
            table
                .warnings
                .push(format!("series hit the term cap below tolerance at hurst={} s={} t={}", p.hurst, p.s, p.t));
        }
        table.push(row);
    }
    Ok(table)
}

/// Conditional law of the state at `t` given the path up to `s`.
fn law_at(a: &Args, p: &Point, r: &Resolved, s: f64, t: f64) -> Result<(ConditionalNormal, f64, &'static str)> {
    let w = window(s, t)?;
    let q = quad_cfg(a, p)?;
    let mc = mc_cfg(a, p)?;
    let (path, source) = conditioning_path(a, p.hurst, s, &mc)?;
    let xs = reconstruct_state(&r.params, &path, r.x0);
    let mean = conditional_mean_given_state(&r.params, &w, &path, &q, xs)?;
    let variance = conditional_variance_report(&r.params, &w, &q)?.variance;
    Ok((ConditionalNormal::new(mean, variance)?, xs, source))
}

fn cmd_mean(a: &Args, pts: &[Point]) -> Result<Table> {
    let mut table = Table::new(vec![
        "model", "hurst", "s", "t", "x0", "x_s", "mean", "variance", "std", "path_source",
    ]);
    for p in pts {
        let r = resolve(a.model, p)?;
        let (law, xs, source) = law_at(a, p, &r, p.s, p.t)?;
        table.push(vec![
            Cell::Text(model_name(a.model).into()),
            Cell::Num(p.hurst),
            Cell::Num(p.s),
            Cell::Num(p.t),
            Cell::Num(r.x0),
            Cell::Num(xs),
            Cell::Num(law.mean),
            Cell::Num(law.variance),
            Cell::Num(law.std_dev()),
            Cell::Text(source.into()),
        ]);
    }
    Ok(table)
}

fn cmd_pdf(a: &Args, pts: &[Point]) -> Result<Table> {
    let mut table = Table::new(vec!["model", "hurst", "s", "t", "x", "z", "density"]);
    for p in pts {
        let r = resolve(a.model, p)?;
        let (law, _, _) = law_at(a, p, &r, p.s, p.t)?;
        if r.map.law_crosses_domain(&law) {
            table.warnings.push(format!(
                "hurst={} t={}: {:.3e} of the state mass lies outside the map's domain and is masked",
                p.hurst,
                p.t,
                r.map.masked_mass(&law)
            ));
        }
        let n = parse_count("points", p.points)?;
        let curve = pdf_curve(&r.map, &law, n)?;
        let mass = trapezoid(&curve);
        if (mass - 1.0).abs() > 1e-4 {
            table
                .warnings
                .push(format!("hurst={} t={}: density integrates to {mass:.6} on the grid", p.hurst, p.t));
        }
        for (z, f) in curve {
            let x = r.map.inverse(z).unwrap_or(f64::NAN);
            table.push(vec![
                Cell::Text(model_name(a.model).into()),
                Cell::Num(p.hurst),
                Cell::Num(p.s),
                Cell::Num(p.t),
                Cell::Num(x),
                Cell::Num(z),
                Cell::Num(f),
            ]);
        }
    }
    Ok(table)
}

fn cmd_price(a: &Args, pts: &[Point]) -> Result<Table> {
    let mut table = Table::new(vec![
        "model",
        "hurst",
        "strike",
        "side",
        "terms_L",
        "t",
        "T",
        "method",
        "price",
        "closed_form",
        "abs_error",
        "rel_error",
        "parity_residual",
    ]);
    let side = match a.side {
        SideArg::Call => Side::Call,
        SideArg::Put => Side::Put,
    };
    for p in pts {
        let r = resolve(a.model, p)?;
        let spec = OptionSpec::new(p.strike, p.rate, p.t, p.horizon, side)?;
        let (law, _, _) = law_at(a, p, &r, p.t, p.horizon)?;
        let cfg = cos_cfg(p)?;
        let price = cos_price(&spec, &r.map, &law, &cfg)?;
        let blank = || Cell::Text(String::new());
        let (closed, abs_e, rel_e, parity) = if r.map.kind() == crate::derived::MapKind::Gfou {
            let exact = gfou_closed_form(&spec, &law)?;
            let other_side = OptionSpec {
                side: match side {
                    Side::Call => Side::Put,
                    Side::Put => Side::Call,
                },
                ..spec
            };
            let other = cos_price(&other_side, &r.map, &law, &cfg)?;
            let (call, put) = if side == Side::Call { (price, other) } else { (other, price) };
            let fwd = (law.mean + 0.5 * law.variance).exp();
            let resid = call - put - spec.discount() * (fwd - spec.strike);
            let err = (price - exact).abs();
            (
                Cell::Num(exact),
                Cell::Num(err),
                Cell::Num(if exact != 0.0 { err / exact } else { f64::NAN }),
                Cell::Num(resid),
            )
        } else {
            (blank(), blank(), blank(), blank())
        };
        table.push(vec![
            Cell::Text(model_name(a.model).into()),
            Cell::Num(p.hurst),
            Cell::Num(p.strike),
            Cell::Text(if side == Side::Call { "call" } else { "put" }.into()),
            Cell::Int(cfg.n_terms as i64),
            Cell::Num(p.t),
            Cell::Num(p.horizon),
            Cell::Text("cos".into()),
            Cell::Num(price),
            closed,
            abs_e,
            rel_e,
            parity,
        ]);
    }
    Ok(table)
}

fn cmd_mc_validate(a: &Args, pts: &[Point]) -> Result<Table> {
    let mut table = Table::new(vec![
        "model",
        "hurst",
        "s",
        "t",
        "quantity",
        "analytic",
        "empirical",
        "se",
        "rel_error_pct",
        "z_score",
    ]);
    for p in pts {
        let r = resolve(a.model, p)?;
        let q = quad_cfg(a, p)?;
        let mc = mc_cfg(a, p)?;
        let repeats = parse_count("repeats", p.repeats)?;
        if repeats == 0 {
            return Err(invalid("repeats", "must be >= 1"));
        }
        let w = window(p.s, p.t)?;
        let sd = conditional_variance_report(&r.params, &w, &q)?.variance.sqrt();
        let (mut emp_sd, mut emp_mean, mut mean_ref, mut se_sd, mut se_mean, mut rel) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..repeats {
            let cfg = McConfig {
                seed: mc.seed + k as u64,
                ..mc
            };
            let b = if a.model == Model::Fbm {
                gen_fbm_paths(p.hurst, p.t, &cfg)?
            } else {
                gen_fou_paths(&r.params, p.t, &cfg, r.x0)?
            };
            table.warnings.extend(b.warnings().iter().cloned());
            let st = empirical_conditional_stats(&b, p.s, p.t, 1e-9)?;
            // analytic mean given the bundle's own conditioning path and state
            let i_s = (p.s / cfg.dt).round() as usize;
            let path = if i_s == 0 {
                FbmGrid::origin()
            } else {
                FbmGrid::new(b.times()[..=i_s].to_vec(), b.reference_fbm()[..=i_s].to_vec())?
            };
            let m = conditional_mean_given_state(&r.params, &w, &path, &q, b.paths()[0][i_s])?;
            let f = 1.0 / repeats as f64;
            emp_sd += f * st.std_dev;
            emp_mean += f * st.mean;
            mean_ref += f * m;
            se_sd += f * st.se_std;
            se_mean += f * st.se_mean;
            rel += f * (st.std_dev - sd).abs() / sd;
        }
        let root = (repeats as f64).sqrt();
        let (se_sd, se_mean) = (se_sd / root, se_mean / root);
        let common = |quantity: &str| {
            vec![
                Cell::Text(model_name(a.model).into()),
                Cell::Num(p.hurst),
                Cell::Num(p.s),
                Cell::Num(p.t),
                Cell::Text(quantity.into()),
            ]
        };
        let mut row = common("std");
        row.extend([
            Cell::Num(sd),
            Cell::Num(emp_sd),
            Cell::Num(se_sd),
            Cell::Num(100.0 * rel),
            Cell::Num((emp_sd - sd) / se_sd),
        ]);
        table.push(row);
        let mut row = common("mean");
        row.extend([
            Cell::Num(mean_ref),
            Cell::Num(emp_mean),
            Cell::Num(se_mean),
            Cell::Num(100.0 * (emp_mean - mean_ref).abs() / mean_ref.abs()),
            Cell::Num((emp_mean - mean_ref) / se_mean),
        ]);
        table.push(row);
    }
    Ok(table)
}

fn load_meta(file: &PathBuf) -> Result<serde_json::Value> {
    let text = fs::read_to_string(file)?;
    let bad = |m: String| invalid("from-meta", m);
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        return v.get("meta").cloned().ok_or_else(|| bad("no `meta` object".into()));
    }
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("# meta="))
        .ok_or_else(|| bad("no `# meta=` line".into()))?;
    serde_json::from_str(line).map_err(|e| bad(e.to_string()))
}

fn replay(cmd: &Command, file: &PathBuf) -> Result<Command> {
    let meta = load_meta(file)?;
    let name = meta.get("command").and_then(|v| v.as_str()).unwrap_or_default();
    if name != cmd.name() {
        return Err(invalid("from-meta", format!("metadata is for `{name}`, not `{}`", cmd.name())));
    }
    let args: Args = serde_json::from_value(meta.get("args").cloned().unwrap_or_default())
        .map_err(|e| invalid("from-meta", e.to_string()))?;
    let mut out = cmd.clone();
    let given = cmd.args();
    let target = out.args_mut();
    let (format, dest) = (given.format, given.out.clone());
    *target = args;
    if format.is_some() {
        target.format = format;
    }
    if dest.is_some() {
        target.out = dest;
    }
    Ok(out)
}

/// Run a parsed command, writing to `stdout` unless `--out` is set.
pub fn execute<W: Write>(cmd: &Command, stdout: &mut W) -> Result<()> {
    let cmd = match &cmd.args().from_meta {
        Some(file) => replay(cmd, file)?,
        None => cmd.clone(),
    };
    let args = cmd.args().resolved(matches!(cmd, Command::Price(_)));
    let pts = expand(&args)?;
    let table = match &cmd {
        Command::Variance(_) => cmd_variance(&args, &pts)?,
        Command::Mean(_) => cmd_mean(&args, &pts)?,
        Command::Pdf(_) => cmd_pdf(&args, &pts)?,
        Command::Price(_) => cmd_price(&args, &pts)?,
        Command::McValidate(_) => cmd_mc_validate(&args, &pts)?,
    };
    let mut echoed = args.clone();
    echoed.out = None;
    let meta = serde_json::json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "args": echoed,
        "quadrature_defaults": QuadratureConfig::default(),
        "cos_defaults": CosConfig::default(),
    });
    let mut buf = Vec::new();
    match args.format.unwrap_or(Format::Csv) {
        Format::Csv => table.write_csv(&mut buf, &meta)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, &table.to_json(&meta)).map_err(|e| domain(e.to_string()))?;
            buf.push(b'\n');
        }
    }
    match &args.out {
        Some(path) => fs::write(path, &buf)?,
        None => stdout.write_all(&buf)?,
    }
    Ok(())
}

fn flag_of(name: &str) -> String {
    let flag = match name {
        "step_m" => "step-m",
        "range_a" => "range-a",
        "max_terms_n" => "max-terms",
        "series_tol" => "tol",
        "psi_nodes" => "psi-nodes",
        "terms_L" => "terms-L",
        "width_mult" => "width-mult",
        other => other,
    };
    format!("--{flag}")
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) | Error::Overflow(_) => EXIT_NUMERICAL,
        Error::Domain(_) | Error::InvalidParameter { .. } | Error::Io(_) => EXIT_USAGE,
    }
}

/// Parse `argv`, run, print a one-line diagnostic on failure and return the exit status.
pub fn run<I, T, W, E>(argv: I, stdout: &mut W, stderr: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{e}");
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let msg = match &e {
                Error::InvalidParameter { name, reason } => format!("error: {}: {reason}", flag_of(name)),
                other => format!("error: {other}"),
            };
            let _ = writeln!(stderr, "{msg}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("hurst", "0.3").unwrap(), vec![0.3]);
        let g = parse_grid("hurst", "0.1:0.9:0.1").unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[8] - 0.9).abs() < 1e-15);
        assert!(parse_grid("hurst", "1:0:0.1").is_err());
        assert!(parse_grid("hurst", "0:1:0").is_err());
        assert!(parse_grid("hurst", "a").is_err());
        assert!(parse_grid("hurst", "0:1").is_err());
    }

    #[test]
    fn odometer_order() {
        let cli = Cli::try_parse_from(["fbmcond", "variance", "--hurst", "0.3:0.4:0.1", "--t", "1:2:1"]).unwrap();
        let pts = expand(&cli.command.args().resolved(false)).unwrap();
        let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.hurst, p.t)).collect();
        assert_eq!(pairs, vec![(0.3, 1.0), (0.3, 2.0), (0.4, 1.0), (0.4, 2.0)]);
    }

    #[test]
    fn model_defaults() {
        let cli = Cli::try_parse_from(["fbmcond", "variance", "--model", "gfou"]).unwrap();
        let a = cli.command.args().resolved(false);
        let p = expand(&a).unwrap()[0];
        let r = resolve(Model::Gfou, &p).unwrap();
        assert!((r.params.mu() - 10f64.ln()).abs() < 1e-15);
        assert!((r.x0 - 10f64.ln()).abs() < 1e-15);
        let r = resolve(Model::Poly, &p).unwrap();
        assert!((r.map.forward(r.params.mu()) - 10.0).abs() < 1e-10);
        let r = resolve(Model::Fcir, &p).unwrap();
        assert_eq!(r.params.lambda(), 0.25);
        assert!((r.map.forward(r.x0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NonConvergence("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&invalid("t", "bad")), EXIT_USAGE);
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(["fbmcond", "variance", "--s", "3", "--t", "2"], &mut out, &mut err);
        assert_eq!(code, EXIT_USAGE);
        assert!(String::from_utf8(err).unwrap().contains("--t"));
        let code = run(["fbmcond", "variance", "--bogus"], &mut out, &mut Vec::new());
        assert_eq!(code, EXIT_USAGE);
    }
}
