//! Derived processes `Z = g(X)` of an fOU state `X`, and their densities.

use serde::{Deserialize, Serialize};

use crate::conditional::ConditionalNormal;
use crate::error::{domain, invalid, Result};
use crate::model::FouParams;
use crate::specfun::{norm_cdf, norm_pdf};

const INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MapKind {
    Identity,
    /// `g = exp`.
    Gfou,
    /// `g(x) = sigma^2 x^2 / 4` on `x >= 0`.
    Fcir { sigma: f64 },
    /// `g(x) = delta x^3 / 6 + (1 - delta) x^2 / 2` on `x >= 0`.
    Polynomial { delta: f64 },
}

/// An increasing map from the fOU state to a derived state.
///
/// `forward` and `derivative` are defined on all of R by the same formula, which
/// is what payoff integration uses; `inverse` and densities are restricted to
/// [`ProcessMap::domain`], where the map is strictly monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessMap {
    kind: MapKind,
}

impl ProcessMap {
    pub fn new(kind: MapKind) -> Result<Self> {
        match kind {
            MapKind::Fcir { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(invalid("sigma", format!("fCIR scale must be > 0, got {sigma}")))
            }
            MapKind::Polynomial { delta } if !(0.0..=1.0).contains(&delta) => {
                Err(invalid("delta", format!("must lie in [0, 1], got {delta}")))
            }
            _ => Ok(Self { kind }),
        }
    }

    pub fn identity() -> Self {
        Self { kind: MapKind::Identity }
    }

    pub fn gfou() -> Self {
        Self { kind: MapKind::Gfou }
    }

    pub fn fcir(sigma: f64) -> Result<Self> {
        Self::new(MapKind::Fcir { sigma })
    }

    pub fn polynomial(delta: f64) -> Result<Self> {
        Self::new(MapKind::Polynomial { delta })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn forward(&self, x: f64) -> f64 {
        match self.kind {
            MapKind::Identity => x,
            MapKind::Gfou => x.exp(),
            MapKind::Fcir { sigma } => 0.25 * sigma * sigma * x * x,
            MapKind::Polynomial { delta } => x * x * (delta * x / 6.0 + 0.5 * (1.0 - delta)),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            MapKind::Identity => 1.0,
            MapKind::Gfou => x.exp(),
            MapKind::Fcir { sigma } => 0.5 * sigma * sigma * x,
            MapKind::Polynomial { delta } => x * (0.5 * delta * x + 1.0 - delta),
        }
    }

    /// Interval of `x` on which the map is a bijection.
    pub fn domain(&self) -> (f64, f64) {
        match self.kind {
            MapKind::Identity | MapKind::Gfou => (f64::NEG_INFINITY, f64::INFINITY),
            MapKind::Fcir { .. } | MapKind::Polynomial { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn image(&self) -> (f64, f64) {
        match self.kind {
            MapKind::Identity => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Stationary points of the formula extended to all of R.
    pub fn critical_points(&self) -> Vec<f64> {
        match self.kind {
            MapKind::Identity | MapKind::Gfou => Vec::new(),
            MapKind::Fcir { .. } => vec![0.0],
            MapKind::Polynomial { delta } if delta > 0.0 && delta < 1.0 => {
                vec![-2.0 * (1.0 - delta) / delta, 0.0]
            }
            MapKind::Polynomial { delta } if delta == 0.0 => vec![0.0],
            // x^3 / 6 is monotone; its flat point is harmless
            MapKind::Polynomial { .. } => Vec::new(),
        }
    }

    pub fn inverse(&self, z: f64) -> Result<f64> {
        let (lo, hi) = self.image();
        if !(z >= lo && z < hi) || z.is_nan() {
            return Err(domain(format!("{z} is outside the image of the map")));
        }
        match self.kind {
            MapKind::Identity => Ok(z),
            MapKind::Gfou if z == 0.0 => Err(domain("log of 0")),
            MapKind::Gfou => Ok(z.ln()),
            MapKind::Fcir { sigma } => Ok(2.0 * z.sqrt() / sigma),
            MapKind::Polynomial { delta } => Ok(poly_inverse(delta, z)),
        }
    }

    /// Probability that the state falls below the domain of the map.
    pub fn masked_mass(&self, law: &ConditionalNormal) -> f64 {
        let lo = self.domain().0;
        if lo == f64::NEG_INFINITY {
            return 0.0;
        }
        if law.variance == 0.0 {
            return if law.mean < lo { 1.0 } else { 0.0 };
        }
        norm_cdf((lo - law.mean) / law.std_dev())
    }

    /// True when `mean +- 4 sd` leaves the domain of the map.
    pub fn law_crosses_domain(&self, law: &ConditionalNormal) -> bool {
        law.mean - 4.0 * law.std_dev() < self.domain().0
    }
}

// Safeguarded Newton on [0, hi] for delta x^3/6 + (1 - delta) x^2/2 = z.
fn poly_inverse(delta: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let g = |x: f64| x * x * (delta * x / 6.0 + 0.5 * (1.0 - delta));
    let dg = |x: f64| x * (0.5 * delta * x + 1.0 - delta);
    let mut lo = 0.0;
    let mut hi = 1.0f64.max((6.0 * z).cbrt()).max((2.0 * z).sqrt());
    while g(hi) < z {
        hi *= 2.0;
    }
    let mut x = if delta > 0.5 { (6.0 * z / delta).cbrt() } else { (2.0 * z / (1.0 - delta)).sqrt() };
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = g(x) - z;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = dg(x);
        let mut next = x - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= INVERSE_TOL * next.abs() || hi - lo <= INVERSE_TOL * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Density of `Z = g(X)` at `z` when `X ~ law`: `f_X(g^{-1} z) / g'(g^{-1} z)`.
pub fn pdf_transform(map: &ProcessMap, law: &ConditionalNormal, z: f64) -> Result<f64> {
    let x = map.inverse(z)?;
    let d = map.derivative(x);
    if !(d > 0.0) {
        return Err(domain(format!("map derivative vanishes at the pre-image {x} of {z}")));
    }
    if law.variance == 0.0 {
        return Err(domain("degenerate law has no density"));
    }
    let sd = law.std_dev();
    Ok(norm_pdf((x - law.mean) / sd) / (sd * d))
}

/// Points `(z, f_Z(z))` at `points` state values spaced evenly over
/// `mean +- 4 sd`, clipped to the domain of the map.
pub fn pdf_curve(map: &ProcessMap, law: &ConditionalNormal, points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(invalid("points", "need at least 2 grid points"));
    }
    let sd = law.std_dev();
    if sd == 0.0 {
        return Err(domain("degenerate law has no density"));
    }
    let (dlo, _) = map.domain();
    let mut lo = law.mean - 4.0 * sd;
    let hi = law.mean + 4.0 * sd;
    if lo <= dlo {
        // one cell inside the boundary, where the density may be singular
        lo = dlo + (hi - dlo) / points as f64;
    }
    if hi <= lo {
        return Err(domain("law lies entirely outside the map's domain"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let x = lo + step * i as f64;
            let z = map.forward(x);
            pdf_transform(map, law, z).map(|f| (z, f))
        })
        .collect()
}

/// Trapezoidal integral of a sampled curve.
pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// Parameters of the fOU state `dX = -(lambda/2) X dt + dB^H` whose scaled
/// square is the zero-mean fCIR process with rate `lambda`.
pub fn fcir_state_params(lambda: f64, hurst: f64) -> Result<FouParams> {
    FouParams::new(0.5 * lambda, 0.0, 1.0, hurst)
}

/// `X_0 = 2 sqrt(Z_0) / sigma`.
pub fn fcir_initial_state(z0: f64, sigma: f64) -> Result<f64> {
    ProcessMap::fcir(sigma)?.inverse(z0)
}
