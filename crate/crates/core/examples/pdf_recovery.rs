//! Densities of exponential, squared and polynomial transforms of an fOU
//! state at t = 3, with the trapezoid mass of each emitted curve.

use fbm_cond::derived::{fcir_initial_state, fcir_state_params, pdf_curve, trapezoid};
use fbm_cond::{conditional::unconditional_law, FouParams, ProcessMap, QuadratureConfig};

fn main() -> fbm_cond::Result<()> {
    let (h, sigma, lambda, z0, t) = (0.75, 0.3, 0.5, 10.0f64, 3.0);
    let cfg = QuadratureConfig::default();
    let poly = ProcessMap::polynomial(0.8)?;
    let cases = [
        ("gfou", ProcessMap::gfou(), FouParams::new(lambda, z0.ln(), sigma, h)?, z0.ln()),
        ("fcir", ProcessMap::fcir(sigma)?, fcir_state_params(lambda, h)?, fcir_initial_state(z0, sigma)?),
        ("poly", poly, FouParams::new(lambda, poly.inverse(z0)?, sigma, h)?, poly.inverse(z0)?),
    ];
    for (name, map, p, x0) in cases {
        let law = unconditional_law(&p, t, &cfg, x0)?;
        let curve = pdf_curve(&map, &law, 401)?;
        let (zmax, fmax) = curve.iter().copied().fold((0.0, 0.0), |a, c| if c.1 > a.1 { c } else { a });
        println!(
            "{name}: Z in [{:.3}, {:.3}], mode near {zmax:.3} (f = {fmax:.4}), mass {:.6}",
            curve[0].0,
            curve[curve.len() - 1].0,
            trapezoid(&curve)
        );
    }
    Ok(())
}
