//! European calls on the exponential fOU by the COS method, with the error
//! against the lognormal closed form as the number of terms grows.

use fbm_cond::conditional::unconditional_law;
use fbm_cond::{cos_price, gfou_closed_form, CosConfig, FouParams, OptionSpec, ProcessMap, QuadratureConfig, Side};

fn main() -> fbm_cond::Result<()> {
    let spec = OptionSpec::new(10.0, 0.1, 0.0, 3.0, Side::Call)?;
    let x0 = 10f64.ln();
    println!("{:>4} {:>12} {:>10} {:>10} {:>10} {:>10}", "H", "exact", "L=4", "L=16", "L=32", "L=64");
    for i in 1..10 {
        let h = i as f64 / 10.0;
        let p = FouParams::new(0.5, x0, 0.3, h)?;
        let law = unconditional_law(&p, 3.0, &QuadratureConfig::default(), x0)?;
        let exact = gfou_closed_form(&spec, &law)?;
        let mut errs = Vec::new();
        for n in [4, 16, 32, 64] {
            let cfg = CosConfig { n_terms: n, ..CosConfig::default() };
            errs.push((cos_price(&spec, &ProcessMap::gfou(), &law, &cfg)? - exact).abs());
        }
        println!(
            "{h:>4.1} {exact:>12.8} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e}",
            errs[0], errs[1], errs[2], errs[3]
        );
    }
    Ok(())
}
