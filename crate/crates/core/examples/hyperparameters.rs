//! Sensitivity of the conditional variance to the quadrature step, the
//! integration range and the series cap.

use fbm_cond::{conditional_variance, FouParams, QuadratureConfig, TimeWindow};

fn main() -> fbm_cond::Result<()> {
    let window = TimeWindow::new(0.0, 5.0)?;
    let base = QuadratureConfig::default();
    for h in [0.3, 0.7] {
        let p = FouParams::new(0.5, 0.0, 0.3, h)?;
        let reference = conditional_variance(&p, &window, &QuadratureConfig { step_m: 0.05, range_a: 9.0, ..base })?;
        println!("H={h}  reference {reference:.15}");
        for (m, a) in [(1.0, 3.0), (0.5, 5.0), (0.25, 7.0), (0.1, 8.0)] {
            let v = conditional_variance(&p, &window, &QuadratureConfig { step_m: m, range_a: a, ..base })?;
            println!("  m={m:<5} a={a:<3} rel diff {:.2e}", (v - reference).abs() / reference);
        }
        for n in [5, 10, 15, 20] {
            match conditional_variance(&p, &window, &QuadratureConfig { max_terms_n: n, ..base }) {
                Ok(v) => println!("  N={n:<3} rel diff {:.2e}", (v - reference).abs() / reference),
                Err(e) => println!("  N={n:<3} {e}"),
            }
        }
    }
    Ok(())
}
