//! Seeded Monte Carlo check of the unconditional fBm and fOU standard
//! deviations at t = 5.

use fbm_cond::mc::{terminal_values, ConditionalStats, ProcessKind};
use fbm_cond::{conditional_variance, FouParams, McConfig, QuadratureConfig, TimeWindow};

fn main() -> fbm_cond::Result<()> {
    let window = TimeWindow::new(0.0, 5.0)?;
    let cfg = QuadratureConfig::default();
    for h in [0.2, 0.5, 0.8] {
        for (name, p, kind) in [
            ("fBm", FouParams::fbm(h)?, ProcessKind::Fbm { hurst: h }),
            ("fOU", FouParams::new(0.5, 0.0, 0.3, h)?, ProcessKind::Fou { params: FouParams::new(0.5, 0.0, 0.3, h)?, x0: 0.0 }),
        ] {
            let analytic = conditional_variance(&p, &window, &cfg)?.sqrt();
            let mc = McConfig { dt: 0.01, n_paths: 10_000, seed: 1, ..McConfig::default() };
            let st = ConditionalStats::from_samples(&terminal_values(kind, 5.0, &mc)?)?;
            println!(
                "{name} H={h}: analytic {analytic:.5}, MC {:.5}, rel err {:.3}%",
                st.std_dev,
                100.0 * (st.std_dev - analytic).abs() / st.std_dev
            );
        }
    }
    Ok(())
}
