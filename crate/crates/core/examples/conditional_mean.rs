//! Conditional mean of an fOU process given one simulated history, compared
//! with Monte Carlo continuations of that same history.

use fbm_cond::conditional::conditional_mean_given_state;
use fbm_cond::mc::{ConditionalSampler, ConditionalStats, ProcessKind};
use fbm_cond::{conditional_variance, gen_fou_paths, FbmGrid, FouParams, McConfig, QuadratureConfig, TimeWindow};

fn main() -> fbm_cond::Result<()> {
    let (s, t, dt) = (3.0, 6.0, 0.01);
    let cfg = QuadratureConfig::default();
    let window = TimeWindow::new(s, t)?;
    for h in [0.25, 0.5, 0.75] {
        let p = FouParams::new(0.5, 0.0, 0.3, h)?;
        let past = gen_fou_paths(&p, s, &McConfig { dt, n_paths: 1, seed: 2024, ..McConfig::default() }, 0.0)?;
        let n1 = past.n_steps();
        let x_s = past.paths()[0][n1];
        let grid = FbmGrid::new(past.times().to_vec(), past.reference_fbm().to_vec())?;
        let mean = conditional_mean_given_state(&p, &window, &grid, &cfg, x_s)?;
        let sd = conditional_variance(&p, &window, &cfg)?.sqrt();

        let sampler = ConditionalSampler::new(h, dt, n1, n1 + ((t - s) / dt).round() as usize)?;
        let kind = ProcessKind::Fou { params: p, x0: 0.0 };
        let x = sampler.terminal_samples(&kind, past.reference_fbm(), x_s, 50_000, 7)?;
        let mc = ConditionalStats::from_samples(&x)?;
        println!(
            "H={h:.2}  X_s={x_s:+.5}  mean {mean:+.5} (MC {:+.5} +- {:.5})  std {sd:.5} (MC {:.5})",
            mc.mean, mc.se_mean, mc.std_dev
        );
    }
    Ok(())
}
