//! Conditional standard deviations of fBm and fOU over a Hurst grid, for
//! conditioning at s = 0 and s = 3 with a forecast step of 5.

use fbm_cond::conditional::conditional_variance_report;
use fbm_cond::{FouParams, QuadratureConfig, TimeWindow};

fn main() -> fbm_cond::Result<()> {
    let cfg = QuadratureConfig::default();
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "H", "fBm s=0", "fBm s=3", "fOU s=0", "fOU s=3");
    for i in 1..10 {
        let h = i as f64 / 10.0;
        let models = [FouParams::fbm(h)?, FouParams::new(0.5, 0.0, 0.3, h)?];
        let mut cells = Vec::new();
        for p in &models {
            for s in [0.0, 3.0] {
                let r = conditional_variance_report(p, &TimeWindow::new(s, s + 5.0)?, &cfg)?;
                cells.push(r.variance.sqrt());
            }
        }
        println!(
            "{h:>4.1} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            cells[0], cells[1], cells[2], cells[3]
        );
    }
    Ok(())
}
