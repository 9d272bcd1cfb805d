//! Gamma, erfc and the Gauss hypergeometric series at a few reference points.

use fbm_cond::specfun::{erfc, gamma, hyp2f1, ln_gamma, norm_cdf};

fn main() -> fbm_cond::Result<()> {
    for x in [0.5, 1.5, 4.0, -0.5, 12.3] {
        println!("Gamma({x:>5}) = {:.16e}", gamma(x)?);
    }
    println!("lnGamma(150) = {:.16e}", ln_gamma(150.0)?);
    for x in [-2.0, 0.0, 1.0, 5.0, 20.0] {
        println!("erfc({x:>5}) = {:.16e}", erfc(x));
    }
    println!("Phi(1.96) = {:.16}", norm_cdf(1.96));
    // 2F1(1,1;2;1/2) = 2 ln 2
    let r = hyp2f1(1.0, 1.0, 2.0, 0.5)?;
    println!("2F1(1,1;2;0.5) = {:.16} ({} terms), 2 ln 2 = {:.16}", r.value, r.terms_used, 2.0 * 2f64.ln());
    Ok(())
}
