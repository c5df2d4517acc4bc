//! Complete and incomplete elliptic integrals, and recovering a modulus from
//! a target `K(k)/K'(k)` ratio.

use purcell::specfun::{ellipf, ellipk, ellipk_comp, invert_k_ratio};

fn main() -> purcell::Result<()> {
    println!("     k          K(k)           K'(k)          K/K'");
    for k in [0.01, 0.3, 0.5, std::f64::consts::FRAC_1_SQRT_2, 0.9, 0.999999] {
        let (kk, kp) = (ellipk(k)?, ellipk_comp(k)?);
        println!("  {k:<9.6} {kk:14.10} {kp:14.10} {:14.10}", kk / kp);
    }

    let phi = std::f64::consts::FRAC_PI_3;
    println!("\nF(pi/3, 0.8) = {:.12}", ellipf(phi, 0.8)?);

    for r in [0.1, 1.0, 4.2] {
        let m = invert_k_ratio(r)?;
        println!(
            "K/K' = {r:<4} -> k = {:.15e}, k' = {:.15e}, check {:.3e}",
            m.k(),
            m.kp(),
            m.k_ratio()? / r - 1.0
        );
    }
    Ok(())
}
