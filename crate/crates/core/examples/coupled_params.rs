//! Even and odd modes of two edge-coupled lines over a spacing sweep.

use purcell::coupled_tgcpw::{even_odd_params, CoupledCrossSection};
use purcell::tgcpw::CrossSection;

fn main() -> purcell::Result<()> {
    let cs = CrossSection {
        w: 10e-6,
        g: 9e-6,
        hs: 10e-6,
        hb: 500e-6,
        eps_r: 11.45,
        t: 0.0,
        lk_ratio: 0.0,
    };
    println!("  d(um)   z0e      z0o     eps_e    eps_o");
    for d in [1.0, 3.0, 6.0, 10.0, 15.0, 30.0, 100.0] {
        let p = even_odd_params(&CoupledCrossSection::from_line(&cs, d * 1e-6))?;
        println!(
            "  {d:5.0} {:8.3} {:8.3} {:8.4} {:8.4}",
            p.z0_even, p.z0_odd, p.eps_even, p.eps_odd
        );
    }
    Ok(())
}
