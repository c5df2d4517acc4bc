//! Coupling between two quarter-wave resonators through a shared section,
//! from the network determinant and from the LC-ladder oracle.

use purcell::coupler_net::{dressed_pair_frequencies, CoupledPairSpec};
use purcell::oracles::ladder_coupling;
use purcell::tgcpw::{CrossSection, ResonatorSpec};

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
    println!("  l_c(um)    f1(GHz)    f2(GHz)     M_net     M_ladder");
    for l_c in [100e-6, 250e-6, 400e-6, 550e-6, 700e-6] {
        let a = ResonatorSpec::from_total(4340e-6, 500e-6, l_c, 0.0, cs)?;
        let b = ResonatorSpec::from_total(4400e-6, 500e-6, l_c, 0.0, cs)?;
        let spec = CoupledPairSpec::from_geometry(a, b, 10e-6)?;
        let net = dressed_pair_frequencies(&spec, None)?;
        let (_, _, m_ladder) = ladder_coupling(&spec, 10e-6)?;
        println!(
            "  {:6.0} {:10.5} {:10.5} {:10.6} {:10.6}",
            l_c * 1e6,
            net.f1 / 1e9,
            net.f2 / 1e9,
            net.m_phys,
            m_ladder
        );
    }
    Ok(())
}
