//! LC-ladder eigenfrequencies of a coupled pair and their convergence with
//! cell size.

use purcell::coupler_net::CoupledPairSpec;
use purcell::oracles::{ladder_coupling, ladder_eigenfrequencies, LadderModel};
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
    let a = ResonatorSpec::from_total(4340e-6, 0.0, 400e-6, 0.0, cs)?;
    let b = ResonatorSpec::from_total(4400e-6, 0.0, 400e-6, 0.0, cs)?;
    let spec = CoupledPairSpec::from_geometry(a, b, 10e-6)?;
    let (f01, f02) = spec.bare_frequencies()?;
    println!("bare {:.6} / {:.6} GHz", f01 / 1e9, f02 / 1e9);
    for h in [40e-6, 20e-6, 10e-6, 5e-6] {
        let model = LadderModel::from_pair(&spec, h)?;
        let f = ladder_eigenfrequencies(&model)?;
        let (_, _, m) = ladder_coupling(&spec, h)?;
        println!(
            "h = {:4.0} um: modes {:.6} / {:.6} GHz, M = {m:.6}",
            h * 1e6,
            f[0] / 1e9,
            f[1] / 1e9
        );
    }
    Ok(())
}
