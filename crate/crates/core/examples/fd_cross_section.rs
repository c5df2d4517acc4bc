//! Conformal-mapping line parameters against the finite-difference oracle
//! for the single line and a spacing sweep of the coupled pair.

use std::time::Instant;

use purcell::coupled_tgcpw::{even_odd_params, CoupledCrossSection};
use purcell::oracles::{coupled_fd, tgcpw_fd, GridResolution, SolverOptions};
use purcell::tgcpw::{line_params, CrossSection};

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
    let res = GridResolution::default();
    let opts = SolverOptions::default();

    let t = Instant::now();
    let cm = line_params(&cs)?;
    let fd = tgcpw_fd(&cs, &res, &opts)?;
    println!(
        "single line ({} nodes, {:.1} s)",
        fd.nodes,
        t.elapsed().as_secs_f64()
    );
    println!(
        "  z0      conformal {:8.3}  fd {:8.3} ohm  ({:+.2}%)",
        cm.z0,
        fd.z0,
        100.0 * (cm.z0 / fd.z0 - 1.0)
    );
    println!(
        "  c_l     conformal {:8.3}  fd {:8.3} pF/m ({:+.2}%)",
        cm.c_l * 1e12,
        fd.c_total * 1e12,
        100.0 * (cm.c_l / fd.c_total - 1.0)
    );

    println!("\n  d(um)   z0e(cm)   z0e(fd)    err%    z0o(cm)   z0o(fd)    err%");
    for d in [1.0, 3.0, 6.0, 10.0, 15.0] {
        let ccs = CoupledCrossSection::from_line(&cs, d * 1e-6);
        let cm = even_odd_params(&ccs)?;
        let fd = coupled_fd(&ccs, &res, &opts)?;
        println!(
            "  {d:5.1} {:9.3} {:9.3} {:+7.2} {:9.3} {:9.3} {:+7.2}",
            cm.z0_even,
            fd.z0_even,
            100.0 * (cm.z0_even / fd.z0_even - 1.0),
            cm.z0_odd,
            fd.z0_odd,
            100.0 * (cm.z0_odd / fd.z0_odd - 1.0)
        );
    }
    Ok(())
}
