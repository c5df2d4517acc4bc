//! Single top-grounded CPW line: impedance, effective permittivity and the
//! quarter-wave frequencies of the filter and readout lengths.

use purcell::tgcpw::{length_extension, line_params, quarter_wave_frequency, CrossSection};

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
    let p = line_params(&cs)?;
    println!(
        "z0 = {:.3} ohm, eps_eff = {:.4}, c_l = {:.3} pF/m, v_p = {:.4e} m/s",
        p.z0,
        p.eps_eff,
        p.c_l * 1e12,
        p.phase_velocity()
    );

    // A 51.63 fF end patch lengthens the line electrically.
    let dl = length_extension(51.63e-15, p.c_l)?;
    println!("patch extension = {:.2} um", dl * 1e6);
    for l in [3900e-6, 4150e-6, 4400e-6] {
        println!(
            "  l = {:4.0} um: f = {:.4} GHz, with patch {:.4} GHz",
            l * 1e6,
            quarter_wave_frequency(&p, l)? / 1e9,
            quarter_wave_frequency(&p, l + dl)? / 1e9
        );
    }

    // Kinetic inductance lowers the phase velocity; z0 stays the geometric value.
    let lk = line_params(&CrossSection {
        lk_ratio: 0.05,
        ..cs
    })?;
    println!(
        "with L_k/L_g = 0.05: z0 = {:.3} ohm, f(4400 um) = {:.4} GHz",
        lk.z0,
        quarter_wave_frequency(&lk, 4400e-6)? / 1e9
    );
    Ok(())
}
