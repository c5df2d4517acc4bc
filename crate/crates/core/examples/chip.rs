//! Full chip pipeline on the bundled fixture: synthesis from geometry, the
//! complete spectrum, and fitted readout parameters.

use purcell::cli::config::parse_chip_config;
use purcell::cli::report::chip_report;

fn main() -> purcell::Result<()> {
    let text = include_str!("../fixtures/reference_chip.toml");
    let report = chip_report(&parse_chip_config(text)?)?;
    let fl = &report.filter;
    println!(
        "filter f0 {:.4} GHz, -3 dB band {:.4}-{:.4} GHz, {:.1} dB at {:.1} GHz",
        fl.f0 / 1e9,
        fl.passband_3db.0 / 1e9,
        fl.passband_3db.1 / 1e9,
        fl.stopband_db_at_probe,
        fl.probe / 1e9
    );
    println!("  #  host   f_bare     f_r       Q_l      Q_e");
    for r in &report.readouts {
        println!(
            "  {}   {}   {:.4}   {:.4}  {:7.0}  {:7.0}",
            r.index,
            r.host,
            r.f_bare / 1e9,
            r.f_r_cal / 1e9,
            r.q_l_cal,
            r.q_e_cal
        );
    }
    Ok(())
}
