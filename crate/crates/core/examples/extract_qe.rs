//! External Q of a tapped resonator from the S11 group delay of a singly
//! loaded circuit, and the normalised coupling it implies.

use purcell::cmatrix::{
    external_coupling, group_delay, linspace, qe_from_group_delay, s_response, singly_loaded, Param,
};

fn main() -> purcell::Result<()> {
    let (f0, fbw, m_s) = (7.68375e9, 0.130145, 0.93);
    let s = s_response(
        &singly_loaded(m_s, f0, fbw)?,
        &linspace(6.0e9, 9.5e9, 20001),
    )?;
    let tau = group_delay(&s, Param::S11)?;
    let (i, &peak) = tau
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let q_e = qe_from_group_delay(s.freqs[i], peak)?;
    println!(
        "peak delay {:.4} ns at {:.4} GHz",
        peak * 1e9,
        s.freqs[i] / 1e9
    );
    println!(
        "Q_e = {q_e:.4}, m_s = {:.4} (set {m_s})",
        external_coupling(q_e, fbw)?
    );
    Ok(())
}
