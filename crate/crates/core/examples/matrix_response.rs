//! Four-pole filter with one readout on the second resonator: transmission
//! across the band and the readout dip.

use purcell::cmatrix::{build_coupling_matrix, linspace, s_response, FilterSpec, ReadoutGroup};

fn db(z: purcell::Complex64) -> f64 {
    20.0 * z.norm().log10()
}

fn main() -> purcell::Result<()> {
    let spec = FilterSpec {
        f_l: 7.2e9,
        f_h: 8.2e9,
        self_couplings: [-0.0075, 0.0325, 0.0325, -0.0075],
        path: [0.6608, 0.4861, 0.6608],
        m_s: 0.93,
        m_l: 0.93,
        groups: vec![ReadoutGroup {
            host: 2,
            members: vec![(-0.2, 0.02)],
        }],
    };
    let cm = build_coupling_matrix(&spec)?;
    println!(
        "f0 = {:.4} GHz, FBW = {:.5}, matrix {}x{}",
        spec.f0() / 1e9,
        spec.fbw(),
        cm.dim(),
        cm.dim()
    );

    let s = s_response(&cm, &linspace(6.5e9, 9.0e9, 26))?;
    for (f, v) in s.freqs.iter().zip(&s.s21) {
        println!("  {:.2} GHz  {:8.2} dB", f / 1e9, db(*v));
    }

    let fine = s_response(&cm, &linspace(7.5e9, 7.8e9, 30001))?;
    let (i, _) = fine
        .s21
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    println!(
        "readout dip at {:.5} GHz, {:.1} dB",
        fine.freqs[i] / 1e9,
        db(fine.s21[i])
    );
    Ok(())
}
