//! Fit a noisy synthetic notch with cable delay and an impedance mismatch,
//! comparing the staged estimate with the full refinement.

use purcell::cmatrix::{linspace, ComplexSpectrum};
use purcell::notchfit::{fit_notch, notch_eval, FitOptions, NotchParams};
use purcell::Complex64;
use rand::{rngs::StdRng, SeedableRng};
use rand_distr::{Distribution, Normal};

fn main() -> purcell::Result<()> {
    let truth = NotchParams {
        f_r: 7.43e9,
        q_l: 800.0,
        q_e: 910.0,
        phi: 0.1,
        a: 0.9,
        alpha: 0.3,
        tau: 40e-9,
    };
    let lw = truth.f_r / truth.q_l;
    let window = (truth.f_r - 6.0 * lw, truth.f_r + 6.0 * lw);
    let f = linspace(window.0, window.1, 2001);

    // 40 dB SNR on the off-resonant level.
    let mut rng = StdRng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.01 * truth.a / 2f64.sqrt()).unwrap();
    let s21: Vec<Complex64> = f
        .iter()
        .map(|&x| {
            notch_eval(&truth, x) + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng))
        })
        .collect();
    let spectrum = ComplexSpectrum::new(f, s21.clone(), s21)?;

    for refine in [false, true] {
        let r = fit_notch(
            &spectrum,
            window,
            &FitOptions {
                refine,
                ..FitOptions::default()
            },
        )?;
        let p = r.params;
        println!(
            "{:8}: f_r {:+.2} ppm, Q_l {:.1} ({:+.2}%), Q_e {:.1} ({:+.2}%), tau {:.3} ns, residual {:.2e}",
            if refine { "refined" } else { "staged" },
            (p.f_r / truth.f_r - 1.0) * 1e6,
            p.q_l,
            100.0 * (p.q_l / truth.q_l - 1.0),
            p.q_e,
            100.0 * (p.q_e / truth.q_e - 1.0),
            p.tau * 1e9,
            r.residual
        );
    }
    Ok(())
}
