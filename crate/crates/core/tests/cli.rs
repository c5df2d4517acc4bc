//! End-to-end runs of the `purcell` binary.

use std::path::Path;
use std::process::{Command, Output};

use purcell::cli::spectrum_csv::write_csv_spectrum;
use purcell::cli::touchstone::{write_touchstone, DataFormat, FreqUnit, OptionLine};
use purcell::cmatrix::{linspace, s_response, singly_loaded, ComplexSpectrum};
use purcell::notchfit::{notch_eval, NotchParams};
use serde_json::Value;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_chip.toml");

fn purcell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purcell"))
        .args(args)
        .output()
        .expect("spawn purcell")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn chip_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = purcell(&["chip", "--config", FIXTURE, "--out", path(d)]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["report.json", "spectrum.csv"] {
        let (x, y) = (
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
        );
        assert!(!x.is_empty());
        assert!(x == y, "{f} differs between runs");
    }
    let report: Value =
        serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    let readouts = report["readouts"].as_array().unwrap();
    assert_eq!(readouts.len(), 6);
    for r in readouts {
        let q_e = r["q_e_cal"].as_f64().unwrap();
        assert!((500.0..4000.0).contains(&q_e), "{q_e}");
    }
    assert_eq!(report["spectrum_file"], "spectrum.csv");
}

#[test]
fn exit_codes() {
    assert_eq!(purcell(&[]).status.code(), Some(2));
    assert_eq!(purcell(&["line-params", "--bogus"]).status.code(), Some(2));
    assert_eq!(purcell(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.toml");
    let out = purcell(&[
        "chip",
        "--config",
        path(&missing),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));

    let text = std::fs::read_to_string(FIXTURE)
        .unwrap()
        .replace("[stack]", "[stack]\ncolour = \"blue\"");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text).unwrap();
    let out = purcell(&["chip", "--config", path(&bad), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let out = purcell(&["line-params", "--w", "10 kg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn line_params_with_patch() {
    let v = stdout_json(&purcell(&[
        "line-params",
        "--length",
        "3900um",
        "--patch-c",
        "51.63 fF",
    ]));
    assert!((v["z0"].as_f64().unwrap() - 50.805).abs() < 1e-3);
    assert!((v["f0"].as_f64().unwrap() / 7.70e9 - 1.0).abs() < 1e-4);
}

fn notch_spectrum(p: &NotchParams) -> (ComplexSpectrum, (f64, f64)) {
    let lw = p.f_r / p.q_l;
    let w = (p.f_r - 8.0 * lw, p.f_r + 8.0 * lw);
    let f = linspace(w.0, w.1, 1601);
    let s: Vec<_> = f.iter().map(|&x| notch_eval(p, x)).collect();
    (ComplexSpectrum::new(f, s.clone(), s).unwrap(), w)
}

fn fit(input: &Path, window: (f64, f64), extra: &[&str]) -> Value {
    let w = format!("{:.6}GHz,{:.6}GHz", window.0 / 1e9, window.1 / 1e9);
    let mut args = vec!["fit-notch", "--input", path(input), "--window", &w];
    args.extend_from_slice(extra);
    let v = stdout_json(&purcell(&args));
    v.as_array().unwrap()[0].clone()
}

#[test]
fn fit_notch_gain_correction_and_formats() {
    // Data recorded 15 dB low: the correction restores unit off-resonant level.
    let a = 10f64.powf(-15.0 / 20.0);
    let p = NotchParams {
        f_r: 7.43e9,
        q_l: 800.0,
        q_e: 910.0,
        phi: 0.1,
        a,
        alpha: 0.3,
        tau: 20e-9,
    };
    let (s, w) = notch_spectrum(&p);
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("notch.csv");
    let s2p = dir.path().join("notch.s2p");
    write_csv_spectrum(&s, &csv).unwrap();
    write_touchstone(
        &s,
        &s2p,
        &OptionLine {
            unit: FreqUnit::Hz,
            format: DataFormat::Ri,
            r_ref: 50.0,
        },
    )
    .unwrap();

    let raw = fit(&csv, w, &[]);
    assert!((raw["a"].as_f64().unwrap() / a - 1.0).abs() < 1e-6);
    let corrected = fit(&csv, w, &["--gain-correction", "15"]);
    assert!((corrected["a"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    for r in [&raw, &corrected] {
        assert!((r["f_r"].as_f64().unwrap() / p.f_r - 1.0).abs() < 1e-9);
        assert!((r["q_l"].as_f64().unwrap() / p.q_l - 1.0).abs() < 1e-6);
        assert!((r["q_e"].as_f64().unwrap() / p.q_e - 1.0).abs() < 1e-6);
    }

    let touch = fit(&s2p, w, &[]);
    for k in ["f_r", "q_l", "q_e", "phi", "tau"] {
        let (x, y) = (touch[k].as_f64().unwrap(), raw[k].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-9), "{k}: {x} vs {y}");
    }

    // Automatic window and the staged-only path on the same data.
    let v = stdout_json(&purcell(&[
        "fit-notch",
        "--input",
        path(&csv),
        "--staged-only",
    ]));
    let auto = &v.as_array().unwrap()[0];
    assert!((auto["q_l"].as_f64().unwrap() / p.q_l - 1.0).abs() < 1e-3);
}

#[test]
fn extract_qe_from_singly_loaded_spectrum() {
    let (f0, fbw, m_s) = (7.68375e9, 0.130145, 0.93);
    let s = s_response(
        &singly_loaded(m_s, f0, fbw).unwrap(),
        &linspace(6.0e9, 9.5e9, 20001),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tap.csv");
    write_csv_spectrum(&s, &csv).unwrap();
    let v = stdout_json(&purcell(&[
        "extract-qe",
        "--input",
        path(&csv),
        "--fbw",
        "0.130145",
    ]));
    let got = v["m_s"].as_f64().unwrap();
    assert!((got / m_s - 1.0).abs() < 0.01, "m_s = {got}");
    assert!(v["q_e"].as_f64().unwrap() > 0.0);
}

#[test]
fn matrix_response_is_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = purcell(&["matrix-response", "--config", FIXTURE, "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = purcell::cli::spectrum_csv::read_csv_spectrum(&out).unwrap();
    assert_eq!(s.len(), 100001);
}
