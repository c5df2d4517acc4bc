//! Plot-ready CSV spectra.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::cmatrix::ComplexSpectrum;
use crate::{Error, Result};

pub const HEADER: &str = "freq_hz,s11_re,s11_im,s21_re,s21_im,s21_db";

/// CSV text with 17 significant digits per value.
pub fn format_csv_spectrum(s: &ComplexSpectrum) -> String {
    let mut out = String::with_capacity(s.len() * 150);
    out.push_str(HEADER);
    out.push('\n');
    for i in 0..s.len() {
        let (a, b) = (s.s11[i], s.s21[i]);
        let db = 20.0 * b.norm().log10();
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.freqs[i], a.re, a.im, b.re, b.im, db
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_csv_spectrum(s: &ComplexSpectrum, path: &Path) -> Result<()> {
    std::fs::write(path, format_csv_spectrum(s))?;
    Ok(())
}

/// Parse CSV written by [`format_csv_spectrum`]; `s21_db` is ignored.
pub fn parse_csv_spectrum(text: &str) -> Result<ComplexSpectrum> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("missing column `{name}`"),
            })
    };
    let idx = [
        col("freq_hz")?,
        col("s11_re")?,
        col("s11_im")?,
        col("s21_re")?,
        col("s21_im")?,
    ];
    let (mut f, mut s11, mut s21) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut v = [0.0; 5];
        for (k, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            v[k] = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{field}` is not a number"),
            })?;
        }
        f.push(v[0]);
        s11.push(Complex64::new(v[1], v[2]));
        s21.push(Complex64::new(v[3], v[4]));
    }
    ComplexSpectrum::new(f, s11, s21).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn read_csv_spectrum(path: &Path) -> Result<ComplexSpectrum> {
    parse_csv_spectrum(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let f = vec![7.0e9, 7.1e9, 7.2e9];
        let s11 = vec![
            Complex64::new(0.1, -0.2),
            Complex64::new(1.0 / 3.0, 0.0),
            Complex64::new(-0.5, 0.25),
        ];
        let s21 = vec![
            Complex64::new(0.9, 0.1),
            Complex64::new(std::f64::consts::PI / 4.0, -1e-9),
            Complex64::new(0.0, 1.0),
        ];
        let s = ComplexSpectrum::new(f, s11, s21).unwrap();
        let text = format_csv_spectrum(&s);
        assert!(text.starts_with(HEADER));
        assert_eq!(parse_csv_spectrum(&text).unwrap(), s);
    }

    #[test]
    fn bad_cell_reports_line() {
        let text = format!("{HEADER}\n1,0,0,1,0,0\n2,0,x,1,0,0\n");
        match parse_csv_spectrum(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
