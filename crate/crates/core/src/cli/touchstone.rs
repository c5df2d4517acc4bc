//! Two-port Touchstone v1 (`.s2p`) files.
//!
//! Reading keeps S11 and S21. Writing emits S12 = S21 and S22 = S11, the
//! response of a reciprocal symmetric network.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::cmatrix::ComplexSpectrum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Real and imaginary parts.
    Ri,
    /// Linear magnitude and angle in degrees.
    Ma,
    /// Magnitude in dB and angle in degrees.
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    fn scale(self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FreqUnit::Hz => "Hz",
            FreqUnit::KHz => "kHz",
            FreqUnit::MHz => "MHz",
            FreqUnit::GHz => "GHz",
        }
    }
}

impl DataFormat {
    fn name(self) -> &'static str {
        match self {
            DataFormat::Ri => "RI",
            DataFormat::Ma => "MA",
            DataFormat::Db => "DB",
        }
    }

    fn decode(self, a: f64, b: f64) -> Complex64 {
        match self {
            DataFormat::Ri => Complex64::new(a, b),
            DataFormat::Ma => Complex64::from_polar(a, b * PI / 180.0),
            DataFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b * PI / 180.0),
        }
    }

    fn encode(self, z: Complex64) -> (f64, f64) {
        match self {
            DataFormat::Ri => (z.re, z.im),
            DataFormat::Ma => (z.norm(), z.arg() * 180.0 / PI),
            DataFormat::Db => (20.0 * z.norm().log10(), z.arg() * 180.0 / PI),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionLine {
    pub unit: FreqUnit,
    pub format: DataFormat,
    pub r_ref: f64,
}

impl Default for OptionLine {
    /// Touchstone defaults: `# GHz S MA R 50`.
    fn default() -> Self {
        Self {
            unit: FreqUnit::GHz,
            format: DataFormat::Ma,
            r_ref: 50.0,
        }
    }
}

fn parse_option_line(text: &str, line: usize) -> Result<OptionLine> {
    let err = |msg: String| Error::Parse { line, msg };
    let mut opt = OptionLine::default();
    let mut toks = text.split_whitespace();
    while let Some(t) = toks.next() {
        match t.to_ascii_uppercase().as_str() {
            "HZ" => opt.unit = FreqUnit::Hz,
            "KHZ" => opt.unit = FreqUnit::KHz,
            "MHZ" => opt.unit = FreqUnit::MHz,
            "GHZ" => opt.unit = FreqUnit::GHz,
            "RI" => opt.format = DataFormat::Ri,
            "MA" => opt.format = DataFormat::Ma,
            "DB" => opt.format = DataFormat::Db,
            "S" => {}
            "Y" | "Z" | "H" | "G" => {
                return Err(err(format!("only S parameters are supported, got `{t}`")))
            }
            "R" => {
                let v = toks.next().ok_or_else(|| err("`R` needs a value".into()))?;
                opt.r_ref = v
                    .parse()
                    .map_err(|_| err(format!("bad reference resistance `{v}`")))?;
            }
            _ => return Err(err(format!("unknown option `{t}`"))),
        }
    }
    Ok(opt)
}

/// Parse `.s2p` text. Comments start with `!`; a record may span lines.
pub fn parse_touchstone(text: &str) -> Result<(ComplexSpectrum, OptionLine)> {
    let mut opt: Option<OptionLine> = None;
    let mut pending: Vec<f64> = Vec::with_capacity(9);
    let mut record_line = 0;
    let (mut f, mut s11, mut s21) = (Vec::new(), Vec::new(), Vec::new());
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('!').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('#') {
            if opt.is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "second option line".into(),
                });
            }
            if !f.is_empty() || !pending.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "option line after data".into(),
                });
            }
            opt = Some(parse_option_line(rest, line)?);
            continue;
        }
        let o = opt.unwrap_or_default();
        if pending.is_empty() {
            record_line = line;
        }
        for tok in body.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{tok}` is not a number"),
            })?;
            pending.push(v);
            if pending.len() == 9 {
                let p = &pending;
                let freq = p[0] * o.unit.scale();
                if let Some(&last) = f.last() {
                    if freq <= last {
                        return Err(Error::Parse {
                            line,
                            msg: "frequencies must increase".into(),
                        });
                    }
                }
                f.push(freq);
                s11.push(o.format.decode(p[1], p[2]));
                s21.push(o.format.decode(p[3], p[4]));
                pending.clear();
                record_line = line;
            }
        }
    }
    if !pending.is_empty() {
        return Err(Error::Parse {
            line: record_line,
            msg: format!("incomplete record: {} of 9 values", pending.len()),
        });
    }
    let spectrum = ComplexSpectrum::new(f, s11, s21).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    Ok((spectrum, opt.unwrap_or_default()))
}

pub fn read_touchstone(path: &Path) -> Result<ComplexSpectrum> {
    Ok(parse_touchstone(&std::fs::read_to_string(path)?)?.0)
}

pub fn format_touchstone(s: &ComplexSpectrum, opt: &OptionLine) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# {} S {} R {}",
        opt.unit.name(),
        opt.format.name(),
        opt.r_ref
    )
    .expect("String write");
    let scale = opt.unit.scale();
    for i in 0..s.len() {
        let (a, b) = opt.format.encode(s.s11[i]);
        let (c, d) = opt.format.encode(s.s21[i]);
        writeln!(
            out,
            "{:.16e} {a:.16e} {b:.16e} {c:.16e} {d:.16e} {c:.16e} {d:.16e} {a:.16e} {b:.16e}",
            s.freqs[i] / scale
        )
        .expect("String write");
    }
    out
}

pub fn write_touchstone(s: &ComplexSpectrum, path: &Path, opt: &OptionLine) -> Result<()> {
    std::fs::write(path, format_touchstone(s, opt))?;
    Ok(())
}
