//! Physical constants and unit-suffixed quantity parsing.

use crate::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m), CODATA 2018.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Physical dimension of a config quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Frequency,
    Capacitance,
    Time,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[
                ("m", 1.0),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("µm", 1e-6),
                ("nm", 1e-9),
            ],
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::Capacitance => &[
                ("F", 1.0),
                ("nF", 1e-9),
                ("pF", 1e-12),
                ("fF", 1e-15),
                ("aF", 1e-18),
            ],
            Dimension::Time => &[("s", 1.0), ("us", 1e-6), ("ns", 1e-9), ("ps", 1e-12)],
        }
    }

    /// Unit used when writing canonical config text.
    pub fn canonical_unit(self) -> (&'static str, f64) {
        match self {
            Dimension::Length => ("um", 1e-6),
            Dimension::Frequency => ("GHz", 1e9),
            Dimension::Capacitance => ("fF", 1e-15),
            Dimension::Time => ("ns", 1e-9),
        }
    }
}

/// Parse `"<number> <unit>"` (space optional) into SI. The unit is mandatory.
pub fn parse_quantity(text: &str, dim: Dimension, path: &str) -> Result<f64> {
    let text = text.trim();
    let known = |d: Dimension| {
        d.units()
            .iter()
            .filter(|(u, _)| text.ends_with(u))
            .max_by_key(|(u, _)| u.len())
            .copied()
    };
    let (unit, scale) = match known(dim) {
        Some(u) => u,
        None => {
            let other = [
                Dimension::Length,
                Dimension::Frequency,
                Dimension::Capacitance,
                Dimension::Time,
            ]
            .into_iter()
            .find_map(|d| known(d).map(|(u, _)| (d, u)));
            return Err(Error::config(
                path,
                match other {
                    Some((d, u)) => format!("unit `{u}` is a {d:?} unit, expected {dim:?}"),
                    None => format!("`{text}` has no {dim:?} unit suffix"),
                },
            ));
        }
    };
    let num = text[..text.len() - unit.len()].trim();
    let value: f64 = num
        .parse()
        .map_err(|_| Error::config(path, format!("`{num}` is not a number")))?;
    if !value.is_finite() {
        return Err(Error::config(path, "value is not finite"));
    }
    Ok(apply_scale(value, scale))
}

/// Multiply by a power-of-ten scale, dividing by the exact reciprocal for
/// sub-unit scales so that `10 um` is exactly the double nearest `1e-5`.
fn apply_scale(value: f64, scale: f64) -> f64 {
    if scale < 1.0 {
        value / (1.0 / scale).round()
    } else {
        value * scale
    }
}

/// Format an SI value in the canonical unit for `dim`.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    let (unit, scale) = dim.canonical_unit();
    let v = if scale < 1.0 {
        value * (1.0 / scale).round()
    } else {
        value / scale
    };
    format!("{v} {unit}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixed_values() {
        assert_eq!(
            parse_quantity("10 um", Dimension::Length, "w").unwrap(),
            10e-6
        );
        assert_eq!(
            parse_quantity("7.68 GHz", Dimension::Frequency, "f").unwrap(),
            7.68e9
        );
        assert!(
            (parse_quantity("51.6 fF", Dimension::Capacitance, "c").unwrap() - 51.6e-15).abs()
                < 1e-27
        );
        assert_eq!(
            parse_quantity("7.68GHz", Dimension::Frequency, "f").unwrap(),
            7.68e9
        );
        assert_eq!(
            parse_quantity("1e-6m", Dimension::Length, "w").unwrap(),
            1e-6
        );
        assert_eq!(
            parse_quantity("0.733 ns", Dimension::Time, "t").unwrap(),
            0.733e-9
        );
    }

    #[test]
    fn rejects_mismatched_or_missing_units() {
        assert!(parse_quantity("10", Dimension::Length, "w").is_err());
        assert!(parse_quantity("10 GHz", Dimension::Length, "w").is_err());
        assert!(parse_quantity("ten um", Dimension::Length, "w").is_err());
        assert!(parse_quantity("um", Dimension::Length, "w").is_err());
    }
}
