//! Chip configuration: TOML text with unit-suffixed quantities.
//!
//! ```toml
//! [stack]
//! hs = "10 um"
//! hb = "500 um"
//! eps_r = 11.45
//! lk_ratio = 0.0
//!
//! [filter]
//! f_l = "7.2 GHz"
//! f_h = "8.2 GHz"
//! w = "10 um"
//! g = "9 um"
//! spiral_f0 = "7.68 GHz"
//! line_length = "3900 um"
//! line_patch_c = "51.63 fF"   # or line_f0 = "7.70 GHz"
//! lc23 = "575 um"              # with d23; or m23 = 0.4861
//! d23 = "6 um"
//! m12 = 0.6608
//! m34 = 0.6608
//! tap_delay = "0.733 ns"       # or m_s = 0.93 and m_l = 0.93
//!
//! [[readout]]
//! l_t = "4400 um"
//! l_s = "500 um"
//! l_c = "300 um"
//! d = "7 um"
//! l_c2 = "2367 um"
//! host = 2
//! ```
//!
//! Lengths take `m`, `mm`, `um`, `nm`; frequencies `Hz` to `GHz`;
//! capacitances `F` to `aF`; times `s` to `ps`. Unknown keys are rejected.
//! The optional `[analysis]` table sets the sweep (defaults 1 to 10 GHz,
//! 100001 points, probe at 4.5 GHz) and `l_c2_convention` (`center`,
//! `start` or `end` of the coupled section, default `center`).

use serde::{Deserialize, Serialize};

use crate::units::{format_quantity, parse_quantity, Dimension};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    stack: RawStack,
    filter: RawFilter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    analysis: Option<RawAnalysis>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    readout: Vec<RawReadout>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStack {
    hs: String,
    hb: String,
    eps_r: f64,
    #[serde(default)]
    lk_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    f_l: String,
    f_h: String,
    w: String,
    g: String,
    spiral_f0: String,
    line_length: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line_patch_c: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line_f0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lc23: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d23: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m23: Option<f64>,
    m12: f64,
    m34: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tap_delay: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m_l: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_stop: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probe: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l_c2_convention: Option<LocationConvention>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReadout {
    l_t: String,
    l_s: String,
    l_c: String,
    d: String,
    l_c2: String,
    host: usize,
}

/// Which point of the coupled section `l_c2` measures from the short end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LocationConvention {
    Start,
    #[default]
    Center,
    End,
}

impl LocationConvention {
    /// Short-side length of the host line before the coupled section.
    pub fn short_side(self, l_c2: f64, l_c: f64) -> f64 {
        match self {
            LocationConvention::Start => l_c2,
            LocationConvention::Center => l_c2 - l_c / 2.0,
            LocationConvention::End => l_c2 - l_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stack {
    pub hs: f64,
    pub hb: f64,
    pub eps_r: f64,
    pub lk_ratio: f64,
}

/// Open-end loading of the filter line resonators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LineLoading {
    PatchCapacitance(f64),
    BareFrequency(f64),
}

/// Coupling between filter resonators 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InnerCoupling {
    Direct(f64),
    Section { l_c: f64, d: f64 },
}

/// Source and load couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TapCoupling {
    GroupDelay(f64),
    Direct { m_s: f64, m_l: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterConfig {
    pub f_l: f64,
    pub f_h: f64,
    pub w: f64,
    pub g: f64,
    pub spiral_f0: f64,
    pub line_length: f64,
    pub line_loading: LineLoading,
    pub m12: f64,
    pub m34: f64,
    pub m23: InnerCoupling,
    pub tap: TapCoupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutConfig {
    pub l_t: f64,
    pub l_s: f64,
    pub l_c: f64,
    pub d: f64,
    pub l_c2: f64,
    pub host: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub f_start: f64,
    pub f_stop: f64,
    pub points: usize,
    pub probe: f64,
    pub l_c2_convention: LocationConvention,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            f_start: 1e9,
            f_stop: 10e9,
            points: 100_001,
            probe: 4.5e9,
            l_c2_convention: LocationConvention::Center,
        }
    }
}

/// Validated configuration in SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipConfig {
    pub stack: Stack,
    pub filter: FilterConfig,
    pub analysis: AnalysisConfig,
    pub readouts: Vec<ReadoutConfig>,
}

fn positive(v: f64, path: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(v: f64, path: &str) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(
            path,
            format!("must be non-negative, got {v}"),
        ))
    }
}

fn q(text: &str, dim: Dimension, path: &str) -> Result<f64> {
    parse_quantity(text, dim, path)
}

fn qpos(text: &str, dim: Dimension, path: &str) -> Result<f64> {
    positive(q(text, dim, path)?, path)
}

fn toml_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    // Missing and unknown keys name themselves in the message; the span
    // gives the location for everything else.
    let path = e
        .span()
        .map(|s| format!("byte {}", s.start))
        .unwrap_or_else(|| "config".into());
    Error::config(path, msg)
}

pub fn parse_chip_config(text: &str) -> Result<ChipConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(toml_error)?;
    use Dimension::*;
    let s = &raw.stack;
    let stack = Stack {
        hs: qpos(&s.hs, Length, "stack.hs")?,
        hb: qpos(&s.hb, Length, "stack.hb")?,
        eps_r: if s.eps_r >= 1.0 {
            s.eps_r
        } else {
            return Err(Error::config(
                "stack.eps_r",
                format!("must be >= 1, got {}", s.eps_r),
            ));
        },
        lk_ratio: if s.lk_ratio >= 0.0 {
            s.lk_ratio
        } else {
            return Err(Error::config("stack.lk_ratio", "must be non-negative"));
        },
    };

    let f = &raw.filter;
    let line_loading = match (&f.line_patch_c, &f.line_f0) {
        (Some(c), None) => {
            let c = q(c, Capacitance, "filter.line_patch_c")?;
            if c < 0.0 {
                return Err(Error::config("filter.line_patch_c", "must be non-negative"));
            }
            LineLoading::PatchCapacitance(c)
        }
        (None, Some(fr)) => LineLoading::BareFrequency(qpos(fr, Frequency, "filter.line_f0")?),
        _ => {
            return Err(Error::config(
                "filter",
                "give exactly one of line_patch_c and line_f0",
            ))
        }
    };
    let m23 = match (f.m23, &f.lc23, &f.d23) {
        (Some(m), None, None) => InnerCoupling::Direct(m),
        (None, Some(l), Some(d)) => InnerCoupling::Section {
            l_c: qpos(l, Length, "filter.lc23")?,
            d: qpos(d, Length, "filter.d23")?,
        },
        _ => {
            return Err(Error::config(
                "filter",
                "give either m23 or both lc23 and d23",
            ))
        }
    };
    let tap = match (&f.tap_delay, f.m_s, f.m_l) {
        (Some(t), None, None) => TapCoupling::GroupDelay(qpos(t, Time, "filter.tap_delay")?),
        (None, Some(a), Some(b)) => TapCoupling::Direct { m_s: a, m_l: b },
        _ => {
            return Err(Error::config(
                "filter",
                "give either tap_delay or both m_s and m_l",
            ))
        }
    };
    let filter = FilterConfig {
        f_l: qpos(&f.f_l, Frequency, "filter.f_l")?,
        f_h: qpos(&f.f_h, Frequency, "filter.f_h")?,
        w: qpos(&f.w, Length, "filter.w")?,
        g: qpos(&f.g, Length, "filter.g")?,
        spiral_f0: qpos(&f.spiral_f0, Frequency, "filter.spiral_f0")?,
        line_length: qpos(&f.line_length, Length, "filter.line_length")?,
        line_loading,
        m12: f.m12,
        m34: f.m34,
        m23,
        tap,
    };
    if filter.f_h <= filter.f_l {
        return Err(Error::config("filter.f_h", "must exceed f_l"));
    }

    let mut analysis = AnalysisConfig::default();
    if let Some(a) = &raw.analysis {
        if let Some(v) = &a.f_start {
            analysis.f_start = qpos(v, Frequency, "analysis.f_start")?;
        }
        if let Some(v) = &a.f_stop {
            analysis.f_stop = qpos(v, Frequency, "analysis.f_stop")?;
        }
        if let Some(v) = &a.probe {
            analysis.probe = qpos(v, Frequency, "analysis.probe")?;
        }
        if let Some(n) = a.points {
            analysis.points = n;
        }
        if let Some(c) = a.l_c2_convention {
            analysis.l_c2_convention = c;
        }
    }
    if analysis.points < 2 || analysis.f_stop <= analysis.f_start {
        return Err(Error::config(
            "analysis",
            "need at least two points and f_stop > f_start",
        ));
    }

    let readouts = raw
        .readout
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = |k: &str| format!("readout[{i}].{k}");
            let out = ReadoutConfig {
                l_t: qpos(&r.l_t, Length, &p("l_t"))?,
                l_s: non_negative(q(&r.l_s, Length, &p("l_s"))?, &p("l_s"))?,
                l_c: qpos(&r.l_c, Length, &p("l_c"))?,
                d: qpos(&r.d, Length, &p("d"))?,
                l_c2: q(&r.l_c2, Length, &p("l_c2"))?,
                host: r.host,
            };
            if !(out.host == 2 || out.host == 3) {
                return Err(Error::config(
                    p("host"),
                    format!("must be 2 or 3, got {}", out.host),
                ));
            }
            if out.l_s + out.l_c > out.l_t {
                return Err(Error::config(p("l_c"), "l_s + l_c exceeds l_t"));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChipConfig {
        stack,
        filter,
        analysis,
        readouts,
    })
}

impl ChipConfig {
    /// Canonical TOML text; parsing it gives back the same configuration.
    pub fn to_canonical_toml(&self) -> String {
        use Dimension::*;
        let fq = format_quantity;
        let f = &self.filter;
        let (line_patch_c, line_f0) = match f.line_loading {
            LineLoading::PatchCapacitance(c) => (Some(fq(c, Capacitance)), None),
            LineLoading::BareFrequency(v) => (None, Some(fq(v, Frequency))),
        };
        let (m23, lc23, d23) = match f.m23 {
            InnerCoupling::Direct(m) => (Some(m), None, None),
            InnerCoupling::Section { l_c, d } => (None, Some(fq(l_c, Length)), Some(fq(d, Length))),
        };
        let (tap_delay, m_s, m_l) = match f.tap {
            TapCoupling::GroupDelay(t) => (Some(fq(t, Time)), None, None),
            TapCoupling::Direct { m_s, m_l } => (None, Some(m_s), Some(m_l)),
        };
        let a = &self.analysis;
        let raw = RawConfig {
            stack: RawStack {
                hs: fq(self.stack.hs, Length),
                hb: fq(self.stack.hb, Length),
                eps_r: self.stack.eps_r,
                lk_ratio: self.stack.lk_ratio,
            },
            filter: RawFilter {
                f_l: fq(f.f_l, Frequency),
                f_h: fq(f.f_h, Frequency),
                w: fq(f.w, Length),
                g: fq(f.g, Length),
                spiral_f0: fq(f.spiral_f0, Frequency),
                line_length: fq(f.line_length, Length),
                line_patch_c,
                line_f0,
                lc23,
                d23,
                m23,
                m12: f.m12,
                m34: f.m34,
                tap_delay,
                m_s,
                m_l,
            },
            analysis: Some(RawAnalysis {
                f_start: Some(fq(a.f_start, Frequency)),
                f_stop: Some(fq(a.f_stop, Frequency)),
                points: Some(a.points),
                probe: Some(fq(a.probe, Frequency)),
                l_c2_convention: Some(a.l_c2_convention),
            }),
            readout: self
                .readouts
                .iter()
                .map(|r| RawReadout {
                    l_t: fq(r.l_t, Length),
                    l_s: fq(r.l_s, Length),
                    l_c: fq(r.l_c, Length),
                    d: fq(r.d, Length),
                    l_c2: fq(r.l_c2, Length),
                    host: r.host,
                })
                .collect(),
        };
        toml::to_string(&raw).expect("config tables serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = include_str!("../../fixtures/reference_chip.toml");

    #[test]
    fn fixture_parses_to_reference_values() {
        let c = parse_chip_config(FIXTURE).unwrap();
        assert_eq!(c.stack.hs, 10e-6);
        assert_eq!(c.stack.hb, 500e-6);
        assert_eq!(c.filter.w, 10e-6);
        assert_eq!(c.filter.g, 9e-6);
        assert_eq!(c.filter.line_length, 3900e-6);
        assert_eq!(
            c.filter.m23,
            InnerCoupling::Section {
                l_c: 575e-6,
                d: 6e-6
            }
        );
        assert_eq!(c.readouts.len(), 6);
        let lt: Vec<f64> = c.readouts.iter().map(|r| (r.l_t * 1e6).round()).collect();
        assert_eq!(lt, [4400.0, 4350.0, 4300.0, 4250.0, 4200.0, 4150.0]);
        let d: Vec<f64> = c.readouts.iter().map(|r| (r.d * 1e6).round()).collect();
        assert_eq!(d, [7.0, 10.0, 15.0, 15.0, 10.0, 7.0]);
        let hosts: Vec<usize> = c.readouts.iter().map(|r| r.host).collect();
        assert_eq!(hosts, [2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn canonical_round_trip() {
        let c = parse_chip_config(FIXTURE).unwrap();
        let text = c.to_canonical_toml();
        let c2 = parse_chip_config(&text).unwrap();
        assert_eq!(c2.to_canonical_toml(), text);
        assert_eq!(c2.readouts.len(), c.readouts.len());
        for (a, b) in c.readouts.iter().zip(&c2.readouts) {
            assert!((a.l_c2 - b.l_c2).abs() <= 1e-15 * a.l_c2.abs());
        }
    }

    #[test]
    fn empty_readout_table_is_valid() {
        let cut = FIXTURE.find("[[readout]]").unwrap();
        let c = parse_chip_config(&FIXTURE[..cut]).unwrap();
        assert!(c.readouts.is_empty());
    }

    #[test]
    fn schema_violations_name_the_path() {
        let bad = FIXTURE.replace("hs = \"10 um\"", "hs = \"-10 um\"");
        match parse_chip_config(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "stack.hs"),
            other => panic!("{other:?}"),
        }
        let bad = FIXTURE.replace("hs = \"10 um\"", "hs = \"10 GHz\"");
        assert!(
            matches!(parse_chip_config(&bad), Err(Error::Config { path, .. }) if path == "stack.hs")
        );
        let bad = FIXTURE.replace("[stack]", "[stack]\ncolour = 3");
        assert!(
            matches!(parse_chip_config(&bad), Err(Error::Config { msg, .. }) if msg.contains("colour"))
        );
        let bad = FIXTURE.replace("host = 3", "host = 4");
        assert!(
            matches!(parse_chip_config(&bad), Err(Error::Config { path, .. }) if path.ends_with(".host"))
        );
        let bad = FIXTURE.replace("hb = \"500 um\"\n", "");
        assert!(
            matches!(parse_chip_config(&bad), Err(Error::Config { msg, .. }) if msg.contains("hb"))
        );
    }
}
