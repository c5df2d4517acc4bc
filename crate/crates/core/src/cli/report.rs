//! Chip design flow: geometry to couplings to spectrum to fitted readouts.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use super::config::{ChipConfig, InnerCoupling, LineLoading, TapCoupling};
use super::spectrum_csv::write_csv_spectrum;
use crate::cmatrix::{
    build_coupling_matrix, external_coupling, linspace, qe_from_group_delay, s_at, s_response,
    ComplexSpectrum, CouplingMatrix, FilterSpec, ReadoutGroup,
};
use crate::coupler_net::{dressed_pair_frequencies, CoupledPairSpec};
use crate::notchfit::{find_dips, fit_notch, FitOptions};
use crate::tgcpw::{
    line_params, quarter_wave_frequency, self_coupling, CrossSection, ResonatorSpec, TLineParams,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub f0: f64,
    pub fbw: f64,
    pub line: TLineParams,
    /// Open-end extension of the filter lines from their patch.
    pub line_delta_l: f64,
    pub line_f0: f64,
    pub spiral_f0: f64,
    /// `[m11, m22, m33, m44]`.
    pub self_couplings: [f64; 4],
    /// `[m12, m23, m34]`.
    pub path: [f64; 3],
    pub m_s: f64,
    pub m_l: f64,
    /// -3 dB edges of the filter without readouts.
    pub passband_3db: (f64, f64),
    pub probe: f64,
    pub stopband_db_at_probe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadoutReport {
    pub index: usize,
    pub host: usize,
    pub f_bare: f64,
    pub f_host: f64,
    pub m_self: f64,
    pub m_coupling: f64,
    pub f_r_cal: f64,
    pub q_l_cal: f64,
    pub q_e_cal: f64,
    pub phi: f64,
    pub q_i: Option<f64>,
    pub residual: f64,
    pub window: (f64, f64),
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipReport {
    pub filter: FilterReport,
    pub readouts: Vec<ReadoutReport>,
    pub matrix: MatrixReport,
    /// File name of the full spectrum written next to the report.
    pub spectrum_file: String,
    #[serde(skip)]
    pub spectrum: ComplexSpectrum,
}

/// Couplings derived from geometry, before any spectrum is computed.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub spec: FilterSpec,
    pub line: TLineParams,
    pub line_delta_l: f64,
    pub line_f0: f64,
    /// `(index, f_bare, f_host)` per readout in config order.
    pub readout_bare: Vec<(usize, f64, f64)>,
}

pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const REPORT_FILE: &str = "report.json";

/// Notch fit settings used by the chip flow.
pub fn chip_fit_options() -> FitOptions {
    FitOptions::default()
}

fn cross_section(cfg: &ChipConfig) -> CrossSection {
    CrossSection {
        w: cfg.filter.w,
        g: cfg.filter.g,
        hs: cfg.stack.hs,
        hb: cfg.stack.hb,
        eps_r: cfg.stack.eps_r,
        t: 0.0,
        lk_ratio: cfg.stack.lk_ratio,
    }
}

/// Geometry to coupling matrix entries.
pub fn synthesize(cfg: &ChipConfig) -> Result<Synthesis> {
    let f = &cfg.filter;
    let cs = cross_section(cfg);
    let line = line_params(&cs).map_err(|e| e.in_stage("tgcpw"))?;
    let (line_delta_l, line_f0) = match f.line_loading {
        LineLoading::PatchCapacitance(c_p) => {
            let dl = c_p / line.c_l;
            (
                dl,
                quarter_wave_frequency(&line, f.line_length + dl)
                    .map_err(|e| e.in_stage("tgcpw"))?,
            )
        }
        LineLoading::BareFrequency(f_line) => {
            let dl = line.phase_velocity() / (4.0 * f_line) - f.line_length;
            if dl < 0.0 {
                return Err(Error::config(
                    "filter.line_f0",
                    format!("{f_line} Hz is above the unloaded line frequency"),
                ));
            }
            (dl, f_line)
        }
    };
    let f_l = f.f_l;
    let f_h = f.f_h;
    let f0 = (f_l * f_h).sqrt();
    let fbw = (f_h - f_l) / f0;
    let m11 = self_coupling(f.spiral_f0, f0, fbw)?;
    let m22 = self_coupling(line_f0, f0, fbw)?;

    let m23 = match f.m23 {
        InnerCoupling::Direct(m) => m,
        InnerCoupling::Section { l_c, d } => {
            let r = ResonatorSpec::new(0.0, l_c, f.line_length - l_c, line_delta_l, cs)
                .map_err(|e| e.in_stage("coupler_net"))?;
            let pair =
                CoupledPairSpec::from_geometry(r, r, d).map_err(|e| e.in_stage("coupled_tgcpw"))?;
            dressed_pair_frequencies(&pair, None)
                .map_err(|e| e.in_stage("coupler_net"))?
                .m_phys
                / fbw
        }
    };
    let (m_s, m_l) = match f.tap {
        TapCoupling::Direct { m_s, m_l } => (m_s, m_l),
        TapCoupling::GroupDelay(tau) => {
            let m = external_coupling(qe_from_group_delay(f0, tau)?, fbw)
                .map_err(|e| e.in_stage("cmatrix"))?;
            (m, m)
        }
    };

    let conv = cfg.analysis.l_c2_convention;
    let mut groups = vec![
        ReadoutGroup {
            host: 2,
            members: vec![],
        },
        ReadoutGroup {
            host: 3,
            members: vec![],
        },
    ];
    let mut readout_bare = Vec::new();
    for (i, r) in cfg.readouts.iter().enumerate() {
        let tag = |e: Error| e.in_stage("coupler_net");
        let l_s = conv.short_side(r.l_c2, r.l_c);
        if l_s < 0.0 || l_s + r.l_c > f.line_length {
            return Err(Error::config(
                format!("readout[{i}].l_c2"),
                "coupled section does not fit on the host line",
            ));
        }
        let host = ResonatorSpec::new(l_s, r.l_c, f.line_length - l_s - r.l_c, line_delta_l, cs)
            .map_err(tag)?;
        let res = ResonatorSpec::from_total(r.l_t, r.l_s, r.l_c, 0.0, cs).map_err(tag)?;
        let pair = CoupledPairSpec::from_geometry(host, res, r.d)
            .map_err(|e| e.in_stage("coupled_tgcpw"))?;
        let dressed = dressed_pair_frequencies(&pair, None).map_err(tag)?;
        let m_self = self_coupling(dressed.f02, f0, fbw)?;
        groups[r.host - 2]
            .members
            .push((m_self, dressed.m_phys / fbw));
        readout_bare.push((i, dressed.f02, dressed.f01));
    }
    groups.retain(|g| !g.members.is_empty());
    let spec = FilterSpec {
        f_l,
        f_h,
        self_couplings: [m11, m22, m22, m11],
        path: [f.m12, m23, f.m34],
        m_s,
        m_l,
        groups,
    };
    Ok(Synthesis {
        spec,
        line,
        line_delta_l,
        line_f0,
        readout_bare,
    })
}

/// -3 dB edges of `|S21|` around `f0`, refined by bisection.
fn passband_edges(cm: &CouplingMatrix, freqs: &[f64]) -> Result<(f64, f64)> {
    let level = 10f64.powf(-3.0 / 20.0);
    let above = |f: f64| -> Result<bool> { Ok(s_at(cm, f)?.1.norm() >= level) };
    if !above(cm.f0)? {
        return Err(Error::Inconsistent(
            "filter transmission at f0 is below -3 dB".into(),
        ));
    }
    let bisect = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if above(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    let below_f0 = freqs.iter().rev().filter(|&&f| f < cm.f0);
    let mut lo = None;
    for &f in below_f0 {
        if !above(f)? {
            lo = Some(f);
            break;
        }
    }
    let mut hi = None;
    for &f in freqs.iter().filter(|&&f| f > cm.f0) {
        if !above(f)? {
            hi = Some(f);
            break;
        }
    }
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok((bisect(cm.f0, lo)?, bisect(cm.f0, hi)?)),
        _ => Err(Error::Inconsistent(
            "passband edge outside the sweep".into(),
        )),
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Spectrum, passband and notch fits for already synthesized couplings.
pub fn analyze(cfg: &ChipConfig, syn: &Synthesis) -> Result<ChipReport> {
    let a = &cfg.analysis;
    let stage = |e: Error| e.in_stage("cmatrix");
    let cm = build_coupling_matrix(&syn.spec).map_err(stage)?;
    let freqs = linspace(a.f_start, a.f_stop, a.points);
    let spectrum = s_response(&cm, &freqs).map_err(stage)?;

    let bare = FilterSpec {
        groups: vec![],
        ..syn.spec.clone()
    };
    let bare_cm = build_coupling_matrix(&bare).map_err(stage)?;
    let passband_3db = passband_edges(&bare_cm, &freqs).map_err(stage)?;
    let stopband_db_at_probe = 20.0 * s_at(&cm, a.probe).map_err(stage)?.1.norm().log10();

    let opts = chip_fit_options();
    let dips = find_dips(&spectrum, &opts);
    if dips.len() != syn.readout_bare.len() {
        return Err(Error::Inconsistent(format!(
            "found {} dips for {} readout resonators",
            dips.len(),
            syn.readout_bare.len()
        ))
        .in_stage("notchfit"));
    }
    let mut order: Vec<usize> = (0..syn.readout_bare.len()).collect();
    order.sort_by(|&i, &j| syn.readout_bare[i].1.total_cmp(&syn.readout_bare[j].1));
    let mut readouts: Vec<Option<ReadoutReport>> = vec![None; order.len()];
    let mut counters = [0usize; 2];
    let mut member_of = Vec::with_capacity(cfg.readouts.len());
    for r in &cfg.readouts {
        member_of.push((r.host, counters[r.host - 2]));
        counters[r.host - 2] += 1;
    }
    for (dip, &ri) in dips.iter().zip(&order) {
        let fit = fit_notch(&spectrum, dip.window, &opts).map_err(|e| e.in_stage("notchfit"))?;
        let (host, k) = member_of[ri];
        let group = syn
            .spec
            .groups
            .iter()
            .find(|g| g.host == host)
            .expect("readout group exists");
        let (m_self, m_coupling) = group.members[k];
        let (_, f_bare, f_host) = syn.readout_bare[ri];
        readouts[ri] = Some(ReadoutReport {
            index: ri + 1,
            host,
            f_bare,
            f_host,
            m_self,
            m_coupling,
            f_r_cal: fit.params.f_r,
            q_l_cal: fit.params.q_l,
            q_e_cal: fit.params.q_e,
            phi: fit.params.phi,
            q_i: fit.q_i,
            residual: fit.residual,
            window: fit.window,
            warnings: fit.warnings,
        });
    }

    let s = &syn.spec;
    Ok(ChipReport {
        filter: FilterReport {
            f0: s.f0(),
            fbw: s.fbw(),
            line: syn.line,
            line_delta_l: syn.line_delta_l,
            line_f0: syn.line_f0,
            spiral_f0: cfg.filter.spiral_f0,
            self_couplings: s.self_couplings,
            path: s.path,
            m_s: s.m_s,
            m_l: s.m_l,
            passband_3db,
            probe: a.probe,
            stopband_db_at_probe,
        },
        readouts: readouts
            .into_iter()
            .map(|r| r.expect("every readout matched"))
            .collect(),
        matrix: MatrixReport {
            labels: cm.labels.clone(),
            rows: matrix_rows(&cm.m),
        },
        spectrum_file: SPECTRUM_FILE.into(),
        spectrum,
    })
}

pub fn chip_report(cfg: &ChipConfig) -> Result<ChipReport> {
    analyze(cfg, &synthesize(cfg)?)
}

/// Write `report.json` and `spectrum.csv` into `dir`, creating it if needed.
pub fn write_report(report: &ChipReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json =
        serde_json::to_string_pretty(report).map_err(|e| Error::Inconsistent(e.to_string()))?;
    std::fs::write(dir.join(REPORT_FILE), json + "\n")?;
    write_csv_spectrum(&report.spectrum, &dir.join(SPECTRUM_FILE))
}
