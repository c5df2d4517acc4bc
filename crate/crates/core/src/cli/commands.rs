//! Subcommand definitions and handlers.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::parse_chip_config;
use super::report::{chip_report, synthesize, write_report};
use super::spectrum_csv::{format_csv_spectrum, read_csv_spectrum};
use super::touchstone::read_touchstone;
use crate::cmatrix::{
    build_coupling_matrix, external_coupling, group_delay, linspace, qe_from_group_delay,
    s_response, ComplexSpectrum, Param,
};
use crate::coupled_tgcpw::{even_odd_params, CoupledCrossSection};
use crate::coupler_net::{dressed_pair_frequencies, CoupledPairSpec};
use crate::notchfit::{find_dips, fit_notch, FitOptions, NotchFitResult};
use crate::oracles::{coupled_fd, ladder_coupling, tgcpw_fd, GridResolution, SolverOptions};
use crate::tgcpw::{line_params, quarter_wave_frequency, CrossSection, ResonatorSpec};
use crate::units::{parse_quantity, Dimension};
use crate::{Error, Result};

fn length(s: &str) -> std::result::Result<f64, String> {
    parse_quantity(s, Dimension::Length, "value").map_err(|e| e.to_string())
}

fn frequency(s: &str) -> std::result::Result<f64, String> {
    parse_quantity(s, Dimension::Frequency, "value").map_err(|e| e.to_string())
}

fn capacitance(s: &str) -> std::result::Result<f64, String> {
    parse_quantity(s, Dimension::Capacitance, "value").map_err(|e| e.to_string())
}

/// Coupled-resonator filter toolkit for flip-chip CPW readout chips.
#[derive(Debug, Parser)]
#[command(name = "purcell", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-line impedance, permittivity and per-length constants.
    LineParams(LineParamsArgs),
    /// Even/odd-mode parameters over a list of spacings, as CSV.
    CoupledParams(CoupledParamsArgs),
    /// Bare and dressed frequencies and the coupling of two resonators.
    Couple(CoupleArgs),
    /// Spectrum of the coupling matrix synthesized from a chip config, as CSV.
    MatrixResponse(MatrixResponseArgs),
    /// External Q from the group delay of a measured or simulated spectrum.
    ExtractQe(ExtractQeArgs),
    /// Fit notch resonances in a spectrum file.
    FitNotch(FitNotchArgs),
    /// Full chip flow: report.json and spectrum.csv.
    Chip(ChipArgs),
    /// Reference solvers for cross-checking the closed-form models.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Finite-difference cross-section capacitances against the conformal model.
    Xsection(XsectionArgs),
    /// LC-ladder eigenfrequencies against the network model over an l_c sweep.
    Ladder(LadderArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CrossSectionArgs {
    /// Centre strip width.
    #[arg(long, value_parser = length, default_value = "10 um")]
    pub w: f64,
    /// Gap width.
    #[arg(long, value_parser = length, default_value = "9 um")]
    pub g: f64,
    /// Chip-to-chip spacing.
    #[arg(long, value_parser = length, default_value = "10 um")]
    pub hs: f64,
    /// Substrate thickness.
    #[arg(long, value_parser = length, default_value = "500 um")]
    pub hb: f64,
    #[arg(long, default_value_t = 11.45)]
    pub eps_r: f64,
    /// Kinetic to geometric inductance ratio.
    #[arg(long, default_value_t = 0.0)]
    pub lk_ratio: f64,
    /// Metal thickness (recorded only).
    #[arg(long, value_parser = length, default_value = "0 um")]
    pub t: f64,
}

impl CrossSectionArgs {
    fn cross_section(&self) -> Result<CrossSection> {
        let cs = CrossSection {
            w: self.w,
            g: self.g,
            hs: self.hs,
            hb: self.hb,
            eps_r: self.eps_r,
            t: self.t,
            lk_ratio: self.lk_ratio,
        };
        cs.validate()
            .map_err(|e| Error::config("cross-section", e.to_string()))?;
        Ok(cs)
    }
}

#[derive(Debug, Args)]
pub struct LineParamsArgs {
    #[command(flatten)]
    pub cs: CrossSectionArgs,
    /// Physical length of a shorted quarter-wave resonator.
    #[arg(long, value_parser = length)]
    pub length: Option<f64>,
    /// Lumped capacitance at the open end.
    #[arg(long, value_parser = capacitance, default_value = "0 fF")]
    pub patch_c: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoupledParamsArgs {
    #[command(flatten)]
    pub cs: CrossSectionArgs,
    /// Edge-to-edge spacings, comma separated.
    #[arg(long, value_parser = length, value_delimiter = ',', default_value = "1um,3um,6um,10um,15um")]
    pub d: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    #[command(flatten)]
    pub cs: CrossSectionArgs,
    /// Total length of resonator 1.
    #[arg(long, value_parser = length, default_value = "4340 um")]
    pub lt1: f64,
    /// Short-side length of resonator 1.
    #[arg(long, value_parser = length, default_value = "500 um")]
    pub ls1: f64,
    #[arg(long, value_parser = length, default_value = "4400 um")]
    pub lt2: f64,
    #[arg(long, value_parser = length, default_value = "500 um")]
    pub ls2: f64,
    /// Open-end extension of resonator 1.
    #[arg(long, value_parser = length, default_value = "0 um")]
    pub delta_l1: f64,
    #[arg(long, value_parser = length, default_value = "0 um")]
    pub delta_l2: f64,
    /// Spacing in the coupled section.
    #[arg(long, value_parser = length, default_value = "10 um")]
    pub d: f64,
}

impl PairArgs {
    fn spec(&self, l_c: f64) -> Result<CoupledPairSpec> {
        let cs = self.cs.cross_section()?;
        let a = ResonatorSpec::from_total(self.lt1, self.ls1, l_c, self.delta_l1, cs)?;
        let b = ResonatorSpec::from_total(self.lt2, self.ls2, l_c, self.delta_l2, cs)?;
        CoupledPairSpec::from_geometry(a, b, self.d)
    }
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Coupled section length.
    #[arg(long, value_parser = length, default_value = "200 um")]
    pub lc: f64,
    /// Fractional bandwidth for the normalized coupling.
    #[arg(long)]
    pub fbw: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixResponseArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Which {
    S11,
    S21,
}

#[derive(Debug, Args)]
pub struct ExtractQeArgs {
    /// Spectrum file (.s2p or CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Evaluation frequency; defaults to the group-delay peak.
    #[arg(long, value_parser = frequency)]
    pub f0: Option<f64>,
    #[arg(long, value_enum, default_value = "s11")]
    pub param: Which,
    /// Fractional bandwidth; adds the normalized external coupling.
    #[arg(long)]
    pub fbw: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitNotchArgs {
    /// Spectrum file (.s2p or CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Fit window `lo,hi`; repeat for several dips. Without it dips are found automatically.
    #[arg(long, value_parser = frequency, value_delimiter = ',', action = clap::ArgAction::Append)]
    pub window: Vec<f64>,
    /// Skip the joint seven-parameter refinement and report the staged estimate.
    #[arg(long)]
    pub staged_only: bool,
    /// Flat magnitude correction added to S21 before fitting (dB).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gain_correction: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChipArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct XsectionArgs {
    #[command(flatten)]
    pub cs: CrossSectionArgs,
    /// Coupled-pair spacings; without it the single line is compared.
    #[arg(long, value_parser = length, value_delimiter = ',')]
    pub d: Vec<f64>,
    /// Grid scale; below 1 refines.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Coupled section lengths, comma separated.
    #[arg(long, value_parser = length, value_delimiter = ',', default_value = "100um,200um,300um,400um")]
    pub lc: Vec<f64>,
    /// Maximum cell length.
    #[arg(long, value_parser = length, default_value = "10 um")]
    pub h: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Error::Inconsistent(e.to_string()))
}

fn read_config(path: &Path) -> Result<super::config::ChipConfig> {
    parse_chip_config(&std::fs::read_to_string(path)?)
}

/// Load `.s2p` by extension, anything else as CSV.
pub fn read_spectrum(path: &Path) -> Result<ComplexSpectrum> {
    let is_s2p = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("s2p"));
    if is_s2p {
        read_touchstone(path)
    } else {
        read_csv_spectrum(path)
    }
}

#[derive(Serialize)]
struct LineReport {
    #[serde(flatten)]
    params: crate::tgcpw::TLineParams,
    delta_l: f64,
    f0: Option<f64>,
}

#[derive(Serialize)]
struct CoupleReport {
    f01: f64,
    f02: f64,
    f1: f64,
    f2: f64,
    m_phys: f64,
    m: Option<f64>,
}

#[derive(Serialize)]
struct QeReport {
    f0: f64,
    tau: f64,
    q_e: f64,
    m_s: Option<f64>,
}

/// Flat record per fitted dip.
#[derive(Debug, Serialize)]
pub struct NotchRecord {
    pub f_r: f64,
    pub q_l: f64,
    pub q_e: f64,
    pub q_i: Option<f64>,
    pub phi: f64,
    pub a: f64,
    pub alpha: f64,
    pub tau: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub warnings: Vec<String>,
}

impl From<NotchFitResult> for NotchRecord {
    fn from(r: NotchFitResult) -> Self {
        let p = r.params;
        Self {
            f_r: p.f_r,
            q_l: p.q_l,
            q_e: p.q_e,
            q_i: r.q_i,
            phi: p.phi,
            a: p.a,
            alpha: p.alpha,
            tau: p.tau,
            residual: r.residual,
            window: r.window,
            warnings: r.warnings,
        }
    }
}

/// Scale S21 by a flat gain in dB.
pub fn apply_gain_correction(s: &mut ComplexSpectrum, db: f64) {
    let g = 10f64.powf(db / 20.0);
    for v in &mut s.s21 {
        *v *= g;
    }
}

/// Fit either the given windows or every detected dip.
pub fn fit_notches(
    s: &ComplexSpectrum,
    windows: &[(f64, f64)],
    opts: &FitOptions,
) -> Result<Vec<NotchRecord>> {
    let windows: Vec<(f64, f64)> = if windows.is_empty() {
        find_dips(s, opts).iter().map(|d| d.window).collect()
    } else {
        windows.to_vec()
    };
    windows
        .iter()
        .map(|&w| fit_notch(s, w, opts).map(NotchRecord::from))
        .collect()
}

fn interp(x: &[f64], y: &[f64], at: f64) -> Result<f64> {
    if !(at >= x[0] && at <= x[x.len() - 1]) {
        return Err(Error::Domain(format!("{at} Hz is outside the spectrum")));
    }
    let i = x.partition_point(|&v| v <= at).clamp(1, x.len() - 1);
    let t = (at - x[i - 1]) / (x[i] - x[i - 1]);
    Ok(y[i - 1] + t * (y[i] - y[i - 1]))
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::LineParams(a) => {
            let cs = a.cs.cross_section()?;
            let params = line_params(&cs)?;
            let delta_l = a.patch_c / params.c_l;
            let f0 = a
                .length
                .map(|l| quarter_wave_frequency(&params, l + delta_l))
                .transpose()?;
            emit(
                a.out.as_deref(),
                &json(&LineReport {
                    params,
                    delta_l,
                    f0,
                })?,
            )
        }
        Command::CoupledParams(a) => {
            let cs = a.cs.cross_section()?;
            let mut text = String::from("d_m,z0_even,z0_odd,eps_even,eps_odd\n");
            for &d in &a.d {
                let eo = even_odd_params(&CoupledCrossSection::from_line(&cs, d))?;
                writeln!(
                    text,
                    "{d:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    eo.z0_even, eo.z0_odd, eo.eps_even, eo.eps_odd
                )
                .expect("String write");
            }
            emit(a.out.as_deref(), &text)
        }
        Command::Couple(a) => {
            let spec = a.pair.spec(a.lc)?;
            let dp = dressed_pair_frequencies(&spec, None)?;
            let r = CoupleReport {
                f01: dp.f01,
                f02: dp.f02,
                f1: dp.f1,
                f2: dp.f2,
                m_phys: dp.m_phys,
                m: a.fbw.map(|b| dp.m_phys / b),
            };
            emit(a.out.as_deref(), &json(&r)?)
        }
        Command::MatrixResponse(a) => {
            let cfg = read_config(&a.config)?;
            let syn = synthesize(&cfg)?;
            let cm = build_coupling_matrix(&syn.spec)?;
            let an = &cfg.analysis;
            let s = s_response(&cm, &linspace(an.f_start, an.f_stop, an.points))?;
            emit(a.out.as_deref(), &format_csv_spectrum(&s))
        }
        Command::ExtractQe(a) => {
            let s = read_spectrum(&a.input)?;
            let which = match a.param {
                Which::S11 => Param::S11,
                Which::S21 => Param::S21,
            };
            let tau = group_delay(&s, which)?;
            let f0 = match a.f0 {
                Some(f) => f,
                None => {
                    let i = (0..tau.len())
                        .max_by(|&i, &j| tau[i].total_cmp(&tau[j]))
                        .expect("non-empty spectrum");
                    s.freqs[i]
                }
            };
            let t0 = interp(&s.freqs, &tau, f0)?;
            let q_e = qe_from_group_delay(f0, t0)?;
            let m_s = a.fbw.map(|b| external_coupling(q_e, b)).transpose()?;
            emit(
                a.out.as_deref(),
                &json(&QeReport {
                    f0,
                    tau: t0,
                    q_e,
                    m_s,
                })?,
            )
        }
        Command::FitNotch(a) => {
            let mut s = read_spectrum(&a.input)?;
            apply_gain_correction(&mut s, a.gain_correction);
            if a.window.len() % 2 != 0 {
                return Err(Error::config("--window", "expected `lo,hi` pairs"));
            }
            let windows: Vec<(f64, f64)> = a.window.chunks(2).map(|w| (w[0], w[1])).collect();
            if windows.iter().any(|w| !(w.1 > w.0)) {
                return Err(Error::config("--window", "each window needs lo < hi"));
            }
            let opts = FitOptions {
                refine: !a.staged_only,
                ..FitOptions::default()
            };
            emit(a.out.as_deref(), &json(&fit_notches(&s, &windows, &opts)?)?)
        }
        Command::Chip(a) => {
            let cfg = read_config(&a.config)?;
            let report = chip_report(&cfg)?;
            write_report(&report, &a.out)
        }
        Command::Oracle(OracleCommand::Xsection(a)) => {
            let cs = a.cs.cross_section()?;
            if !(a.scale > 0.0) {
                return Err(Error::config("--scale", "must be positive"));
            }
            let res = GridResolution::default().scaled(a.scale);
            let opts = SolverOptions::default();
            let mut text = String::new();
            if a.d.is_empty() {
                let cm = line_params(&cs)?;
                let fd = tgcpw_fd(&cs, &res, &opts)?;
                text.push_str("z0_cm,z0_fd,c_l_cm,c_l_fd,eps_eff_cm,eps_eff_fd,nodes\n");
                writeln!(
                    text,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                    cm.z0, fd.z0, cm.c_l, fd.c_total, cm.eps_eff, fd.eps_eff, fd.nodes
                )
                .expect("String write");
            } else {
                text.push_str(
                    "d_m,z0_even_cm,z0_even_fd,z0_odd_cm,z0_odd_fd,c_even_cm,c_even_fd,c_odd_cm,c_odd_fd,\
                     c_even_air_cm,c_even_air_fd,c_odd_air_cm,c_odd_air_fd,nodes\n",
                );
                for &d in &a.d {
                    let ccs = CoupledCrossSection::from_line(&cs, d);
                    let cm = even_odd_params(&ccs)?;
                    let fd = coupled_fd(&ccs, &res, &opts)?;
                    let vals = [
                        d,
                        cm.z0_even,
                        fd.z0_even,
                        cm.z0_odd,
                        fd.z0_odd,
                        cm.c_even_total,
                        fd.c_even_total,
                        cm.c_odd_total,
                        fd.c_odd_total,
                        cm.c_even_air,
                        fd.c_even_air,
                        cm.c_odd_air,
                        fd.c_odd_air,
                    ];
                    for v in vals {
                        write!(text, "{v:.16e},").expect("String write");
                    }
                    writeln!(text, "{}", fd.nodes).expect("String write");
                }
            }
            emit(a.out.as_deref(), &text)
        }
        Command::Oracle(OracleCommand::Ladder(a)) => {
            let mut text = String::from("l_c_m,f1_net,f2_net,m_net,f1_ladder,f2_ladder,m_ladder\n");
            for &l_c in &a.lc {
                let spec = a.pair.spec(l_c)?;
                let net = dressed_pair_frequencies(&spec, None)?;
                let (f1, f2, m) = ladder_coupling(&spec, a.h)?;
                writeln!(
                    text,
                    "{l_c:.16e},{:.16e},{:.16e},{:.16e},{f1:.16e},{f2:.16e},{m:.16e}",
                    net.f1, net.f2, net.m_phys
                )
                .expect("String write");
            }
            emit(a.out.as_deref(), &text)
        }
    }
}
