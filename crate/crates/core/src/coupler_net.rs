//! Two quarter-wave resonators sharing a coupled-line section.
//!
//! The coupled section is a four-port. Its impedance matrix uses the
//! standard coupled-line numbering: port 1 and port 4 are the two ends of
//! line A, port 2 and port 3 the ends of line B, with ports 1 and 2 on the
//! same side. Both resonators are laid out in parallel with their short
//! ends beyond ports 4 and 3 and their open ends beyond ports 1 and 2.
//!
//! Loading every port with the reflection of the line section behind it,
//! the coupled system resonates where `det(I - Gamma S) = 0`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled_tgcpw::{even_odd_params, CoupledCrossSection, EvenOddParams};
use crate::tgcpw::{line_params, quarter_wave_frequency, ResonatorSpec, TLineParams};
use crate::units::C0;
use crate::{Error, Result};

pub type CMatrix4 = Matrix4<Complex64>;

const POLE_TOL: f64 = 1e-9;
const SWEEP_POINTS: usize = 2001;
const MIN_DEPTH: f64 = 1e-2;
const GOLDEN_RES_HZ: f64 = 1.0;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Two resonators coupled through one shared section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledPairSpec {
    pub res_a: ResonatorSpec,
    pub res_b: ResonatorSpec,
    pub even_odd: EvenOddParams,
    /// Uncoupled line parameters of the resonator sections.
    pub line: TLineParams,
    /// Reference impedance of the four ports.
    pub z0_port: f64,
}

impl CoupledPairSpec {
    /// Build from geometry: both resonators use `res_a.cross_section`; the
    /// coupled section has edge spacing `d`.
    pub fn from_geometry(res_a: ResonatorSpec, res_b: ResonatorSpec, d: f64) -> Result<Self> {
        if (res_a.l_c - res_b.l_c).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "coupled section lengths differ: {} vs {}",
                res_a.l_c, res_b.l_c
            )));
        }
        let cs = res_a.cross_section;
        let line = line_params(&cs)?;
        let even_odd = even_odd_params(&CoupledCrossSection::from_line(&cs, d))?;
        Ok(Self {
            res_a,
            res_b,
            even_odd,
            line,
            z0_port: 50.0,
        })
    }

    /// `1 + L_k / L_g`; the coupled section shares the kinetic fraction.
    fn lk_scale(&self) -> f64 {
        1.0 + self.line.l_lk / self.line.l_lg
    }

    /// Phase constant of the uncoupled sections.
    pub fn beta(&self, f: f64) -> f64 {
        self.line.beta(f)
    }

    /// Resonator line impedance including kinetic inductance.
    pub fn z0_res(&self) -> f64 {
        ((self.line.l_lg + self.line.l_lk) / self.line.c_l).sqrt()
    }

    /// Even- and odd-mode electrical lengths of the coupled section.
    pub fn modal_thetas(&self, f: f64) -> (f64, f64) {
        let k = 2.0 * PI * f * self.res_a.l_c / C0;
        let s = self.lk_scale();
        (
            k * (self.even_odd.eps_even * s).sqrt(),
            k * (self.even_odd.eps_odd * s).sqrt(),
        )
    }

    pub fn bare_frequencies(&self) -> Result<(f64, f64)> {
        Ok((
            quarter_wave_frequency(&self.line, self.res_a.electrical_length())?,
            quarter_wave_frequency(&self.line, self.res_b.electrical_length())?,
        ))
    }

    /// Coupled-section scattering matrix in coupled-line port numbering.
    pub fn coupler_s(&self, f: f64) -> Result<CMatrix4> {
        let (te, to) = self.modal_thetas(f);
        let s = self.lk_scale().sqrt();
        let z =
            coupler_z_matrix_modal(self.even_odd.z0_even * s, self.even_odd.z0_odd * s, te, to)?;
        z_to_s(&z, &[self.z0_port; 4])
    }

    /// `det(I - Gamma S)` at frequency `f`.
    pub fn determinant(&self, f: f64) -> Result<Complex64> {
        let g = section_reflections(self, f);
        // Resonance-order [o_a, s_a, s_b, o_b] to coupled-line ports [1, 2, 3, 4].
        let gamma = Vector4::new(g.open_a, g.open_b, g.short_b, g.short_a);
        let s = self.coupler_s(f)?;
        let m = CMatrix4::identity() - CMatrix4::from_diagonal(&gamma) * s;
        Ok(m.determinant())
    }
}

/// Reflections seen from the coupled section into the four outer sections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionReflections {
    pub open_a: Complex64,
    pub short_a: Complex64,
    pub short_b: Complex64,
    pub open_b: Complex64,
}

impl SectionReflections {
    /// `[Gamma_o1, Gamma_s1, Gamma_s2, Gamma_o2]`.
    pub fn as_array(&self) -> [Complex64; 4] {
        [self.open_a, self.short_a, self.short_b, self.open_b]
    }
}

/// Reflection of a shorted line of length `l`, impedance `zr`, seen from a
/// port of impedance `z0`.
pub fn gamma_short(zr: f64, z0: f64, beta_l: f64) -> Complex64 {
    let (s, c) = beta_l.sin_cos();
    let zin = J * zr * s;
    (zin - z0 * c) / (zin + z0 * c)
}

/// Reflection of an open-ended line of length `l`.
pub fn gamma_open(zr: f64, z0: f64, beta_l: f64) -> Complex64 {
    let (s, c) = beta_l.sin_cos();
    let zin = -J * zr * c;
    (zin - z0 * s) / (zin + z0 * s)
}

/// Terminations at frequency `f`. The open-side length includes the end
/// extension of each resonator.
pub fn section_reflections(spec: &CoupledPairSpec, f: f64) -> SectionReflections {
    let beta = spec.beta(f);
    let (zr, z0) = (spec.z0_res(), spec.z0_port);
    SectionReflections {
        open_a: gamma_open(zr, z0, beta * spec.res_a.open_length_eff()),
        short_a: gamma_short(zr, z0, beta * spec.res_a.l_s),
        short_b: gamma_short(zr, z0, beta * spec.res_b.l_s),
        open_b: gamma_open(zr, z0, beta * spec.res_b.open_length_eff()),
    }
}

fn check_pole(theta: f64) -> Result<()> {
    let dist = (theta / PI - (theta / PI).round()).abs() * PI;
    if dist < POLE_TOL {
        return Err(Error::Pole {
            theta,
            tol: POLE_TOL,
        });
    }
    Ok(())
}

/// Impedance matrix of a symmetric coupled-line section with common
/// electrical length `theta`.
pub fn coupler_z_matrix(z0e: f64, z0o: f64, theta: f64) -> Result<CMatrix4> {
    coupler_z_matrix_modal(z0e, z0o, theta, theta)
}

/// Same with distinct even/odd electrical lengths, needed when the two modes
/// see different effective permittivities.
pub fn coupler_z_matrix_modal(z0e: f64, z0o: f64, theta_e: f64, theta_o: f64) -> Result<CMatrix4> {
    check_pole(theta_e)?;
    check_pole(theta_o)?;
    let (cot_e, cot_o) = (1.0 / theta_e.tan(), 1.0 / theta_o.tan());
    let (csc_e, csc_o) = (1.0 / theta_e.sin(), 1.0 / theta_o.sin());
    let h = Complex64::new(0.0, -0.5);
    let a = h * (z0e * cot_e + z0o * cot_o);
    let b = h * (z0e * cot_e - z0o * cot_o);
    let c = h * (z0e * csc_e - z0o * csc_o);
    let d = h * (z0e * csc_e + z0o * csc_o);
    #[rustfmt::skip]
    let z = CMatrix4::new(
        a, b, c, d,
        b, a, d, c,
        c, d, a, b,
        d, c, b, a,
    );
    Ok(z)
}

/// `S = R^{-1/2} (Z - R)(Z + R)^{-1} R^{1/2}` for real port impedances `R`.
pub fn z_to_s(z: &CMatrix4, port_impedances: &[f64; 4]) -> Result<CMatrix4> {
    if port_impedances.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Domain("port impedances must be positive".into()));
    }
    let r = CMatrix4::from_diagonal(&Vector4::from_iterator(
        port_impedances.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let sq = CMatrix4::from_diagonal(&Vector4::from_iterator(
        port_impedances
            .iter()
            .map(|&x| Complex64::new(x.sqrt(), 0.0)),
    ));
    let sq_inv = CMatrix4::from_diagonal(&Vector4::from_iterator(
        port_impedances
            .iter()
            .map(|&x| Complex64::new(1.0 / x.sqrt(), 0.0)),
    ));
    let inv = (z + r)
        .try_inverse()
        .ok_or_else(|| Error::Singular("Z + Z0 is singular".into()))?;
    Ok(sq_inv * (z - r) * inv * sq)
}

/// Dressed and bare frequencies with the extracted coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedPair {
    pub f1: f64,
    pub f2: f64,
    pub f01: f64,
    pub f02: f64,
    pub m_phys: f64,
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Roots of `det(I - Gamma S)` inside `bracket` (default 0.9 min to 1.1 max
/// of the bare frequencies).
pub fn dressed_pair_frequencies(
    spec: &CoupledPairSpec,
    bracket: Option<(f64, f64)>,
) -> Result<DressedPair> {
    let (f01, f02) = spec.bare_frequencies()?;
    let (lo, hi) = bracket.unwrap_or((0.9 * f01.min(f02), 1.1 * f01.max(f02)));
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid bracket ({lo}, {hi})")));
    }
    let step = (hi - lo) / (SWEEP_POINTS - 1) as f64;
    let freqs: Vec<f64> = (0..SWEEP_POINTS).map(|i| lo + step * i as f64).collect();
    let mags: Vec<f64> = freqs
        .par_iter()
        .map(|&f| spec.determinant(f).map(|d| d.norm()))
        .collect::<Result<_>>()?;
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];

    let mut roots = Vec::new();
    let mut minima = Vec::new();
    for i in 1..SWEEP_POINTS - 1 {
        if mags[i] < mags[i - 1] && mags[i] <= mags[i + 1] && mags[i] < MIN_DEPTH * median {
            minima.push(freqs[i]);
            let g = |f: f64| {
                spec.determinant(f)
                    .map(|d| d.norm())
                    .unwrap_or(f64::INFINITY)
            };
            roots.push(golden_min(g, freqs[i - 1], freqs[i + 1], GOLDEN_RES_HZ));
        }
    }
    if roots.len() != 2 {
        return Err(Error::RootCount {
            found: roots.len(),
            minima,
        });
    }
    let (f1, f2) = (roots[0].min(roots[1]), roots[0].max(roots[1]));
    let m_phys = mutual_coupling_from_freqs(f01, f02, f1, f2)?;
    Ok(DressedPair {
        f1,
        f2,
        f01,
        f02,
        m_phys,
    })
}

/// Coupling from bare `(f01, f02)` and dressed `(f1, f2)` frequencies.
pub fn mutual_coupling_from_freqs(f01: f64, f02: f64, f1: f64, f2: f64) -> Result<f64> {
    if !(f01 > 0.0 && f02 > 0.0 && f1 > 0.0 && f2 > 0.0) {
        return Err(Error::Domain("frequencies must be positive".into()));
    }
    let (f1, f2) = (f1.min(f2), f1.max(f2));
    let a = (f2 * f2 - f1 * f1) / (f2 * f2 + f1 * f1);
    let b = (f02 * f02 - f01 * f01) / (f02 * f02 + f01 * f01);
    let arg = a * a - b * b;
    if arg < -1e-12 {
        return Err(Error::Inconsistent(format!(
            "dressed splitting smaller than bare detuning ({a} < {})",
            b.abs()
        )));
    }
    Ok(0.5 * (f02 / f01 + f01 / f02) * arg.max(0.0).sqrt())
}

/// `C_m / sqrt(C1 C2)`.
pub fn patch_coupling(c_m: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0 && c_m >= 0.0) {
        return Err(Error::Domain(format!(
            "need c1, c2 > 0 and c_m >= 0, got {c_m}, {c1}, {c2}"
        )));
    }
    Ok(c_m / (c1 * c2).sqrt())
}

/// Lumped capacitance of a quarter-wave resonator near its fundamental,
/// `pi / (4 omega0 z0)`.
pub fn resonator_equiv_capacitance(f0: f64, z0: f64) -> Result<f64> {
    if !(f0 > 0.0 && z0 > 0.0) {
        return Err(Error::Domain(format!("need f0, z0 > 0, got {f0}, {z0}")));
    }
    Ok(PI / (4.0 * 2.0 * PI * f0 * z0))
}
