//! Single top-grounded CPW: conformal-mapping line parameters and
//! quarter-wave resonator bookkeeping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::specfun::EllipticModulus;
use crate::units::{C0, EPS0};
use crate::{Error, Result};

/// Cross-section of a CPW under a top ground plane across a vacuum gap.
///
/// The centre strip and gaps sit on a substrate of thickness `hb`; the
/// facing chip is a continuous ground at distance `hs`. Metal thickness `t`
/// is recorded only; the model treats all metal as infinitely thin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub w: f64,
    pub g: f64,
    pub hs: f64,
    pub hb: f64,
    pub eps_r: f64,
    pub t: f64,
    pub lk_ratio: f64,
}

impl CrossSection {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w", self.w),
            ("g", self.g),
            ("hs", self.hs),
            ("hb", self.hb),
        ] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eps_r >= 1.0) {
            return Err(Error::Domain(format!(
                "eps_r must be >= 1, got {}",
                self.eps_r
            )));
        }
        if !(self.lk_ratio >= 0.0) || !(self.t >= 0.0) {
            return Err(Error::Domain("lk_ratio and t must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-unit-length parameters of a line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TLineParams {
    pub eps_eff: f64,
    pub z0: f64,
    /// Capacitance per length, F/m.
    pub c_l: f64,
    /// Geometric inductance per length, H/m.
    pub l_lg: f64,
    /// Kinetic inductance per length, H/m.
    pub l_lk: f64,
}

impl TLineParams {
    /// Phase velocity including kinetic inductance.
    pub fn phase_velocity(&self) -> f64 {
        1.0 / ((self.l_lg + self.l_lk) * self.c_l).sqrt()
    }

    /// Propagation constant at frequency `f`.
    pub fn beta(&self, f: f64) -> f64 {
        2.0 * PI * f / self.phase_velocity()
    }
}

/// Quarter-wave resonator split into short-side, coupled and open-side
/// sections. `delta_l` is the open-end extension from end loading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    pub l_s: f64,
    pub l_c: f64,
    pub l_o: f64,
    pub delta_l: f64,
    pub cross_section: CrossSection,
}

impl ResonatorSpec {
    pub fn new(
        l_s: f64,
        l_c: f64,
        l_o: f64,
        delta_l: f64,
        cross_section: CrossSection,
    ) -> Result<Self> {
        for (name, v) in [
            ("l_s", l_s),
            ("l_c", l_c),
            ("l_o", l_o),
            ("delta_l", delta_l),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        cross_section.validate()?;
        Ok(Self {
            l_s,
            l_c,
            l_o,
            delta_l,
            cross_section,
        })
    }

    /// Split a total length given the two outer sections' lengths.
    pub fn from_total(
        l_t: f64,
        l_s: f64,
        l_c: f64,
        delta_l: f64,
        cs: CrossSection,
    ) -> Result<Self> {
        let l_o = l_t - l_s - l_c;
        if l_o < -1e-15 {
            return Err(Error::Domain(format!(
                "sections exceed total length: l_s + l_c = {} > l_t = {l_t}",
                l_s + l_c
            )));
        }
        Self::new(l_s, l_c, l_o.max(0.0), delta_l, cs)
    }

    pub fn total_length(&self) -> f64 {
        self.l_s + self.l_c + self.l_o
    }

    pub fn open_length_eff(&self) -> f64 {
        self.l_o + self.delta_l
    }

    pub fn electrical_length(&self) -> f64 {
        self.total_length() + self.delta_l
    }
}

/// `sinh(x1) / sinh(x2)` for `0 < x1, x2`, without overflow for large args.
pub(crate) fn sinh_ratio(x1: f64, x2: f64) -> f64 {
    (x1 - x2).exp() * (-(-2.0 * x1).exp_m1()) / (-(-2.0 * x2).exp_m1())
}

/// `1 - exp(-x)` for `x >= 0`.
fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Modulus `sinh(x1)/sinh(x2)`, `0 < x1 < x2`, with its complement formed
/// from `sinh(x2+x1) sinh(x2-x1) / sinh^2(x2)`.
pub(crate) fn sinh_ratio_modulus(x1: f64, x2: f64) -> Result<EllipticModulus> {
    let num = one_minus_exp_neg(2.0 * (x2 + x1)) * one_minus_exp_neg(2.0 * (x2 - x1));
    let kp = num.sqrt() / one_minus_exp_neg(2.0 * x2);
    EllipticModulus::from_parts(sinh_ratio(x1, x2), kp)
}

/// Modulus `tanh(x1)/tanh(x2)`, `0 < x1 < x2`, complement from
/// `sinh(x2+x1) sinh(x2-x1) / (cosh^2(x1) sinh^2(x2))`.
pub(crate) fn tanh_ratio_modulus(x1: f64, x2: f64) -> Result<EllipticModulus> {
    let num = one_minus_exp_neg(2.0 * (x2 + x1)) * one_minus_exp_neg(2.0 * (x2 - x1));
    let kp =
        2.0 * (-x1).exp() * num.sqrt() / ((1.0 + (-2.0 * x1).exp()) * one_minus_exp_neg(2.0 * x2));
    EllipticModulus::from_parts(x1.tanh() / x2.tanh(), kp)
}

/// The three moduli of the single-line mapping: free-space, top-gap, substrate.
pub fn line_moduli(cs: &CrossSection) -> Result<[EllipticModulus; 3]> {
    let (w, g, s) = (cs.w, cs.g, cs.w + 2.0 * cs.g);
    let k1 = EllipticModulus::from_parts(w / s, 2.0 * (g * (w + g)).sqrt() / s)?;
    let k2 = tanh_ratio_modulus(PI * w / (4.0 * cs.hs), PI * s / (4.0 * cs.hs))?;
    let k3 = sinh_ratio_modulus(PI * w / (4.0 * cs.hb), PI * s / (4.0 * cs.hb))?;
    Ok([k1, k2, k3])
}

/// Line parameters from the two-region partial-capacitance decomposition.
pub fn line_params(cs: &CrossSection) -> Result<TLineParams> {
    cs.validate()?;
    let [r1, r2, r3] = line_moduli(cs)?.map(|m| m.k_ratio());
    let (r1, r2, r3) = (r1?, r2?, r3?);
    let eps_eff = 1.0 + (cs.eps_r - 1.0) * r3 / (r1 + r2);
    // Air capacitance: both half-planes, 2 eps0 K/K' each.
    let c_air = 2.0 * EPS0 * (r1 + r2);
    let c_l = c_air * eps_eff;
    let z0 = 1.0 / (C0 * c_air * eps_eff.sqrt());
    let l_lg = 1.0 / (C0 * C0 * c_air);
    Ok(TLineParams {
        eps_eff,
        z0,
        c_l,
        l_lg,
        l_lk: cs.lk_ratio * l_lg,
    })
}

/// Fundamental frequency of a shorted quarter-wave line of length `l_eff`.
pub fn quarter_wave_frequency(params: &TLineParams, l_eff: f64) -> Result<f64> {
    if !(l_eff > 0.0) {
        return Err(Error::Domain(format!(
            "effective length must be positive, got {l_eff}"
        )));
    }
    Ok(1.0 / (4.0 * l_eff * ((params.l_lk + params.l_lg) * params.c_l).sqrt()))
}

/// Extra length equivalent to a lumped capacitance at the open end.
pub fn length_extension(c_p: f64, c_l: f64) -> Result<f64> {
    if !(c_p >= 0.0 && c_l > 0.0) {
        return Err(Error::Domain(format!(
            "need c_p >= 0 and c_l > 0, got {c_p}, {c_l}"
        )));
    }
    Ok(c_p / c_l)
}

/// Normalised self coupling `2 (f_bare - f0) / (fbw f0)`.
pub fn self_coupling(f_bare: f64, f0: f64, fbw: f64) -> Result<f64> {
    if !(f0 > 0.0 && fbw > 0.0) {
        return Err(Error::Domain(format!("need f0, fbw > 0, got {f0}, {fbw}")));
    }
    Ok(2.0 * (f_bare - f0) / (fbw * f0))
}
