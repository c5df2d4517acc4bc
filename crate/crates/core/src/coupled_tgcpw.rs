//! Edge-coupled pair of top-grounded CPW lines, even and odd modes.
//!
//! The half cross-section (symmetry plane at `x = 0`) is split into three
//! regions, each mapped conformally:
//!
//! 1. the air cavity between the strips and the top ground,
//! 2. the air half-space below the metal plane, with no dielectric,
//! 3. the substrate, entering with weight `eps_r - 1`.
//!
//! For the even mode the symmetry plane is a magnetic wall, for the odd mode
//! an electric wall. The odd-mode substrate term reduces to a slotted
//! parallel-plate capacitor whose value is [`slot_capacitor_cp`].

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::specfun::{invert_k_ratio, solve_bracketed, EllipticModulus};
use crate::tgcpw::CrossSection;
use crate::units::{C0, EPS0};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledCrossSection {
    pub w: f64,
    pub g: f64,
    /// Edge-to-edge spacing between the two inner strips.
    pub d: f64,
    pub hs: f64,
    pub hb: f64,
    pub eps_r: f64,
}

impl CoupledCrossSection {
    pub fn from_line(cs: &CrossSection, d: f64) -> Self {
        Self {
            w: cs.w,
            g: cs.g,
            d,
            hs: cs.hs,
            hb: cs.hb,
            eps_r: cs.eps_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w", self.w),
            ("g", self.g),
            ("d", self.d),
            ("hs", self.hs),
            ("hb", self.hb),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eps_r >= 1.0) {
            return Err(Error::Domain(format!(
                "eps_r must be >= 1, got {}",
                self.eps_r
            )));
        }
        Ok(())
    }

    /// Edge coordinates `(z_a, z_b, z_c)` measured from the symmetry plane.
    pub fn edges(&self) -> (f64, f64, f64) {
        let za = self.d / 2.0;
        (za, za + self.w, za + self.w + self.g)
    }
}

/// Partial capacitances per unit length (F/m) of one line of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialCapacitances {
    pub c_a_e1: f64,
    pub c_a_o1: f64,
    pub c_a_e2: f64,
    pub c_a_o2: f64,
    pub c_d_e: f64,
    pub c_d_o: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvenOddParams {
    pub z0_even: f64,
    pub z0_odd: f64,
    pub eps_even: f64,
    pub eps_odd: f64,
    pub c_even_total: f64,
    pub c_odd_total: f64,
    pub c_even_air: f64,
    pub c_odd_air: f64,
}

/// Solved moduli of the slotted parallel-plate system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotCapacitor {
    pub k1: EllipticModulus,
    pub k2: EllipticModulus,
    pub k3: EllipticModulus,
    pub k4: EllipticModulus,
    /// `K(k1)/K'(k1) + K(k3)/K'(k3)`.
    pub value: f64,
}

/// `1 - exp(-x)`.
fn om(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// `(1 - exp(-2(c+b))) (1 - exp(-2(c-b)))`, i.e. `4 e^{-2c} sinh(c+b) sinh(c-b)`.
fn split(c: f64, b: f64) -> f64 {
    om(2.0 * (c + b)) * om(2.0 * (c - b))
}

/// Given `1 - P` and `1 + P`, return `(P, sqrt(1 - P^2))` with the smaller of
/// the two used for `P` itself.
fn p_pair(one_minus: f64, one_plus: f64) -> (f64, f64) {
    let p = if one_minus < one_plus {
        1.0 - one_minus
    } else {
        one_plus - 1.0
    };
    (p, (one_minus * one_plus).sqrt())
}

/// Modulus of the air-cavity map for the two symmetry conditions.
fn cavity_modulus(za: f64, zb: f64, zc: f64, hs: f64, odd: bool) -> Result<EllipticModulus> {
    let s = PI / (2.0 * hs);
    let (a, b, c) = (za * s, zb * s, zc * s);
    let pair = |x: f64| {
        if odd {
            // P = 2 sinh^2 x / sinh^2 c - 1
            let r = (x - c).exp() * om(2.0 * x) / om(2.0 * c);
            p_pair(2.0 * split(c, x) / om(2.0 * c).powi(2), 2.0 * r * r)
        } else {
            // P = 2 cosh^2 x / cosh^2 c - 1
            let e = 1.0 + (-2.0 * c).exp();
            let r = (x - c).exp() * (1.0 + (-2.0 * x).exp()) / e;
            p_pair(2.0 * split(c, x) / (e * e), 2.0 * r * r)
        }
    };
    let (pb, sb) = pair(b);
    let (pa, sa) = pair(a);
    let k = (sa - sb) / (pa * sb + pb * sa);
    if !(0.0..=1.0 + 1e-14).contains(&k) {
        return Err(Error::Inconsistent(format!(
            "cavity modulus {k} outside [0, 1] (odd = {odd})"
        )));
    }
    EllipticModulus::new(k.min(1.0))
}

/// Substrate-region quantities after the `sinh(pi z / 2 hb)` map.
struct SubstrateMap {
    ke3: EllipticModulus,
    ko3: EllipticModulus,
    /// `(sin, cos)` of the two amplitudes bounding the slot.
    amp1: (f64, f64),
    amp2: (f64, f64),
}

fn substrate_map(za: f64, zb: f64, zc: f64, hb: f64) -> Result<SubstrateMap> {
    let s = PI / (2.0 * hb);
    let (a, b, c) = (za * s, zb * s, zc * s);
    let ratio = |x: f64| (x - c).exp() * om(2.0 * x) / om(2.0 * c);
    let ra = ratio(a);
    let den = om(2.0 * c).powi(2);
    // 1 - rho_x^2 and rho_b^2 - rho_a^2 without subtraction.
    let one_m_a = split(c, a) / den;
    let one_m_b = split(c, b) / den;
    let diff_ba = (2.0 * (b - c)).exp() * split(b, a) / den;
    let ke3 = EllipticModulus::from_parts(diff_ba.sqrt(), one_m_b.sqrt())?;
    let ko3 = EllipticModulus::from_parts(diff_ba.sqrt(), ra * one_m_b.sqrt())?;
    // sin^2 of amplitude 1: (1 - rho_a^2) / cosh^2 a; cos^2: (sinh^2 a + rho_a^2) / cosh^2 a.
    let (sh, ch) = (a.sinh(), a.cosh());
    let amp1 = normalise(one_m_a.sqrt() / ch, (sh * sh + ra * ra).sqrt() / ch);
    let amp2 = normalise(one_m_a.sqrt(), ra);
    Ok(SubstrateMap {
        ke3,
        ko3,
        amp1,
        amp2,
    })
}

fn normalise(s: f64, c: f64) -> (f64, f64) {
    let n = s.hypot(c);
    (s / n, c / n)
}

fn slot_arguments(sub: &SubstrateMap) -> Result<(f64, f64, f64)> {
    let kk = sub.ko3.complete()?;
    let w1 = sub.ko3.incomplete_sin_cos(sub.amp1.0, sub.amp1.1)?;
    let w2 = sub.ko3.incomplete_sin_cos(sub.amp2.0, sub.amp2.1)?;
    Ok((sub.ko3.k_ratio()?, w1 / kk, w2 / kk))
}

/// `(alpha, beta, gamma)` of the slotted parallel-plate problem behind the
/// odd-mode substrate capacitance: plate aspect `W/H` and the slot edges as
/// fractions of `W`.
pub fn odd_slot_arguments(ccs: &CoupledCrossSection) -> Result<(f64, f64, f64)> {
    ccs.validate()?;
    let (za, zb, zc) = ccs.edges();
    slot_arguments(&substrate_map(za, zb, zc, ccs.hb)?)
}

/// Six partial capacitances per unit length of one line in the pair.
pub fn partial_capacitances(ccs: &CoupledCrossSection) -> Result<PartialCapacitances> {
    ccs.validate()?;
    let (za, zb, zc) = ccs.edges();

    let ke = cavity_modulus(za, zb, zc, ccs.hs, false)?;
    let ko = cavity_modulus(za, zb, zc, ccs.hs, true)?;
    let c_a_e1 = 2.0 * EPS0 * ke.k_ratio()?;
    let c_a_o1 = 2.0 * EPS0 * ko.k_ratio()?;

    let (a2, b2, c2) = (za * za, zb * zb, zc * zc);
    let ke2 = EllipticModulus::from_parts((b2 - a2).sqrt(), (c2 - b2).sqrt())?;
    let ko2 = EllipticModulus::from_parts((c2 * (b2 - a2)).sqrt(), (a2 * (c2 - b2)).sqrt())?;
    let c_a_e2 = EPS0 * ke2.k_ratio()?;
    let c_a_o2 = EPS0 * ko2.k_ratio()?;

    let sub = substrate_map(za, zb, zc, ccs.hb)?;
    let weight = EPS0 * (ccs.eps_r - 1.0);
    let (c_d_e, c_d_o) = if weight == 0.0 {
        (0.0, 0.0)
    } else {
        let (alpha, beta, gamma) = slot_arguments(&sub)?;
        let slot = slot_capacitor_cp(alpha, beta, gamma)?;
        (weight * sub.ke3.k_ratio()?, weight * slot.value)
    };

    Ok(PartialCapacitances {
        c_a_e1,
        c_a_o1,
        c_a_e2,
        c_a_o2,
        c_d_e,
        c_d_o,
    })
}

/// Amplitude `phi` with `F(phi, k) / K(k) = t`, `0 <= t <= 1`.
fn amplitude_for_fraction(m: &EllipticModulus, t: f64, relation: &str) -> Result<f64> {
    if t >= 1.0 {
        return Ok(FRAC_PI_2);
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let kk = m.complete()?;
    solve_bracketed(
        |phi| {
            let (s, c) = phi.sin_cos();
            m.incomplete_sin_cos(s, c.max(0.0)).unwrap_or(f64::NAN) / kk - t
        },
        0.0,
        FRAC_PI_2,
        1e-15,
        relation,
    )
}

/// `k_inner = k_outer sin(phi)` with its complement formed directly.
fn shrink(outer: &EllipticModulus, phi: f64) -> Result<EllipticModulus> {
    let (s, c) = phi.sin_cos();
    let k = outer.k() * s;
    let kp = (outer.kp().powi(2) + (outer.k() * c).powi(2)).sqrt();
    EllipticModulus::from_parts(k, kp)
}

/// Normalised capacitance of the slotted parallel-plate system.
///
/// With `delta = (beta + gamma)/2`, the four moduli satisfy
/// `K/K'(k4) = alpha (1 - delta)`, `K/K'(k2) = alpha delta`,
/// `F(asin(k3/k4), k4)/K(k4) = (1 - gamma)/(1 - delta)` and
/// `F(asin(k1/k2), k2)/K(k2) = beta/delta`.
pub fn slot_capacitor_cp(alpha: f64, beta: f64, gamma: f64) -> Result<SlotCapacitor> {
    if !(alpha > 0.0) || !(0.0..=1.0).contains(&beta) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "slot capacitor needs alpha > 0 and beta, gamma in [0, 1]; got ({alpha}, {beta}, {gamma})"
        )));
    }
    let delta = 0.5 * (beta + gamma);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, 1)")));
    }
    let k4 = invert_k_ratio(alpha * (1.0 - delta))?;
    let k2 = invert_k_ratio(alpha * delta)?;
    let t3 = (1.0 - gamma) / (1.0 - delta);
    let t1 = beta / delta;
    let phi3 = amplitude_for_fraction(&k4, t3, "F(asin(k3/k4), k4)/K(k4) = (1-gamma)/(1-delta)")?;
    let phi1 = amplitude_for_fraction(&k2, t1, "F(asin(k1/k2), k2)/K(k2) = beta/delta")?;
    let k3 = shrink(&k4, phi3)?;
    let k1 = shrink(&k2, phi1)?;
    let value = k1.k_ratio()? + k3.k_ratio()?;
    Ok(SlotCapacitor {
        k1,
        k2,
        k3,
        k4,
        value,
    })
}

/// Even- and odd-mode impedances and permittivities.
pub fn even_odd_params(ccs: &CoupledCrossSection) -> Result<EvenOddParams> {
    let p = partial_capacitances(ccs)?;
    let c_even_air = p.c_a_e1 + p.c_a_e2;
    let c_odd_air = p.c_a_o1 + p.c_a_o2;
    let c_even_total = c_even_air + p.c_d_e;
    let c_odd_total = c_odd_air + p.c_d_o;
    let eps_even = c_even_total / c_even_air;
    let eps_odd = c_odd_total / c_odd_air;
    Ok(EvenOddParams {
        z0_even: 1.0 / (C0 * c_even_air * eps_even.sqrt()),
        z0_odd: 1.0 / (C0 * c_odd_air * eps_odd.sqrt()),
        eps_even,
        eps_odd,
        c_even_total,
        c_odd_total,
        c_even_air,
        c_odd_air,
    })
}

/// `|z_calc - z_ref| / z_ref`.
pub fn relative_error(z_calc: f64, z_ref: f64) -> Result<f64> {
    if !(z_ref > 0.0) {
        return Err(Error::Domain(format!(
            "reference impedance must be positive, got {z_ref}"
        )));
    }
    Ok((z_calc - z_ref).abs() / z_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(d_um: f64) -> CoupledCrossSection {
        CoupledCrossSection {
            w: 10e-6,
            g: 9e-6,
            d: d_um * 1e-6,
            hs: 10e-6,
            hb: 500e-6,
            eps_r: 11.45,
        }
    }

    #[test]
    fn reference_values() {
        // Independent double-precision evaluation of the same mapping.
        for (d, ze, zo) in [
            (1.0, 74.98, 25.34),
            (6.0, 69.59, 37.45),
            (10.0, 67.14, 41.78),
            (15.0, 65.32, 45.15),
        ] {
            let p = even_odd_params(&pair(d)).unwrap();
            assert!((p.z0_even - ze).abs() < 0.01, "d={d}: {}", p.z0_even);
            assert!((p.z0_odd - zo).abs() < 0.01, "d={d}: {}", p.z0_odd);
        }
    }

    #[test]
    fn partials_positive_and_odd_wall_larger() {
        let p = partial_capacitances(&pair(10.0)).unwrap();
        for v in [p.c_a_e1, p.c_a_o1, p.c_a_e2, p.c_a_o2, p.c_d_e, p.c_d_o] {
            assert!(v > 0.0);
        }
        assert!(p.c_a_o1 > p.c_a_e1);
        assert!(p.c_a_o2 > p.c_a_e2);
    }

    #[test]
    fn vacuum_substrate_has_no_dielectric_term() {
        let mut c = pair(10.0);
        c.eps_r = 1.0;
        let p = partial_capacitances(&c).unwrap();
        assert_eq!(p.c_d_e, 0.0);
        assert_eq!(p.c_d_o, 0.0);
        c.hs = 1.0;
        c.hb = 1.0;
        let e = even_odd_params(&c).unwrap();
        assert_eq!(e.eps_even, 1.0);
        assert_eq!(e.eps_odd, 1.0);
    }

    #[test]
    fn slot_capacitor_relations_hold() {
        let (alpha, beta, gamma) = (1.7, 0.35, 0.62);
        let s = slot_capacitor_cp(alpha, beta, gamma).unwrap();
        let delta = 0.5 * (beta + gamma);
        assert!((s.k4.k_ratio().unwrap() - alpha * (1.0 - delta)).abs() < 1e-9);
        assert!((s.k2.k_ratio().unwrap() - alpha * delta).abs() < 1e-9);
        let f3 = s.k4.incomplete((s.k3.k() / s.k4.k()).asin()).unwrap() / s.k4.complete().unwrap();
        let f1 = s.k2.incomplete((s.k1.k() / s.k2.k()).asin()).unwrap() / s.k2.complete().unwrap();
        assert!((f3 - (1.0 - gamma) / (1.0 - delta)).abs() < 1e-9);
        assert!((f1 - beta / delta).abs() < 1e-9);
    }

    #[test]
    fn symmetric_slot_collapses() {
        for (a, b) in [(0.8, 0.3), (2.5, 0.6), (1.0, 0.5)] {
            let s = slot_capacitor_cp(a, b, b).unwrap();
            assert!((s.value - a).abs() < 1e-10);
        }
        assert!(slot_capacitor_cp(-1.0, 0.2, 0.3).is_err());
        assert!(slot_capacitor_cp(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn even_above_odd_across_sweep() {
        let mut last_gap = f64::INFINITY;
        for i in 1..=15 {
            let p = even_odd_params(&pair(i as f64)).unwrap();
            let gap = p.z0_even - p.z0_odd;
            assert!(gap > 0.0);
            assert!(gap < last_gap);
            last_gap = gap;
            for e in [p.eps_even, p.eps_odd] {
                assert!((1.0..=11.45).contains(&e));
            }
            let ze = 1.0 / (C0 * p.c_even_air * p.eps_even.sqrt());
            assert!((ze / p.z0_even - 1.0).abs() < 1e-14);
        }
        let g1 = {
            let p = even_odd_params(&pair(1.0)).unwrap();
            p.z0_even - p.z0_odd
        };
        // Conformal result: 49.6 ohm at d = 1 um versus 20.2 ohm at d = 15 um.
        assert!(g1 > 2.4 * last_gap, "{g1} vs {last_gap}");
    }

    #[test]
    fn modes_merge_at_large_spacing() {
        let far = even_odd_params(&pair(5000.0)).unwrap();
        assert!((far.z0_even - far.z0_odd).abs() / far.z0_odd < 0.01);
    }

    #[test]
    fn relative_error_values() {
        assert_eq!(relative_error(50.0, 50.0).unwrap(), 0.0);
        assert!((relative_error(50.65, 50.0).unwrap() - 0.013).abs() < 1e-12);
        assert!(relative_error(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn odd_total_exceeds_even_total(d in 0.5e-6f64..100e-6, w in 2e-6f64..30e-6,
                                        g in 2e-6f64..30e-6, hs in 2e-6f64..50e-6) {
            let c = CoupledCrossSection { w, g, d, hs, hb: 500e-6, eps_r: 11.45 };
            let p = even_odd_params(&c).unwrap();
            prop_assert!(p.c_odd_total >= p.c_even_total);
            prop_assert!(p.z0_even > p.z0_odd);
        }

        #[test]
        fn scale_invariant(lambda in 0.1f64..10.0, d in 1e-6f64..20e-6) {
            let c = pair(d * 1e6);
            let s = CoupledCrossSection {
                w: c.w * lambda, g: c.g * lambda, d: c.d * lambda,
                hs: c.hs * lambda, hb: c.hb * lambda, eps_r: c.eps_r,
            };
            let (a, b) = (even_odd_params(&c).unwrap(), even_odd_params(&s).unwrap());
            prop_assert!((a.c_even_total / b.c_even_total - 1.0).abs() < 1e-9);
            prop_assert!((a.c_odd_total / b.c_odd_total - 1.0).abs() < 1e-9);
        }
    }
}
