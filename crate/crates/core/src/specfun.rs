//! Elliptic special functions used by the conformal-mapping formulas.
//!
//! Complete integrals are evaluated with the arithmetic-geometric mean, the
//! incomplete integral of the first kind with Carlson's symmetric form
//! `R_F`. A modulus is carried together with its complement so that values
//! close to `k = 1` (where `k' = sqrt(1 - k^2)` would cancel) stay accurate.

use std::f64::consts::FRAC_PI_2;
#[cfg(test)]
use std::f64::consts::PI;

use roots::{find_root_brent, Convergency};

use crate::{Error, Result};

/// Lower/upper bracket offset used when inverting `K/K'`.
const RATIO_BRACKET_EPS: f64 = 1e-12;

/// Elliptic modulus `k` paired with its complement `k'`.
///
/// Invariant: `0 <= k <= 1`, `0 <= k' <= 1` and `k^2 + k'^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    k: f64,
    kp: f64,
}

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&k) {
            return Err(Error::Domain(format!("modulus k = {k} outside [0, 1]")));
        }
        Ok(Self {
            k,
            kp: ((1.0 - k) * (1.0 + k)).sqrt(),
        })
    }

    /// Build from the complementary modulus, keeping full precision in `k'`.
    pub fn from_complement(kp: f64) -> Result<Self> {
        Ok(Self::new(kp)?.complement())
    }

    /// Pair `(k, k')` computed independently by the caller. The pair is
    /// renormalised so that `k^2 + k'^2 = 1` holds to rounding.
    pub fn from_parts(k: f64, kp: f64) -> Result<Self> {
        if !(k >= 0.0 && kp >= 0.0) || k.hypot(kp) == 0.0 {
            return Err(Error::Domain(format!("invalid modulus pair ({k}, {kp})")));
        }
        let norm = k.hypot(kp);
        Ok(Self {
            k: k / norm,
            kp: kp / norm,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kp(&self) -> f64 {
        self.kp
    }

    pub fn complement(&self) -> Self {
        Self {
            k: self.kp,
            kp: self.k,
        }
    }

    /// `K(k)`.
    pub fn complete(&self) -> Result<f64> {
        if self.kp == 0.0 {
            return Err(Error::Domain("K(k) diverges at k = 1".into()));
        }
        Ok(FRAC_PI_2 / agm(1.0, self.kp))
    }

    /// `K'(k) = K(k')`.
    pub fn complete_comp(&self) -> Result<f64> {
        self.complement().complete()
    }

    /// `K(k) / K'(k)`, evaluated as `AGM(1, k) / AGM(1, k')`.
    pub fn k_ratio(&self) -> Result<f64> {
        if self.k == 0.0 || self.kp == 0.0 {
            return Err(Error::Domain(format!(
                "K/K' is degenerate at k = {}",
                self.k
            )));
        }
        Ok(agm(1.0, self.k) / agm(1.0, self.kp))
    }

    /// `F(phi, k)` from `sin(phi)` and `cos(phi)` given separately, which keeps
    /// precision when `phi` is close to `pi/2`. Both must be non-negative.
    pub fn incomplete_sin_cos(&self, s: f64, c: f64) -> Result<f64> {
        if !(s >= 0.0 && c >= 0.0) || ((s * s + c * c) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("invalid amplitude pair ({s}, {c})")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let delta2 = c * c + self.kp * self.kp * s * s;
        if delta2 == 0.0 {
            return Err(Error::Domain("F(pi/2, 1) diverges".into()));
        }
        Ok(s * carlson_rf(c * c, delta2, 1.0))
    }

    /// Incomplete integral `F(phi, k)` for `0 <= phi <= pi/2`.
    pub fn incomplete(&self, phi: f64) -> Result<f64> {
        if !(0.0..=FRAC_PI_2 + 1e-15).contains(&phi) {
            return Err(Error::Domain(format!("amplitude {phi} outside [0, pi/2]")));
        }
        // 1 - k^2 sin^2 = cos^2 + k'^2 sin^2, free of cancellation near k = 1.
        let (s, c) = phi.min(FRAC_PI_2).sin_cos();
        self.incomplete_sin_cos(s, c.max(0.0))
    }
}

/// Arithmetic-geometric mean of two non-negative numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() <= 1e-16 * an {
            return 0.5 * (an + bn);
        }
        a = an;
        b = bn;
    }
    0.5 * (a + b)
}

/// Carlson's symmetric elliptic integral of the first kind `R_F(x, y, z)`.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    let mut mean = (x + y + z) / 3.0;
    // Tolerance from Carlson (1995): error ~ tol^6 / 4.
    let tol = 1e-3;
    let scale = (mean - x).abs().max((mean - y).abs()).max((mean - z).abs()) / tol;
    let mut q = scale;
    while q.abs() >= mean.abs() {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * sy + sx * sz + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        mean = 0.25 * (mean + lambda);
        q *= 0.25;
    }
    let dx = 1.0 - x / mean;
    let dy = 1.0 - y / mean;
    let dz = -(dx + dy);
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0) / mean.sqrt()
}

/// Complete elliptic integral of the first kind `K(k)`, `0 <= k < 1`.
pub fn ellipk(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("K(k) requires 0 <= k < 1, got {k}")));
    }
    EllipticModulus::new(k)?.complete()
}

/// `K'(k) = K(sqrt(1 - k^2))`, `0 < k <= 1`.
pub fn ellipk_comp(k: f64) -> Result<f64> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::Domain(format!("K'(k) requires 0 < k <= 1, got {k}")));
    }
    Ok(FRAC_PI_2 / agm(1.0, k))
}

/// Incomplete elliptic integral of the first kind `F(phi, k)`.
pub fn ellipf(phi: f64, k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!(
            "F(phi, k) requires 0 <= k < 1, got {k}"
        )));
    }
    EllipticModulus::new(k)?.incomplete(phi)
}

/// Solve `K(k) / K'(k) = r` for the modulus.
///
/// The root is bracketed in whichever of `k`, `k'` is the smaller one, so the
/// returned pair keeps full relative precision on both sides of `r = 1`.
pub fn invert_k_ratio(r: f64) -> Result<EllipticModulus> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "K/K' ratio must be positive, got {r}"
        )));
    }
    if r == 1.0 {
        return EllipticModulus::from_parts(1.0, 1.0);
    }
    // For r > 1 solve K(k')/K'(k') = 1/r for the small complementary modulus.
    let (target, flip) = if r < 1.0 { (r, false) } else { (1.0 / r, true) };
    // Search in ln k so that small moduli keep relative precision.
    let f = |u: f64| {
        let k = u.exp();
        agm(1.0, k) / agm(1.0, ((1.0 - k) * (1.0 + k)).sqrt()) - target
    };
    let lo = RATIO_BRACKET_EPS.ln();
    let hi = std::f64::consts::FRAC_1_SQRT_2.ln();
    let u = solve_bracketed(f, lo, hi, 1e-15, &format!("K(k)/K'(k) = {r}"))?;
    let m = EllipticModulus::new(u.exp().min(std::f64::consts::FRAC_1_SQRT_2))?;
    Ok(if flip { m.complement() } else { m })
}

/// Stopping rule: interval width relative to the abscissa, or an exact zero.
struct RelativeConvergency {
    xtol: f64,
    iter_limit: usize,
}

impl Convergency<f64> for RelativeConvergency {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }
    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        let scale = x1.abs().max(x2.abs()).max(f64::MIN_POSITIVE);
        (x1 - x2).abs() <= self.xtol * scale || (x1 - x2).abs() <= 4.0 * f64::EPSILON * scale
    }
    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.iter_limit
    }
}

/// Brent root of `f` on `[lo, hi]`, after checking that the residual changes
/// sign across the bracket. `relation` names the equation in error messages.
pub fn solve_bracketed<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
    relation: &str,
) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::NoRoot {
            relation: format!("{relation}: residual does not change sign on [{lo}, {hi}]"),
        });
    }
    let mut conv = RelativeConvergency {
        xtol,
        iter_limit: 400,
    };
    find_root_brent(lo, hi, f, &mut conv).map_err(|e| Error::NoRoot {
        relation: format!("{relation}: {e}"),
    })
}

/// `E(k)`, used only to check Legendre's relation.
#[cfg(test)]
pub(crate) fn ellipe(k: f64) -> f64 {
    // E(k) via the AGM with the running sum of c_n^2.
    let mut a = 1.0;
    let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
    let mut sum = 0.5 * k * k;
    let mut pow = 0.5;
    for _ in 0..64 {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
        if c.abs() < 1e-17 {
            break;
        }
    }
    PI / (2.0 * a) * (1.0 - sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Adaptive Simpson quadrature of `1/sqrt(1 - k^2 sin^2 t)`; independent of
    /// the AGM and Carlson paths.
    fn quad_f(phi: f64, k: f64) -> f64 {
        fn simpson(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let f = |t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt();
        let (fa, fm, fb) = (f(0.0), f(phi / 2.0), f(phi));
        let whole = phi / 6.0 * (fa + 4.0 * fm + fb);
        simpson(&f, 0.0, phi, fa, fm, fb, whole, 1e-14, 40)
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn complete_integral_reference_points() {
        assert!((ellipk(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        // Reference values from 30-digit evaluation.
        assert!(
            rel(
                ellipk(std::f64::consts::FRAC_1_SQRT_2).unwrap(),
                1.854_074_677_301_371_9
            ) < 1e-13
        );
        let near_one = ellipk(0.999999).unwrap();
        assert!(near_one > 7.0);
        // The double nearest 0.999999 shifts k' by ~1e-11 relative.
        assert!(rel(near_one, 7.947_479_773_562_344_8) < 1e-10);
        let quad = quad_f(FRAC_PI_2, 0.3);
        assert!(rel(ellipk(0.3).unwrap(), quad) < 1e-12);
    }

    #[test]
    fn complete_integral_domain() {
        assert!(matches!(ellipk(1.0), Err(Error::Domain(_))));
        assert!(matches!(ellipk(-0.1), Err(Error::Domain(_))));
        assert!(matches!(ellipk_comp(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn complementary_integral() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(rel(ellipk_comp(s).unwrap(), ellipk(s).unwrap()) < 1e-15);
        assert!(rel(ellipk_comp(0.6).unwrap(), ellipk(0.8).unwrap()) < 1e-14);
        let prod = ellipk(0.3).unwrap() * ellipk_comp(0.3).unwrap();
        assert!(rel(prod, 4.225_587_280_148_434_3) < 1e-12);
        assert!(rel(ellipk_comp(1.0).unwrap(), FRAC_PI_2) < 1e-15);
    }

    #[test]
    fn incomplete_integral() {
        assert!(rel(ellipf(FRAC_PI_2, 0.5).unwrap(), ellipk(0.5).unwrap()) < 1e-14);
        assert_eq!(ellipf(0.0, 0.7).unwrap(), 0.0);
        let quad = quad_f(std::f64::consts::FRAC_PI_4, 0.9);
        let f = ellipf(std::f64::consts::FRAC_PI_4, 0.9).unwrap();
        assert!((f - quad).abs() < 1e-10);
        assert!(rel(f, 0.857_940_197_885_510_98) < 1e-12);
        assert!(ellipf(1.7, 0.5).is_err());
        assert!(ellipf(0.5, 1.0).is_err());
    }

    #[test]
    fn ratio_inversion_reference_points() {
        let m = invert_k_ratio(1.0).unwrap();
        assert!((m.k() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let r = EllipticModulus::new(0.3).unwrap().k_ratio().unwrap();
        assert!((invert_k_ratio(r).unwrap().k() - 0.3).abs() < 1e-10);
        // K/K' = 2 has k' = 3 - 2 sqrt(2) exactly; bisection oracle below.
        let m = invert_k_ratio(2.0).unwrap();
        assert!((m.kp() - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-13);
        assert!((m.k() - 0.985_171_431_009_416_04).abs() < 1e-13);
        let (mut lo, mut hi) = (0.5, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = quad_f(FRAC_PI_2, mid) / quad_f(FRAC_PI_2, (1.0 - mid * mid).sqrt());
            if r < 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((m.k() - lo).abs() < 1e-10);
        assert!(invert_k_ratio(0.0).is_err());
        assert!(invert_k_ratio(-1.0).is_err());
    }

    #[test]
    fn legendre_relation() {
        for &k in &[0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let kp = (1.0f64 - k * k).sqrt();
            let (kk, kkp) = (ellipk(k).unwrap(), ellipk_comp(k).unwrap());
            let lhs = ellipe(k) * kkp + ellipe(kp) * kk - kk * kkp;
            assert!((lhs - FRAC_PI_2).abs() < 1e-10, "k = {k}: {lhs}");
        }
    }

    #[test]
    fn ratio_round_trip_hundred_moduli() {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..100 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let k = 0.01 + 0.98 * (state >> 11) as f64 / (1u64 << 53) as f64;
            let r = EllipticModulus::new(k).unwrap().k_ratio().unwrap();
            let back = invert_k_ratio(r).unwrap();
            assert!((back.k() - k).abs() < 1e-9, "k = {k}");
            let r_back = back.k_ratio().unwrap();
            assert!((r_back - r).abs() <= 1e-10 * r);
        }
    }

    #[test]
    fn modulus_pair_stays_normalised() {
        let m = EllipticModulus::from_complement(1e-9).unwrap();
        assert!((m.k() * m.k() + m.kp() * m.kp() - 1.0).abs() < 1e-15);
        assert_eq!(m.kp(), 1e-9);
        assert!(m.complete().unwrap() > 20.0);
    }

    proptest! {
        #[test]
        fn k_increasing_kp_decreasing(a in 0.001f64..0.998, step in 1e-4f64..1e-3) {
            let b = a + step;
            prop_assert!(ellipk(b).unwrap() > ellipk(a).unwrap());
            prop_assert!(ellipk_comp(b).unwrap() < ellipk_comp(a).unwrap());
        }

        #[test]
        fn inversion_monotone(r in 0.1f64..8.0, dr in 1e-3f64..0.5) {
            let a = invert_k_ratio(r).unwrap();
            let b = invert_k_ratio(r + dr).unwrap();
            prop_assert!(b.k() > a.k() || (b.k() == a.k() && b.kp() < a.kp()));
        }
    }
}
