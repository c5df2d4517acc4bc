//! Notch (hanger) resonator model and parameter extraction.
//!
//! The model is
//!
//! ```text
//! S21(f) = a e^{j alpha} e^{-j 2 pi f tau} [1 - (Q_l/Q_e) e^{j phi} / (1 + 2j Q_l (f/f_r - 1))]
//! ```
//!
//! Extraction is staged: cable delay, algebraic then geometric circle fit,
//! arctangent phase fit about the circle centre, then environment and
//! coupling terms from the off-resonant point and the normalised circle.
//! A joint least-squares refinement of all seven parameters follows by
//! default; the staged estimate alone is a few percent off at 40 dB SNR.
//!
//! Measured data that were shifted by a flat gain correction fit the same
//! way; the amplitude `a` absorbs the offset.

use std::f64::consts::PI;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cmatrix::ComplexSpectrum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchParams {
    pub f_r: f64,
    pub q_l: f64,
    pub q_e: f64,
    pub phi: f64,
    pub a: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl NotchParams {
    /// Ideal notch: unit amplitude, no phase, no delay, no mismatch.
    pub fn simple(f_r: f64, q_l: f64, q_e: f64) -> Self {
        Self {
            f_r,
            q_l,
            q_e,
            phi: 0.0,
            a: 1.0,
            alpha: 0.0,
            tau: 0.0,
        }
    }

    fn to_vec(self) -> [f64; 7] {
        [
            self.f_r, self.q_l, self.q_e, self.phi, self.a, self.alpha, self.tau,
        ]
    }

    fn from_slice(x: &[f64]) -> Self {
        Self {
            f_r: x[0],
            q_l: x[1],
            q_e: x[2],
            phi: x[3],
            a: x[4],
            alpha: x[5],
            tau: x[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotchFitResult {
    pub params: NotchParams,
    /// `None` when `1/Q_i` is zero within tolerance (lossless data).
    pub q_i: Option<f64>,
    /// RMS complex misfit over the window.
    pub residual: f64,
    pub window: (f64, f64),
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Joint seven-parameter refinement after the staged estimate (default on).
    pub refine: bool,
    /// Window width in estimated linewidths for automatic windows.
    pub window_linewidths: f64,
    /// Minimum dip depth below its lower neighbouring peak (dB).
    pub min_depth_db: f64,
    /// Minimum number of samples per linewidth.
    pub min_points_per_linewidth: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            refine: true,
            window_linewidths: 10.0,
            min_depth_db: 3.0,
            min_points_per_linewidth: 20.0,
        }
    }
}

/// Tolerance on `1/Q_i` below which the internal Q is reported as absent.
const INV_QI_TOL: f64 = 1e-7;

pub fn notch_eval(p: &NotchParams, f: f64) -> Complex64 {
    let env = Complex64::from_polar(p.a, p.alpha - 2.0 * PI * f * p.tau);
    let x = f / p.f_r - 1.0;
    let res = Complex64::from_polar(p.q_l / p.q_e, p.phi) / Complex64::new(1.0, 2.0 * p.q_l * x);
    env * (1.0 - res)
}

/// `1/Q_l - cos(phi)/Q_e`.
pub fn inverse_qi(p: &NotchParams) -> f64 {
    1.0 / p.q_l - p.phi.cos() / p.q_e
}

/// Internal Q, absent when the data are lossless within tolerance.
pub fn derive_qi(result: &NotchFitResult) -> Option<f64> {
    qi_from_params(&result.params).0
}

fn qi_from_params(p: &NotchParams) -> (Option<f64>, Option<String>) {
    let inv = inverse_qi(p);
    if inv.abs() < INV_QI_TOL {
        (None, None)
    } else if inv < 0.0 {
        (
            None,
            Some(format!(
                "negative 1/Q_i = {inv:.3e}: coupling exceeds total loss"
            )),
        )
    } else {
        (Some(1.0 / inv), None)
    }
}

// ---------------------------------------------------------------------------
// Least squares plumbing

struct Problem<F: Fn(&[f64]) -> Vec<f64>> {
    f: F,
    x0: Vec<f64>,
    scale: Vec<f64>,
    u: DVector<f64>,
}

impl<F: Fn(&[f64]) -> Vec<f64>> Problem<F> {
    fn point(&self, u: &DVector<f64>) -> Vec<f64> {
        (0..u.len())
            .map(|i| self.x0[i] + u[i] * self.scale[i])
            .collect()
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<F> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, u: &DVector<f64>) {
        self.u.copy_from(u);
    }

    fn params(&self) -> DVector<f64> {
        self.u.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = (self.f)(&self.point(&self.u));
        r.iter()
            .all(|v| v.is_finite())
            .then(|| DVector::from_vec(r))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let n = self.u.len();
        let h = 1e-6;
        let mut cols = Vec::with_capacity(n);
        for i in 0..n {
            let mut up = self.u.clone();
            let mut dn = self.u.clone();
            up[i] += h;
            dn[i] -= h;
            let (rp, rm) = ((self.f)(&self.point(&up)), (self.f)(&self.point(&dn)));
            cols.push(DVector::from_iterator(
                rp.len(),
                rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)),
            ));
        }
        let m = DMatrix::from_columns(&cols);
        m.iter().all(|v| v.is_finite()).then_some(m)
    }
}

/// Minimise `|res(x)|^2` from `x0`; `scale` sets the natural size of each
/// parameter. Returns the optimum and the final sum of squares.
fn least_squares<F: Fn(&[f64]) -> Vec<f64>>(
    res: F,
    x0: &[f64],
    scale: &[f64],
    what: &str,
) -> Result<(Vec<f64>, f64)> {
    let n = x0.len();
    let problem = Problem {
        f: res,
        x0: x0.to_vec(),
        scale: scale.to_vec(),
        u: DVector::zeros(n),
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_ftol(1e-15)
        .with_xtol(1e-15)
        .with_gtol(1e-15)
        .with_patience(400)
        .minimize(problem);
    if !report.termination.was_successful() && report.objective_function.is_nan() {
        return Err(Error::Fit(format!("{what}: {:?}", report.termination)));
    }
    let x = problem.point(&problem.u);
    let r = (problem.f)(&x);
    Ok((x, r.iter().map(|v| v * v).sum()))
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn unwrap_phase(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut acc = z[0].arg();
    out.push(acc);
    for w in z.windows(2) {
        acc += (w[1] / w[0]).arg();
        out.push(acc);
    }
    out
}

// ---------------------------------------------------------------------------
// Circle fitting

#[derive(Debug, Clone, Copy)]
struct Circle {
    center: Complex64,
    radius: f64,
}

/// Algebraic fit of `x^2 + y^2 + D x + E y + F = 0`.
fn circle_algebraic(z: &[Complex64]) -> Result<Circle> {
    let n = z.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => z[i].re,
        1 => z[i].im,
        _ => 1.0,
    });
    let b = DVector::from_iterator(n, z.iter().map(|p| -p.norm_sqr()));
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let sol = ata
        .cholesky()
        .ok_or_else(|| Error::Fit("circle fit degenerate (collinear points)".into()))?
        .solve(&atb);
    let center = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = center.norm_sqr() - sol[2];
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(Error::Fit(
            "circle fit degenerate (non-positive radius)".into(),
        ));
    }
    Ok(Circle {
        center,
        radius: r2.sqrt(),
    })
}

/// Geometric refinement: minimise distances of points to the circle.
fn circle_geometric(z: &[Complex64], init: Circle) -> Result<Circle> {
    let r0 = init.radius;
    let res = |x: &[f64]| -> Vec<f64> {
        let c = Complex64::new(x[0], x[1]);
        z.iter().map(|p| (p - c).norm() - x[2]).collect()
    };
    let (x, _) = least_squares(
        res,
        &[init.center.re, init.center.im, r0],
        &[r0, r0, r0],
        "circle fit",
    )?;
    if !(x[2] > 0.0) {
        return Err(Error::Fit("circle fit collapsed".into()));
    }
    Ok(Circle {
        center: Complex64::new(x[0], x[1]),
        radius: x[2],
    })
}

fn circle_fit(z: &[Complex64]) -> Result<(Circle, f64)> {
    let c = circle_geometric(z, circle_algebraic(z)?)?;
    let rms = (z
        .iter()
        .map(|p| ((p - c.center).norm() - c.radius).powi(2))
        .sum::<f64>()
        / z.len() as f64)
        .sqrt();
    Ok((c, rms / c.radius))
}

fn remove_delay(freqs: &[f64], z: &[Complex64], tau: f64) -> Vec<Complex64> {
    freqs
        .iter()
        .zip(z)
        .map(|(&f, &v)| v * Complex64::from_polar(1.0, 2.0 * PI * f * tau))
        .collect()
}

// ---------------------------------------------------------------------------
// Staged estimate

/// Linear phase slope of the outer 15 % of the window on each side.
fn edge_delay(freqs: &[f64], z: &[Complex64]) -> f64 {
    let n = freqs.len();
    let k = (n * 15 / 100).max(2);
    let ph = unwrap_phase(z);
    let idx: Vec<usize> = (0..k).chain(n - k..n).collect();
    let m = idx.len() as f64;
    let fm = idx.iter().map(|&i| freqs[i]).sum::<f64>() / m;
    let pm = idx.iter().map(|&i| ph[i]).sum::<f64>() / m;
    let sxy: f64 = idx.iter().map(|&i| (freqs[i] - fm) * (ph[i] - pm)).sum();
    let sxx: f64 = idx.iter().map(|&i| (freqs[i] - fm).powi(2)).sum();
    -sxy / sxx / (2.0 * PI)
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Delay minimising the circle-fit residual near the edge estimate.
fn refine_delay(freqs: &[f64], z: &[Complex64], tau0: f64) -> f64 {
    let span = freqs[freqs.len() - 1] - freqs[0];
    let half = 1.5 / (2.0 * PI * span);
    // Absolute residual: a relative one favours the large arc traced by the
    // off-resonant points under a wrong delay.
    let cost = |t: f64| {
        let zc = remove_delay(freqs, z, t);
        circle_algebraic(&zc)
            .map(|c| {
                zc.iter()
                    .map(|p| ((p - c.center).norm() - c.radius).powi(2))
                    .sum::<f64>()
            })
            .unwrap_or(f64::INFINITY)
    };
    let steps = 40;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| tau0 - half + 2.0 * half * i as f64 / steps as f64)
        .collect();
    let costs: Vec<f64> = grid.iter().map(|&t| cost(t)).collect();
    let best = (0..=steps)
        .min_by(|&i, &j| costs[i].total_cmp(&costs[j]))
        .unwrap_or(steps / 2);
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(steps)];
    golden(cost, lo, hi, 60)
}

/// Half-depth linewidth around index `i0` of `|s|`, with baseline `base`.
fn linewidth_at(freqs: &[f64], mag: &[f64], i0: usize, base: f64) -> Option<f64> {
    let level = ((base * base + mag[i0] * mag[i0]) / 2.0).sqrt();
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = i0;
        for i in range {
            if mag[i] >= level {
                let t = (level - mag[prev]) / (mag[i] - mag[prev]);
                return Some(freqs[prev] + t * (freqs[i] - freqs[prev]));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..i0).rev())?;
    let right = cross(&mut (i0 + 1..freqs.len()))?;
    Some(right - left)
}

fn staged(freqs: &[f64], z: &[Complex64], warnings: &mut Vec<String>) -> Result<NotchParams> {
    let n = freqs.len();
    let tau0 = edge_delay(freqs, z);
    let tau = refine_delay(freqs, z, tau0);
    let zc = remove_delay(freqs, z, tau);
    let (circle, _) = circle_fit(&zc)?;

    // Initial resonance: point farthest from the edge average (the
    // off-resonant region) on the circle.
    let far = (zc[0] + zc[n - 1]) / 2.0;
    let i0 = (0..n)
        .max_by(|&i, &j| (zc[i] - far).norm().total_cmp(&(zc[j] - far).norm()))
        .unwrap_or(n / 2);
    let mag: Vec<f64> = zc.iter().map(|v| (v - far).norm()).collect();
    // Distance from `far` is largest at resonance; mirror it into a dip.
    let peak = mag[i0];
    let inv: Vec<f64> = mag.iter().map(|m| peak - m).collect();
    let fr0 = freqs[i0];
    let lw = linewidth_from_peak(freqs, &inv, i0, peak).unwrap_or((freqs[n - 1] - freqs[0]) / 10.0);
    let ql0 = fr0 / lw;

    let theta: Vec<f64> = unwrap_phase(&zc.iter().map(|v| v - circle.center).collect::<Vec<_>>());
    let th0 = theta[i0];
    let res = |x: &[f64]| -> Vec<f64> {
        freqs
            .iter()
            .zip(&theta)
            .map(|(&f, &t)| wrap(t - (x[0] + 2.0 * (2.0 * x[1] * (1.0 - f / x[2])).atan())))
            .collect()
    };
    let (x, _) = least_squares(
        res,
        &[th0, ql0, fr0],
        &[1.0, ql0 / 4.0, lw / 4.0],
        "phase fit",
    )?;
    let (theta0, q_l, f_r) = (x[0], x[1], x[2]);
    if !(q_l > 0.0) {
        return Err(Error::Fit(format!("phase fit returned Q_l = {q_l}")));
    }
    if f_r < freqs[0] || f_r > freqs[n - 1] {
        warnings.push(format!("resonance {f_r:.6e} Hz outside the fit window"));
    }

    let off = circle.center + Complex64::from_polar(circle.radius, theta0 + PI);
    let (a, alpha) = (off.norm(), off.arg());
    let center_n = circle.center / off;
    let r_n = circle.radius / a;
    let phi = (1.0 - center_n).arg();
    let q_e = q_l / (2.0 * r_n);
    Ok(NotchParams {
        f_r,
        q_l,
        q_e,
        phi,
        a,
        alpha,
        tau,
    })
}

/// Width of a peak (not dip) of `v` at `i0`; helper for the staged init.
fn linewidth_from_peak(freqs: &[f64], v: &[f64], i0: usize, peak: f64) -> Option<f64> {
    // `v` is zero at i0 and rises to `peak` off resonance; reuse the dip rule
    // on a unit baseline. The amplitude-distance profile is Lorentzian in
    // |.|, so the half-power point of the dip sits at the 1 - 1/sqrt(2) level.
    let scaled: Vec<f64> = v.iter().map(|x| x / peak).collect();
    let level = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
    let mut left = None;
    for i in (0..i0).rev() {
        if scaled[i] >= level {
            let t = (level - scaled[i + 1]) / (scaled[i] - scaled[i + 1]);
            left = Some(freqs[i + 1] + t * (freqs[i] - freqs[i + 1]));
            break;
        }
    }
    let mut right = None;
    for i in i0 + 1..freqs.len() {
        if scaled[i] >= level {
            let t = (level - scaled[i - 1]) / (scaled[i] - scaled[i - 1]);
            right = Some(freqs[i - 1] + t * (freqs[i] - freqs[i - 1]));
            break;
        }
    }
    Some(right? - left?)
}

fn rms_misfit(freqs: &[f64], z: &[Complex64], p: &NotchParams) -> f64 {
    (freqs
        .iter()
        .zip(z)
        .map(|(&f, &v)| (notch_eval(p, f) - v).norm_sqr())
        .sum::<f64>()
        / freqs.len() as f64)
        .sqrt()
}

fn refine_all(freqs: &[f64], z: &[Complex64], p0: NotchParams) -> Result<NotchParams> {
    let span = freqs[freqs.len() - 1] - freqs[0];
    let lw = p0.f_r / p0.q_l;
    let scale = [
        lw / 10.0,
        p0.q_l / 10.0,
        p0.q_e / 10.0,
        0.1,
        p0.a / 10.0,
        0.1,
        0.1 / (2.0 * PI * span),
    ];
    let res = |x: &[f64]| -> Vec<f64> {
        let p = NotchParams::from_slice(x);
        let mut out = Vec::with_capacity(2 * freqs.len());
        for (&f, &v) in freqs.iter().zip(z) {
            let d = notch_eval(&p, f) - v;
            out.push(d.re);
            out.push(d.im);
        }
        out
    };
    let (x, _) = least_squares(res, &p0.to_vec(), &scale, "joint refinement")?;
    Ok(NotchParams::from_slice(&x))
}

/// Fit one resonance inside `window`.
pub fn fit_notch(
    spectrum: &ComplexSpectrum,
    window: (f64, f64),
    opts: &FitOptions,
) -> Result<NotchFitResult> {
    spectrum.validate()?;
    let w = spectrum.window(window.0, window.1);
    if w.len() < 10 {
        return Err(Error::Fit(format!(
            "window ({:.6e}, {:.6e}) holds {} points",
            window.0,
            window.1,
            w.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut p = staged(&w.freqs, &w.s21, &mut warnings)?;
    let df = (w.freqs[w.len() - 1] - w.freqs[0]) / (w.len() - 1) as f64;
    let per_lw = p.f_r / p.q_l / df;
    if per_lw < opts.min_points_per_linewidth {
        return Err(Error::Fit(format!(
            "only {per_lw:.1} points per linewidth (need {})",
            opts.min_points_per_linewidth
        )));
    }
    if opts.refine {
        p = refine_all(&w.freqs, &w.s21, p)?;
    }
    if p.q_e < 0.0 {
        p.q_e = -p.q_e;
        p.phi = wrap(p.phi + PI);
    }
    p.phi = wrap(p.phi);
    p.alpha = wrap(p.alpha);
    let (q_i, warn) = qi_from_params(&p);
    warnings.extend(warn);
    Ok(NotchFitResult {
        params: p,
        q_i,
        residual: rms_misfit(&w.freqs, &w.s21, &p),
        window,
        warnings,
    })
}

/// A detected dip and its window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub f: f64,
    pub depth: f64,
    pub linewidth: f64,
    pub window: (f64, f64),
}

/// Dips in |S21| deeper than `min_depth_db` below the lower of the two
/// bounding peaks, each with a window of
/// `window_linewidths` estimated linewidths clipped halfway to its neighbours.
pub fn find_dips(spectrum: &ComplexSpectrum, opts: &FitOptions) -> Vec<Dip> {
    let mag: Vec<f64> = spectrum.s21.iter().map(|v| v.norm()).collect();
    let n = mag.len();
    if n < 3 {
        return vec![];
    }
    let mut found: Vec<(usize, f64)> = Vec::new();
    for i in 1..n - 1 {
        if !(mag[i] < mag[i - 1] && mag[i] <= mag[i + 1]) {
            continue;
        }
        let mut left_peak = mag[i];
        let mut j = i;
        while j > 0 && mag[j - 1] >= mag[i] {
            j -= 1;
            left_peak = left_peak.max(mag[j]);
        }
        let mut right_peak = mag[i];
        let mut k = i;
        while k + 1 < n && mag[k + 1] >= mag[i] {
            k += 1;
            right_peak = right_peak.max(mag[k]);
        }
        let base = left_peak.min(right_peak);
        if base > 0.0 && 20.0 * (base / mag[i].max(f64::MIN_POSITIVE)).log10() >= opts.min_depth_db
        {
            found.push((i, base));
        }
    }
    let mut dips: Vec<Dip> = found
        .iter()
        .filter_map(|&(i, base)| {
            let lw = linewidth_at(&spectrum.freqs, &mag, i, base)?;
            let f = spectrum.freqs[i];
            let half = opts.window_linewidths * lw / 2.0;
            Some(Dip {
                f,
                depth: base - mag[i],
                linewidth: lw,
                window: (f - half, f + half),
            })
        })
        .collect();
    for k in 0..dips.len() {
        if k > 0 {
            let mid = 0.5 * (dips[k - 1].f + dips[k].f);
            dips[k].window.0 = dips[k].window.0.max(mid);
        }
        if k + 1 < dips.len() {
            let mid = 0.5 * (dips[k].f + dips[k + 1].f);
            dips[k].window.1 = dips[k].window.1.min(mid);
        }
    }
    dips
}

/// Detect and fit every dip.
pub fn fit_all(spectrum: &ComplexSpectrum, opts: &FitOptions) -> Result<Vec<NotchFitResult>> {
    find_dips(spectrum, opts)
        .iter()
        .map(|d| fit_notch(spectrum, d.window, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::linspace;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn synth(p: &NotchParams, lw_span: f64, n: usize) -> ComplexSpectrum {
        let lw = p.f_r / p.q_l;
        let f = linspace(p.f_r - lw_span / 2.0 * lw, p.f_r + lw_span / 2.0 * lw, n);
        let s: Vec<Complex64> = f.iter().map(|&x| notch_eval(p, x)).collect();
        ComplexSpectrum::new(f, s.clone(), s).unwrap()
    }

    fn full(p: &NotchParams) -> (f64, f64) {
        let lw = p.f_r / p.q_l;
        (p.f_r - 6.0 * lw, p.f_r + 6.0 * lw)
    }

    #[test]
    fn model_limits() {
        let p = NotchParams::simple(7.5e9, 1000.0, 2000.0);
        assert!((notch_eval(&p, 7.5e9).norm() - 0.5).abs() < 1e-15);
        assert!((notch_eval(&p, 7.5e9) - (1.0 - 0.5)).norm() < 1e-15);
        assert!((notch_eval(&p, 1e12) - 1.0).norm() < 1e-3);
        let mut q = p;
        q.q_e = 4000.0;
        assert!(notch_eval(&q, 7.5e9).norm() > notch_eval(&p, 7.5e9).norm());
    }

    #[test]
    fn internal_q() {
        let mut r = NotchFitResult {
            params: NotchParams::simple(7e9, 1000.0, 1000.0),
            q_i: None,
            residual: 0.0,
            window: (0.0, 1.0),
            warnings: vec![],
        };
        assert_eq!(derive_qi(&r), None);
        r.params = NotchParams::simple(7e9, 500.0, 1000.0);
        assert!((derive_qi(&r).unwrap() - 1000.0).abs() < 1e-9);
        r.params = NotchParams::simple(7e9, 1000.0, 500.0);
        assert_eq!(derive_qi(&r), None);
        assert!(qi_from_params(&r.params).1.is_some());
    }

    #[test]
    fn noiseless_simple_recovery() {
        let p = NotchParams::simple(7.5e9, 1000.0, 2000.0);
        let sp = synth(&p, 12.0, 2001);
        let r = fit_notch(&sp, full(&p), &FitOptions::default()).unwrap();
        assert!((r.params.f_r / p.f_r - 1.0).abs() < 1e-9);
        assert!((r.params.q_l / p.q_l - 1.0).abs() < 1e-6);
        assert!((r.params.q_e / p.q_e - 1.0).abs() < 1e-6);
        assert!(r.residual < 1e-8);
    }

    #[test]
    fn noisy_environment_recovery() {
        let p = NotchParams {
            f_r: 7.43e9,
            q_l: 800.0,
            q_e: 910.0,
            phi: 0.1,
            a: 0.9,
            alpha: 0.3,
            tau: 40e-9,
        };
        let mut sp = synth(&p, 12.0, 2001);
        let mut rng = StdRng::seed_from_u64(7);
        let nd = Normal::new(0.0, 0.01 * p.a / 2f64.sqrt()).unwrap();
        for v in sp.s21.iter_mut() {
            *v += Complex64::new(nd.sample(&mut rng), nd.sample(&mut rng));
        }
        for refine in [false, true] {
            let r = fit_notch(
                &sp,
                full(&p),
                &FitOptions {
                    refine,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(
                (r.params.f_r / p.f_r - 1.0).abs() < 10e-6,
                "{refine}: {:?}",
                r.params
            );
            assert!(
                (r.params.q_l / p.q_l - 1.0).abs() < 0.01,
                "{refine}: {:?}",
                r.params
            );
            assert!(
                (r.params.q_e / p.q_e - 1.0).abs() < 0.01,
                "{refine}: {:?}",
                r.params
            );
        }
    }

    #[test]
    fn refit_is_idempotent() {
        let p = NotchParams {
            f_r: 7.6e9,
            q_l: 1500.0,
            q_e: 2100.0,
            phi: -0.2,
            a: 0.7,
            alpha: -1.0,
            tau: 12e-9,
        };
        let sp = synth(&p, 12.0, 2001);
        let opts = FitOptions {
            refine: true,
            ..Default::default()
        };
        let r1 = fit_notch(&sp, full(&p), &opts).unwrap();
        let sp2 = synth(&r1.params, 12.0, 2001);
        let r2 = fit_notch(&sp2, full(&r1.params), &opts).unwrap();
        for (a, b) in r1.params.to_vec().iter().zip(r2.params.to_vec()) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-9));
        }
    }

    #[test]
    fn too_coarse_is_rejected() {
        let p = NotchParams::simple(7.5e9, 1000.0, 2000.0);
        let sp = synth(&p, 12.0, 60);
        assert!(matches!(
            fit_notch(&sp, full(&p), &FitOptions::default()),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn dip_detection_and_windows() {
        let a = NotchParams::simple(7.40e9, 900.0, 1000.0);
        let b = NotchParams::simple(7.42e9, 1200.0, 2000.0);
        let f = linspace(7.3e9, 7.5e9, 20001);
        let s: Vec<Complex64> = f
            .iter()
            .map(|&x| notch_eval(&a, x) * notch_eval(&b, x))
            .collect();
        let sp = ComplexSpectrum::new(f, s.clone(), s).unwrap();
        let dips = find_dips(&sp, &FitOptions::default());
        assert_eq!(dips.len(), 2);
        assert!((dips[0].f - 7.40e9).abs() < 1e6 && (dips[1].f - 7.42e9).abs() < 1e6);
        assert!(dips[0].window.1 <= 0.5 * (dips[0].f + dips[1].f) + 1.0);
        assert!((dips[0].linewidth / (7.40e9 / 900.0) - 1.0).abs() < 0.2);
    }

    #[test]
    fn lossless_matrix_spectrum_has_no_internal_loss() {
        use crate::cmatrix::{build_coupling_matrix, s_response, FilterSpec, ReadoutGroup};
        let spec = FilterSpec {
            f_l: 7.2e9,
            f_h: 8.2e9,
            self_couplings: [-0.0075, 0.0325, 0.0325, -0.0075],
            path: [0.6608, 0.4861, 0.6608],
            m_s: 0.93,
            m_l: 0.93,
            groups: vec![ReadoutGroup {
                host: 2,
                members: vec![(0.0, 0.02)],
            }],
        };
        let cm = build_coupling_matrix(&spec).unwrap();
        let f0 = spec.f0();
        let sp = s_response(&cm, &linspace(f0 - 20e6, f0 + 20e6, 4001)).unwrap();
        for refine in [false, true] {
            let r = fit_all(
                &sp,
                &FitOptions {
                    refine,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(r.len(), 1);
            assert!(inverse_qi(&r[0].params).abs() < 1e-7, "{:?}", r[0]);
            assert_eq!(r[0].q_i, None);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn scale_and_delay_equivariance(scale in 0.2f64..3.0, rot in -3.0f64..3.0, t0 in -30e-9f64..30e-9) {
            let p = NotchParams { f_r: 7.7e9, q_l: 1200.0, q_e: 1800.0, phi: 0.15, a: 1.0, alpha: 0.0, tau: 0.0 };
            let base = synth(&p, 12.0, 2001);
            let opts = FitOptions::default();
            let r0 = fit_notch(&base, full(&p), &opts).unwrap().params;
            let mut sp = base.clone();
            for (v, &f) in sp.s21.iter_mut().zip(&base.freqs) {
                *v *= Complex64::from_polar(scale, rot - 2.0 * PI * f * t0);
            }
            let r = fit_notch(&sp, full(&p), &opts).unwrap().params;
            prop_assert!((r.f_r / r0.f_r - 1.0).abs() < 1e-3);
            prop_assert!((r.q_l / r0.q_l - 1.0).abs() < 1e-3);
            prop_assert!((r.q_e / r0.q_e - 1.0).abs() < 1e-3);
            prop_assert!((r.phi - r0.phi).abs() < 1e-3);
            prop_assert!((r.a / (r0.a * scale) - 1.0).abs() < 1e-3);
            prop_assert!((r.tau - r0.tau - t0).abs() < 1e-12);
        }
    }
}
