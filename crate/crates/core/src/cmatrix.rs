//! Normalised coupling matrix of the filter with its readout groups, and
//! its two-port response.
//!
//! Rows are ordered source, filter resonators with each resonator followed
//! by the readout resonators it hosts, then load. For the four-pole filter
//! with groups on resonators 2 and 3 this is
//! `S, F1, F2, R1, R2, R3, F3, R4, R5, R6, F4, L`.
//!
//! The response uses `A = -m + Omega U - j q`. With this sign a positive
//! self coupling `m_ii` places resonator `i` above `f0`, matching
//! `m_ii = 2 (f_i - f0) / (FBW f0)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Readout resonators attached to one filter resonator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutGroup {
    /// 1-based filter resonator index (2 or 3).
    pub host: usize,
    /// `(m_self, m_coupling)` for each member.
    pub members: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub f_l: f64,
    pub f_h: f64,
    /// `[m11, m22, m33, m44]`.
    pub self_couplings: [f64; 4],
    /// `[m12, m23, m34]`.
    pub path: [f64; 3],
    pub m_s: f64,
    pub m_l: f64,
    pub groups: Vec<ReadoutGroup>,
}

impl FilterSpec {
    pub fn f0(&self) -> f64 {
        (self.f_l * self.f_h).sqrt()
    }

    pub fn fbw(&self) -> f64 {
        (self.f_h - self.f_l) / self.f0()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    /// Number of resonators (filter plus readout).
    pub n: usize,
    pub m: DMatrix<f64>,
    pub f0: f64,
    pub fbw: f64,
    /// Row names, e.g. `S`, `F1`, `R3`, `L`.
    pub labels: Vec<String>,
}

impl CouplingMatrix {
    /// Wrap an existing matrix; `m` must be symmetric with zero corner entries.
    pub fn from_matrix(m: DMatrix<f64>, f0: f64, fbw: f64) -> Result<Self> {
        let dim = m.nrows();
        if dim < 3 || m.ncols() != dim {
            return Err(Error::Domain(
                "coupling matrix must be square with n >= 1".into(),
            ));
        }
        if (&m - m.transpose()).abs().max() > 0.0 {
            return Err(Error::Domain("coupling matrix must be symmetric".into()));
        }
        if m[(0, 0)] != 0.0 || m[(dim - 1, dim - 1)] != 0.0 {
            return Err(Error::Domain("source/load self terms must be zero".into()));
        }
        if !(f0 > 0.0 && fbw > 0.0) {
            return Err(Error::Domain(format!("need f0, fbw > 0, got {f0}, {fbw}")));
        }
        let mut labels = vec!["S".to_string()];
        labels.extend((1..dim - 1).map(|i| format!("N{i}")));
        labels.push("L".into());
        Ok(Self {
            n: dim - 2,
            m,
            f0,
            fbw,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.n + 2
    }

    /// Same network with source and load swapped.
    pub fn reversed(&self) -> Self {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| self.m[(d - 1 - i, d - 1 - j)]);
        let labels = self.labels.iter().rev().cloned().collect();
        Self {
            m,
            labels,
            ..self.clone()
        }
    }

    /// Reorder resonator rows by `perm` (a permutation of `1..=n`); source
    /// and load stay in place.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut seen = vec![false; d];
        if perm.len() != self.n
            || perm
                .iter()
                .any(|&p| p == 0 || p > self.n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::Domain("invalid resonator permutation".into()));
        }
        let mut full = vec![0];
        full.extend_from_slice(perm);
        full.push(d - 1);
        let m = DMatrix::from_fn(d, d, |i, j| self.m[(full[i], full[j])]);
        let labels = full.iter().map(|&i| self.labels[i].clone()).collect();
        Ok(Self {
            m,
            labels,
            ..self.clone()
        })
    }
}

/// Assemble the matrix in canonical ordering.
pub fn build_coupling_matrix(spec: &FilterSpec) -> Result<CouplingMatrix> {
    if !(spec.f_l > 0.0 && spec.f_h > spec.f_l) {
        return Err(Error::config(
            "filter",
            format!("need 0 < f_l < f_h, got {} and {}", spec.f_l, spec.f_h),
        ));
    }
    let finite = spec
        .self_couplings
        .iter()
        .chain(&spec.path)
        .chain([&spec.m_s, &spec.m_l]);
    if finite.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::config("filter", "couplings must be finite"));
    }
    for (gi, g) in spec.groups.iter().enumerate() {
        if !(g.host == 2 || g.host == 3) {
            return Err(Error::config(
                format!("readout_groups[{gi}].host"),
                format!("host must be 2 or 3, got {}", g.host),
            ));
        }
        if g.members
            .iter()
            .any(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(Error::config(
                format!("readout_groups[{gi}]"),
                "couplings must be finite",
            ));
        }
    }

    let mut labels = vec!["S".to_string()];
    let mut filter_idx = [0usize; 4];
    let mut readout_rows: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut r_count = 0;
    for (i, slot) in filter_idx.iter_mut().enumerate() {
        *slot = labels.len();
        labels.push(format!("F{}", i + 1));
        for g in spec.groups.iter().filter(|g| g.host == i + 1) {
            for &(ms, mc) in &g.members {
                r_count += 1;
                readout_rows.push((labels.len(), *slot, ms, mc));
                labels.push(format!("R{r_count}"));
            }
        }
    }
    labels.push("L".into());
    let dim = labels.len();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut set = |i: usize, j: usize, v: f64| {
        m[(i, j)] = v;
        m[(j, i)] = v;
    };
    set(0, filter_idx[0], spec.m_s);
    set(filter_idx[3], dim - 1, spec.m_l);
    for k in 0..4 {
        set(filter_idx[k], filter_idx[k], spec.self_couplings[k]);
    }
    for k in 0..3 {
        set(filter_idx[k], filter_idx[k + 1], spec.path[k]);
    }
    for &(row, host, ms, mc) in &readout_rows {
        set(row, row, ms);
        set(row, host, mc);
    }
    Ok(CouplingMatrix {
        n: dim - 2,
        m,
        f0: spec.f0(),
        fbw: spec.fbw(),
        labels,
    })
}

/// Frequency grid with complex S11 and S21.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexSpectrum {
    pub freqs: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub s21: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(freqs: Vec<f64>, s11: Vec<Complex64>, s21: Vec<Complex64>) -> Result<Self> {
        let s = Self { freqs, s11, s21 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s11.len() != self.freqs.len() || self.s21.len() != self.freqs.len() {
            return Err(Error::Domain("spectrum arrays differ in length".into()));
        }
        if !self.freqs.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Domain(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Sub-spectrum with `lo <= f <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.freqs[i] >= lo && self.freqs[i] <= hi)
            .collect();
        Self {
            freqs: idx.iter().map(|&i| self.freqs[i]).collect(),
            s11: idx.iter().map(|&i| self.s11[i]).collect(),
            s21: idx.iter().map(|&i| self.s21[i]).collect(),
        }
    }
}

/// Uniform grid of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `(S11, S21)` at a single frequency.
pub fn s_at(cm: &CouplingMatrix, f: f64) -> Result<(Complex64, Complex64)> {
    if !(f > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {f}"
        )));
    }
    let d = cm.dim();
    let omega = (f / cm.f0 - cm.f0 / f) / cm.fbw;
    let a = DMatrix::from_fn(d, d, |i, j| {
        let mut v = Complex64::new(-cm.m[(i, j)], 0.0);
        if i == j {
            if i == 0 || i == d - 1 {
                v -= Complex64::new(0.0, 1.0);
            } else {
                v += omega;
            }
        }
        v
    });
    let mut e1 = nalgebra::DVector::<Complex64>::zeros(d);
    e1[0] = Complex64::new(1.0, 0.0);
    let x = a
        .lu()
        .solve(&e1)
        .ok_or_else(|| Error::Singular(format!("A singular at f = {f} Hz")))?;
    let j2 = Complex64::new(0.0, 2.0);
    Ok((1.0 + j2 * x[0], -j2 * x[d - 1]))
}

/// Response on `freqs`, evaluated in parallel with deterministic ordering.
pub fn s_response(cm: &CouplingMatrix, freqs: &[f64]) -> Result<ComplexSpectrum> {
    let pts: Vec<(Complex64, Complex64)> = freqs
        .par_iter()
        .map(|&f| s_at(cm, f))
        .collect::<Result<_>>()?;
    let (s11, s21) = pts.into_iter().unzip();
    ComplexSpectrum::new(freqs.to_vec(), s11, s21)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    S11,
    S21,
}

/// Largest wrapped phase step accepted between neighbouring points.
const MAX_PHASE_STEP: f64 = 0.9 * PI;

/// `-d(phase)/d(omega)` by central differences on the unwrapped phase.
pub fn group_delay(spectrum: &ComplexSpectrum, which: Param) -> Result<Vec<f64>> {
    spectrum.validate()?;
    let n = spectrum.len();
    if n < 3 {
        return Err(Error::Domain("group delay needs at least 3 points".into()));
    }
    let data = match which {
        Param::S11 => &spectrum.s11,
        Param::S21 => &spectrum.s21,
    };
    let mut phase = Vec::with_capacity(n);
    phase.push(data[0].arg());
    for i in 1..n {
        let step = (data[i] / data[i - 1]).arg();
        if step.abs() >= MAX_PHASE_STEP {
            return Err(Error::Sampling { index: i, step });
        }
        phase.push(phase[i - 1] + step);
    }
    let w: Vec<f64> = spectrum.freqs.iter().map(|f| 2.0 * PI * f).collect();
    let mut tau = vec![0.0; n];
    tau[0] = -(phase[1] - phase[0]) / (w[1] - w[0]);
    tau[n - 1] = -(phase[n - 1] - phase[n - 2]) / (w[n - 1] - w[n - 2]);
    for i in 1..n - 1 {
        tau[i] = -(phase[i + 1] - phase[i - 1]) / (w[i + 1] - w[i - 1]);
    }
    Ok(tau)
}

/// `Q_e = omega0 tau / 4` for a singly loaded resonator.
pub fn qe_from_group_delay(f0: f64, tau: f64) -> Result<f64> {
    if !(f0 > 0.0 && tau >= 0.0) {
        return Err(Error::Domain(format!(
            "need f0 > 0 and tau >= 0, got {f0}, {tau}"
        )));
    }
    Ok(2.0 * PI * f0 * tau / 4.0)
}

/// `m_S = sqrt(1 / (Q_e FBW))`.
pub fn external_coupling(q_e: f64, fbw: f64) -> Result<f64> {
    if !(q_e > 0.0 && fbw > 0.0) {
        return Err(Error::Domain(format!(
            "need q_e, fbw > 0, got {q_e}, {fbw}"
        )));
    }
    Ok((1.0 / (q_e * fbw)).sqrt())
}

/// Single resonator on the source only, for group-delay extraction.
pub fn singly_loaded(m_s: f64, f0: f64, fbw: f64) -> Result<CouplingMatrix> {
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 1)] = m_s;
    m[(1, 0)] = m_s;
    CouplingMatrix::from_matrix(m, f0, fbw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn reference_spec(groups: Vec<ReadoutGroup>) -> FilterSpec {
        FilterSpec {
            f_l: 7.2e9,
            f_h: 8.2e9,
            self_couplings: [-0.0075, 0.0325, 0.0325, -0.0075],
            path: [0.6608, 0.4861, 0.6608],
            m_s: 0.93,
            m_l: 0.93,
            groups,
        }
    }

    fn readouts() -> Vec<ReadoutGroup> {
        vec![
            ReadoutGroup {
                host: 2,
                members: vec![(-0.52, 0.032), (-0.35, 0.026), (-0.18, 0.021)],
            },
            ReadoutGroup {
                host: 3,
                members: vec![(0.0, 0.02), (0.19, 0.022), (0.4, 0.03)],
            },
        ]
    }

    fn db(x: Complex64) -> f64 {
        20.0 * x.norm().log10()
    }

    #[test]
    fn structure_and_indices() {
        let cm = build_coupling_matrix(&reference_spec(readouts())).unwrap();
        assert_eq!(cm.dim(), 12);
        let names: Vec<&str> = cm.labels.iter().map(|s| s.as_str()).collect();
        assert_eq!(
            names,
            ["S", "F1", "F2", "R1", "R2", "R3", "F3", "R4", "R5", "R6", "F4", "L"]
        );
        let m = &cm.m;
        assert_eq!(m[(0, 1)], 0.93);
        assert_eq!(m[(10, 11)], 0.93);
        assert_eq!(m[(1, 1)], -0.0075);
        assert_eq!(m[(2, 2)], 0.0325);
        assert_eq!(m[(6, 6)], 0.0325);
        assert_eq!(m[(1, 2)], 0.6608);
        assert_eq!(m[(2, 6)], 0.4861);
        assert_eq!(m[(6, 10)], 0.6608);
        assert_eq!(m[(2, 4)], 0.026);
        assert_eq!(m[(7, 6)], 0.02);
        // readouts do not couple among themselves or to the ports
        for i in 3..6 {
            for j in 3..6 {
                if i != j {
                    assert_eq!(m[(i, j)], 0.0);
                }
            }
            assert_eq!(m[(0, i)], 0.0);
        }
        assert_eq!(m, &m.transpose());
        assert_eq!(
            build_coupling_matrix(&reference_spec(vec![]))
                .unwrap()
                .dim(),
            6
        );
    }

    #[test]
    fn bad_group_host_is_config_error() {
        let spec = reference_spec(vec![ReadoutGroup {
            host: 4,
            members: vec![(0.0, 0.1)],
        }]);
        assert!(matches!(
            build_coupling_matrix(&spec),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn passband_and_stopband() {
        let cm = build_coupling_matrix(&reference_spec(vec![])).unwrap();
        let (_, s21) = s_at(&cm, cm.f0).unwrap();
        assert!(db(s21) > -0.1);
        // The -1 dB band of these couplings is 7.3124-8.1099 GHz.
        let sp = s_response(&cm, &linspace(7.313e9, 8.109e9, 801)).unwrap();
        assert!(sp.s21.iter().all(|&s| db(s) > -1.0));
        assert!(db(s_at(&cm, 7.30e9).unwrap().1) < -1.0);
        let (_, stop) = s_at(&cm, 4.5e9).unwrap();
        assert!(db(stop) < -45.0, "{}", db(stop));
    }

    #[test]
    fn isolated_ports() {
        let mut spec = reference_spec(vec![]);
        spec.m_s = 0.0;
        spec.m_l = 0.0;
        let cm = build_coupling_matrix(&spec).unwrap();
        for f in [6e9, 7.68e9, 9e9] {
            let (s11, s21) = s_at(&cm, f).unwrap();
            // Total reflection; the response formula puts its phase at pi.
            assert!((s11 + 1.0).norm() < 1e-14);
            assert_eq!(s21.norm(), 0.0);
        }
    }

    #[test]
    fn six_notches_inside_band() {
        let cm = build_coupling_matrix(&reference_spec(readouts())).unwrap();
        let sp = s_response(&cm, &linspace(7.0e9, 8.4e9, 14001)).unwrap();
        let a: Vec<f64> = sp.s21.iter().map(|s| s.norm()).collect();
        let dips: Vec<f64> = (1..a.len() - 1)
            .filter(|&i| a[i] < a[i - 1] && a[i] < a[i + 1] && a[i] < 0.9)
            .map(|i| sp.freqs[i])
            .collect();
        assert_eq!(dips.len(), 6, "{dips:?}");
        assert!(dips.iter().all(|&f| f > 7.2e9 && f < 8.2e9));
    }

    #[test]
    fn removing_readout_restores_response() {
        let bare = build_coupling_matrix(&reference_spec(vec![])).unwrap();
        let with_zero = build_coupling_matrix(&reference_spec(vec![ReadoutGroup {
            host: 2,
            members: vec![(0.1, 0.0)],
        }]))
        .unwrap();
        for f in linspace(7.0e9, 8.4e9, 57) {
            let (a11, a21) = s_at(&bare, f).unwrap();
            let (b11, b21) = s_at(&with_zero, f).unwrap();
            assert!((a11 - b11).norm() < 1e-13 && (a21 - b21).norm() < 1e-13);
        }
        let one = build_coupling_matrix(&reference_spec(vec![ReadoutGroup {
            host: 2,
            members: vec![(0.1, 0.03)],
        }]))
        .unwrap();
        let sp = s_response(&one, &linspace(7.0e9, 8.4e9, 14001)).unwrap();
        let a: Vec<f64> = sp.s21.iter().map(|s| s.norm()).collect();
        let n = (1..a.len() - 1)
            .filter(|&i| a[i] < a[i - 1] && a[i] < a[i + 1] && a[i] < 0.9)
            .count();
        assert_eq!(n, 1);
    }

    #[test]
    fn ordering_invariance() {
        let cm = build_coupling_matrix(&reference_spec(readouts())).unwrap();
        let perm = [3, 10, 1, 5, 4, 9, 2, 7, 6, 8];
        let pm = cm.permuted(&perm).unwrap();
        for f in linspace(7.0e9, 8.4e9, 101) {
            let (a11, a21) = s_at(&cm, f).unwrap();
            let (b11, b21) = s_at(&pm, f).unwrap();
            assert!((a11 - b11).norm() < 1e-12 && (a21 - b21).norm() < 1e-12);
        }
        assert!(cm.permuted(&[1, 1, 2, 3, 4, 5, 6, 7, 8, 9]).is_err());
    }

    #[test]
    fn reciprocity_and_symmetry() {
        let cm = build_coupling_matrix(&reference_spec(readouts())).unwrap();
        let rev = cm.reversed();
        let mut spec = reference_spec(vec![]);
        spec.self_couplings = [0.0; 4];
        let sym = build_coupling_matrix(&spec).unwrap();
        for f in linspace(6.5e9, 9e9, 77) {
            let a = s_at(&cm, f).unwrap().1.norm();
            let b = s_at(&rev, f).unwrap().1.norm();
            assert!((a - b).abs() < 1e-12);
            // frequency mirrored in the lowpass variable
            let om = (f / sym.f0 - sym.f0 / f) / sym.fbw;
            let x = -om * sym.fbw / 2.0;
            let g = sym.f0 * (x + (x * x + 1.0).sqrt());
            let (p, q) = (
                s_at(&sym, f).unwrap().1.norm(),
                s_at(&sym, g).unwrap().1.norm(),
            );
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn group_delay_basics() {
        let f = linspace(7e9, 8e9, 1001);
        let sp = ComplexSpectrum::new(
            f.clone(),
            vec![Complex64::new(0.3, 0.4); 1001],
            vec![Complex64::new(1.0, 0.0); 1001],
        )
        .unwrap();
        assert!(group_delay(&sp, Param::S11)
            .unwrap()
            .iter()
            .all(|t| t.abs() < 1e-20));
        let tau0 = 3e-9;
        let s: Vec<Complex64> = f
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -2.0 * PI * x * tau0))
            .collect();
        let sp = ComplexSpectrum::new(f.clone(), s.clone(), s).unwrap();
        for t in group_delay(&sp, Param::S21).unwrap() {
            assert!((t / tau0 - 1.0).abs() < 1e-3);
        }
        // 0.95 pi per step: beyond the accepted phase increment.
        let coarse = linspace(7e9, 7e9 + 4.0 * 0.95 / (2.0 * tau0), 5);
        let s: Vec<Complex64> = coarse
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -2.0 * PI * x * tau0))
            .collect();
        let sp = ComplexSpectrum::new(coarse, s.clone(), s).unwrap();
        assert!(matches!(
            group_delay(&sp, Param::S21),
            Err(Error::Sampling { .. })
        ));
    }

    #[test]
    fn external_coupling_chain() {
        let f0 = (7.2e9f64 * 8.2e9).sqrt();
        let fbw = 1e9 / f0;
        let qe = qe_from_group_delay(f0, 0.733e-9).unwrap();
        assert!((qe - 8.85).abs() < 0.01);
        assert_eq!(qe_from_group_delay(f0, 0.0).unwrap(), 0.0);
        assert!(
            (qe_from_group_delay(f0, 2.0).unwrap() / qe_from_group_delay(f0, 1.0).unwrap() - 2.0)
                .abs()
                < 1e-15
        );
        assert!((external_coupling(8.85, 0.13015).unwrap() - 0.932).abs() < 1e-3);
        assert!((external_coupling(1.0 / fbw, fbw).unwrap() - 1.0).abs() < 1e-15);
        let ms = external_coupling(qe, fbw).unwrap();
        assert!((ms - 0.93).abs() < 0.01);
    }

    #[test]
    fn group_delay_round_trip() {
        let (f0, fbw, ms) = (7.68375e9, 0.130145, 0.932);
        let cm = singly_loaded(ms, f0, fbw).unwrap();
        let f = linspace(f0 * 0.999, f0 * 1.001, 201);
        let sp = s_response(&cm, &f).unwrap();
        let tau = group_delay(&sp, Param::S11).unwrap()[100];
        let back = external_coupling(qe_from_group_delay(f0, tau).unwrap(), fbw).unwrap();
        assert!((back / ms - 1.0).abs() < 0.01, "{back}");
    }

    proptest! {
        #[test]
        fn lossless(f in 5e9f64..10e9, ms in 0.3f64..1.2, m23 in 0.2f64..0.8, r in 0.0f64..0.05) {
            let mut spec = reference_spec(readouts());
            spec.m_s = ms;
            spec.path[1] = m23;
            spec.groups[0].members[1].1 = r;
            let cm = build_coupling_matrix(&spec).unwrap();
            let (s11, s21) = s_at(&cm, f).unwrap();
            prop_assert!((s11.norm_sqr() + s21.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }
}
