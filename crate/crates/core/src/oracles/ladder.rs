//! Lumped LC-ladder model of two quarter-wave lines with a shared coupled
//! section, solved as the generalized eigenproblem `G v = w^2 C v`.
//!
//! Each line is a chain of cells (series inductance, shunt capacitance split
//! half to each end node). Inside the coupled section the two lines' cells are
//! paired: the series branches share a 2x2 inductance matrix and the paired
//! nodes are joined by the mutual capacitance. A shorted end node is removed.

use nalgebra::DMatrix;

use crate::coupled_tgcpw::EvenOddParams;
use crate::coupler_net::{mutual_coupling_from_freqs, CoupledPairSpec};
use crate::tgcpw::TLineParams;
use crate::units::C0;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Short,
    Open,
}

/// One line: `[before][coupled][after]` with the given cell counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderLine {
    pub before: (usize, f64),
    pub coupled: (usize, f64),
    pub after: (usize, f64),
    /// Boundary at the start of `before` and at the end of `after`.
    pub ends: (End, End),
}

impl LadderLine {
    /// Section lengths split into cells no longer than `h`.
    pub fn from_lengths(
        l_before: f64,
        l_coupled: f64,
        l_after: f64,
        h: f64,
        ends: (End, End),
    ) -> Result<Self> {
        if !(h > 0.0) || [l_before, l_coupled, l_after].iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Domain(
                "ladder lengths must be non-negative and h positive".into(),
            ));
        }
        let split = |l: f64| {
            let n = (l / h - 1e-9).ceil().max(0.0) as usize;
            (n, if n == 0 { 0.0 } else { l / n as f64 })
        };
        Ok(Self {
            before: split(l_before),
            coupled: split(l_coupled),
            after: split(l_after),
            ends,
        })
    }

    pub fn cells(&self) -> usize {
        self.before.0 + self.coupled.0 + self.after.0
    }

    fn cell_length(&self, k: usize) -> f64 {
        if k < self.before.0 {
            self.before.1
        } else if k < self.before.0 + self.coupled.0 {
            self.coupled.1
        } else {
            self.after.1
        }
    }

    fn reversed(&self) -> Self {
        Self {
            before: self.after,
            coupled: self.coupled,
            after: self.before,
            ends: (self.ends.1, self.ends.0),
        }
    }
}

/// Per-unit-length constants of the uncoupled and coupled regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderCoupling {
    pub l_single: f64,
    pub c_single: f64,
    pub l_self: f64,
    pub l_mutual: f64,
    pub c_ground: f64,
    pub c_mutual: f64,
}

impl LadderCoupling {
    /// Uncoupled constants from the single line; coupled ones from the
    /// even/odd modes, with kinetic inductance added to the self term only.
    pub fn from_params(line: &TLineParams, eo: &EvenOddParams, lk_ratio: f64) -> Self {
        let l_even = 1.0 / (C0 * C0 * eo.c_even_air);
        let l_odd = 1.0 / (C0 * C0 * eo.c_odd_air);
        Self {
            l_single: line.l_lg + line.l_lk,
            c_single: line.c_l,
            l_self: 0.5 * (l_even + l_odd) * (1.0 + lk_ratio),
            l_mutual: 0.5 * (l_even - l_odd),
            c_ground: eo.c_even_total,
            c_mutual: 0.5 * (eo.c_odd_total - eo.c_even_total),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderModel {
    pub lines: [LadderLine; 2],
    pub constants: LadderCoupling,
}

impl LadderModel {
    /// Short at the `l_s` side, open beyond `l_o`, cells no longer than `h`.
    pub fn from_pair(spec: &CoupledPairSpec, h: f64) -> Result<Self> {
        let lk = spec.res_a.cross_section.lk_ratio;
        let line = |r: &crate::tgcpw::ResonatorSpec| {
            LadderLine::from_lengths(
                r.l_s,
                r.l_c,
                r.open_length_eff(),
                h,
                (End::Short, End::Open),
            )
        };
        if (spec.res_a.l_c - spec.res_b.l_c).abs() > 1e-12 {
            return Err(Error::Domain(
                "both lines need the same coupled length".into(),
            ));
        }
        Ok(Self {
            lines: [line(&spec.res_a)?, line(&spec.res_b)?],
            constants: LadderCoupling::from_params(&spec.line, &spec.even_odd, lk),
        })
    }

    /// Both lines traversed from the other end.
    pub fn reversed(&self) -> Self {
        Self {
            lines: [self.lines[0].reversed(), self.lines[1].reversed()],
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        let k = &self.constants;
        if self.lines[0].coupled.0 != self.lines[1].coupled.0 {
            return Err(Error::Domain(
                "coupled sections must have equal cell counts".into(),
            ));
        }
        if !(k.l_single > 0.0
            && k.c_single > 0.0
            && k.c_ground > 0.0
            && k.l_self > k.l_mutual.abs())
        {
            return Err(Error::Domain(format!(
                "ladder constants are not physical: {k:?}"
            )));
        }
        if self.lines.iter().any(|l| l.cells() == 0) {
            return Err(Error::Domain("empty ladder line".into()));
        }
        Ok(())
    }
}

/// Node numbering: node `k` of a line sits after cell `k - 1`; the shorted
/// end node is dropped.
struct Numbering {
    ids: [Vec<Option<usize>>; 2],
    total: usize,
}

fn number(lines: &[LadderLine; 2]) -> Numbering {
    let mut next = 0;
    let ids = [0, 1].map(|j| {
        let l = &lines[j];
        let n = l.cells();
        (0..=n)
            .map(|k| {
                let shorted =
                    (k == 0 && l.ends.0 == End::Short) || (k == n && l.ends.1 == End::Short);
                (!shorted).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    });
    Numbering { ids, total: next }
}

fn stamp(m: &mut DMatrix<f64>, a: Option<usize>, b: Option<usize>, v: f64) {
    if let Some(a) = a {
        m[(a, a)] += v;
    }
    if let Some(b) = b {
        m[(b, b)] += v;
    }
    if let (Some(a), Some(b)) = (a, b) {
        m[(a, b)] -= v;
        m[(b, a)] -= v;
    }
}

/// All eigenfrequencies (Hz) in increasing order.
pub fn ladder_eigenfrequencies(model: &LadderModel) -> Result<Vec<f64>> {
    model.validate()?;
    let k = &model.constants;
    let num = number(&model.lines);
    let n = num.total;
    let mut cap = DMatrix::<f64>::zeros(n, n);
    let mut gam = DMatrix::<f64>::zeros(n, n);

    for (j, line) in model.lines.iter().enumerate() {
        let ids = &num.ids[j];
        for cell in 0..line.cells() {
            let len = line.cell_length(cell);
            let coupled = cell >= line.before.0 && cell < line.before.0 + line.coupled.0;
            let c = if coupled { k.c_ground } else { k.c_single } * len;
            for nd in [ids[cell], ids[cell + 1]].into_iter().flatten() {
                cap[(nd, nd)] += c / 2.0;
            }
            if !coupled {
                stamp(&mut gam, ids[cell], ids[cell + 1], 1.0 / (k.l_single * len));
            }
        }
    }

    // Paired coupled cells.
    let (la, lb) = (&model.lines[0], &model.lines[1]);
    let det = k.l_self * k.l_self - k.l_mutual * k.l_mutual;
    for q in 0..la.coupled.0 {
        let len = la.coupled.1;
        if (len - lb.coupled.1).abs() > 1e-9 * len {
            return Err(Error::Domain(
                "coupled cells of the two lines differ in length".into(),
            ));
        }
        let (ca, cb) = (la.before.0 + q, lb.before.0 + q);
        let ends = [
            (num.ids[0][ca], num.ids[0][ca + 1]),
            (num.ids[1][cb], num.ids[1][cb + 1]),
        ];
        // Inverse of [[Ls, Lm], [Lm, Ls]] * len.
        let y = [
            [k.l_self / det / len, -k.l_mutual / det / len],
            [-k.l_mutual / det / len, k.l_self / det / len],
        ];
        for bi in 0..2 {
            for bj in 0..2 {
                let (u0, u1) = ends[bi];
                let (v0, v1) = ends[bj];
                for (u, su) in [(u0, 1.0), (u1, -1.0)] {
                    for (v, sv) in [(v0, 1.0), (v1, -1.0)] {
                        if let (Some(u), Some(v)) = (u, v) {
                            gam[(u, v)] += su * sv * y[bi][bj];
                        }
                    }
                }
            }
        }
        let cm = k.c_mutual * len / 2.0;
        stamp(&mut cap, ends[0].0, ends[1].0, cm);
        stamp(&mut cap, ends[0].1, ends[1].1, cm);
    }

    let chol = cap.clone().cholesky().ok_or_else(|| {
        Error::Domain("ladder capacitance matrix is not positive definite".into())
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("ladder capacitance factor is singular".into()))?;
    let a = &linv * gam * linv.transpose();
    let a = 0.5 * (&a + a.transpose());
    let eig = a.symmetric_eigen();
    let mut w2: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    w2.sort_by(f64::total_cmp);
    if w2[0] < -1e-9 * w2[w2.len() - 1].abs() {
        return Err(Error::Domain(
            "ladder stiffness matrix is indefinite".into(),
        ));
    }
    Ok(w2
        .iter()
        .map(|v| v.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
        .collect())
}

/// Dressed pair from the ladder and the coupling `M` it implies against the
/// analytic bare frequencies of `spec`.
pub fn ladder_coupling(spec: &CoupledPairSpec, h: f64) -> Result<(f64, f64, f64)> {
    let f = ladder_eigenfrequencies(&LadderModel::from_pair(spec, h)?)?;
    let (f01, f02) = spec.bare_frequencies()?;
    Ok((
        f[0],
        f[1],
        mutual_coupling_from_freqs(f01, f02, f[0], f[1])?,
    ))
}
