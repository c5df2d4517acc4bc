//! Finite-volume Laplace solver for per-unit-length capacitances.
//!
//! Potentials live on the nodes of a tensor-product grid, permittivity on the
//! cells. Each node owns the dual cell bounded by the neighbouring midpoints,
//! which gives the usual five-point stencil on non-uniform spacing. Sides that
//! are not held at a potential are natural (zero normal flux) boundaries.
//! Metal is zero-thickness: conductors are sets of nodes on a grid line.
//!
//! Capacitances come from the field energy, `C_kl = sum g_e dphi_k dphi_l`
//! over all edges, which is symmetric by construction and second-order
//! accurate in the potential error.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::coupled_tgcpw::CoupledCrossSection;
use crate::tgcpw::CrossSection;
use crate::units::{C0, EPS0};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Free,
    Ground,
    /// Conductor index, starting at 0.
    Conductor(usize),
}

/// Grid, permittivity map and conductor masks.
#[derive(Debug, Clone)]
pub struct FdGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Relative permittivity of cell `(i, j)` at `i * (ny - 1) + j`.
    pub eps: Vec<f64>,
    /// Node role at `i * ny + j`.
    pub nodes: Vec<Node>,
}

/// Grading of the mesh around geometric features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridResolution {
    /// Cell size at conductor edges and interfaces (m).
    pub h0: f64,
    /// Growth ratio of neighbouring cells away from features.
    pub ratio: f64,
    pub hmax_x: f64,
    pub hmax_y: f64,
    /// Lateral padding beyond the outer gap, in units of `w + 2g`.
    pub pad: f64,
    /// Air below the substrate (m).
    pub below: f64,
}

impl Default for GridResolution {
    fn default() -> Self {
        Self {
            h0: 0.01e-6,
            ratio: 1.1,
            hmax_x: 20e-6,
            hmax_y: 20e-6,
            pad: 15.0,
            below: 200e-6,
        }
    }
}

impl GridResolution {
    /// All cell sizes multiplied by `s` (growth excess `ratio - 1` too).
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            h0: self.h0 * s,
            ratio: 1.0 + (self.ratio - 1.0) * s,
            hmax_x: self.hmax_x * s,
            hmax_y: self.hmax_y * s,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop at this relative residual `|r| / |b|`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

/// Graded coordinates on `[lo, hi]` containing every point of `features`
/// inside the interval. Spacing grows geometrically from `h0` with distance
/// to the nearest feature and is capped at `hmax`.
pub fn graded_axis(features: &[f64], lo: f64, hi: f64, h0: f64, ratio: f64, hmax: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = features
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let step = |x: f64| {
        let d = pts
            .iter()
            .map(|p| (x - p).abs())
            .fold(f64::INFINITY, f64::min);
        hmax.min(h0 + d * (ratio - 1.0))
    };
    let mut out = vec![lo];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut x = a;
        loop {
            let h = step(x);
            if x + h >= b - 0.5 * step(b) {
                break;
            }
            x += h;
            out.push(x);
        }
        out.push(b);
    }
    out
}

impl FdGrid {
    /// Uniform permittivity 1 and all nodes free.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || y.len() < 2 {
            return Err(Error::Domain(
                "grid needs at least two nodes per axis".into(),
            ));
        }
        if x.windows(2).chain(y.windows(2)).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "grid coordinates must increase strictly".into(),
            ));
        }
        let (nx, ny) = (x.len(), y.len());
        Ok(Self {
            eps: vec![1.0; (nx - 1) * (ny - 1)],
            nodes: vec![Node::Free; nx * ny],
            x,
            y,
        })
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn conductor_count(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Conductor(k) => Some(k + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Index of the grid line at `v`, which must be an exact grid coordinate.
    fn line_index(axis: &[f64], v: f64) -> Result<usize> {
        axis.iter()
            .position(|&a| (a - v).abs() <= 1e-12 * (1.0 + v.abs()))
            .ok_or_else(|| Error::Domain(format!("coordinate {v:e} is not a grid line")))
    }

    /// Set `role` on row `y = y0` for `x` in `[x_lo, x_hi]`.
    pub fn set_strip(&mut self, y0: f64, x_lo: f64, x_hi: f64, role: Node) -> Result<()> {
        let j = Self::line_index(&self.y, y0)?;
        let ny = self.ny();
        let tol = 1e-12 * (1.0 + x_lo.abs().max(x_hi.abs()));
        for (i, &xv) in self.x.iter().enumerate() {
            if xv >= x_lo - tol && xv <= x_hi + tol {
                self.nodes[i * ny + j] = role;
            }
        }
        Ok(())
    }

    /// Permittivity `eps_r` for cells whose centre lies in `(y_lo, y_hi)`.
    pub fn set_layer(&mut self, y_lo: f64, y_hi: f64, eps_r: f64) {
        let ny = self.ny();
        for i in 0..self.nx() - 1 {
            for j in 0..ny - 1 {
                let yc = 0.5 * (self.y[j] + self.y[j + 1]);
                if yc > y_lo && yc < y_hi {
                    self.eps[i * (ny - 1) + j] = eps_r;
                }
            }
        }
    }

    /// Same grid and conductors with all permittivities set to one.
    pub fn vacuum(&self) -> Self {
        Self {
            eps: vec![1.0; self.eps.len()],
            ..self.clone()
        }
    }

    fn cell_eps(&self, i: isize, j: isize) -> f64 {
        let (nx, ny) = (self.nx() as isize, self.ny() as isize);
        if i < 0 || j < 0 || i >= nx - 1 || j >= ny - 1 {
            0.0
        } else {
            self.eps[(i * (ny - 1) + j) as usize]
        }
    }

    /// Edge conductances (relative to eps0): `gx` on `(i,j)-(i+1,j)` at
    /// `i * ny + j`, `gy` on `(i,j)-(i,j+1)` at `i * (ny - 1) + j`.
    fn conductances(&self) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx(), self.ny());
        let mut gx = vec![0.0; (nx - 1) * ny];
        for i in 0..nx - 1 {
            let hx = self.x[i + 1] - self.x[i];
            for j in 0..ny {
                let (ii, jj) = (i as isize, j as isize);
                let mut g = 0.0;
                if j > 0 {
                    g += self.cell_eps(ii, jj - 1) * (self.y[j] - self.y[j - 1]) / 2.0;
                }
                if j + 1 < ny {
                    g += self.cell_eps(ii, jj) * (self.y[j + 1] - self.y[j]) / 2.0;
                }
                gx[i * ny + j] = g / hx;
            }
        }
        let mut gy = vec![0.0; nx * (ny - 1)];
        for i in 0..nx {
            for j in 0..ny - 1 {
                let hy = self.y[j + 1] - self.y[j];
                let (ii, jj) = (i as isize, j as isize);
                let mut g = 0.0;
                if i > 0 {
                    g += self.cell_eps(ii - 1, jj) * (self.x[i] - self.x[i - 1]) / 2.0;
                }
                if i + 1 < nx {
                    g += self.cell_eps(ii, jj) * (self.x[i + 1] - self.x[i]) / 2.0;
                }
                gy[i * (ny - 1) + j] = g / hy;
            }
        }
        (gx, gy)
    }
}

/// Assembled operator on the full node set; fixed nodes are identity rows.
///
/// `cx[p]` couples node `p` to `p + ny` and `cy[p]` couples `p` to `p + 1`;
/// both are zero when either end is fixed or the neighbour does not exist.
struct Operator {
    ny: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
    fixed: Vec<bool>,
    diag: Vec<f64>,
    cx: Vec<f64>,
    cy: Vec<f64>,
}

impl Operator {
    fn new(grid: &FdGrid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let n = nx * ny;
        let (gx, gy) = grid.conductances();
        let fixed: Vec<bool> = grid.nodes.iter().map(|n| *n != Node::Free).collect();
        let mut diag = vec![0.0; n];
        let mut cx = vec![0.0; n];
        let mut cy = vec![0.0; n];
        for i in 0..nx {
            for j in 0..ny {
                let p = i * ny + j;
                if i + 1 < nx {
                    let g = gx[i * ny + j];
                    diag[p] += g;
                    diag[p + ny] += g;
                    if !fixed[p] && !fixed[p + ny] {
                        cx[p] = g;
                    }
                }
                if j + 1 < ny {
                    let g = gy[i * (ny - 1) + j];
                    diag[p] += g;
                    diag[p + 1] += g;
                    if !fixed[p] && !fixed[p + 1] {
                        cy[p] = g;
                    }
                }
            }
        }
        for p in 0..n {
            if fixed[p] {
                diag[p] = 1.0;
            }
        }
        Self {
            ny,
            gx,
            gy,
            fixed,
            diag,
            cx,
            cy,
        }
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let (n, ny) = (self.len(), self.ny);
        for p in 0..n {
            let mut s = self.diag[p] * v[p];
            if p + 1 < n {
                s -= self.cy[p] * v[p + 1];
            }
            if p >= 1 {
                s -= self.cy[p - 1] * v[p - 1];
            }
            if p + ny < n {
                s -= self.cx[p] * v[p + ny];
            }
            if p >= ny {
                s -= self.cx[p - ny] * v[p - ny];
            }
            out[p] = s;
        }
    }

    /// Reciprocal diagonal of the incomplete Cholesky factor.
    fn ic0_inverse(&self) -> Vec<f64> {
        let (n, ny) = (self.len(), self.ny);
        let mut inv = vec![0.0; n];
        for p in 0..n {
            let mut d = self.diag[p];
            if p >= 1 {
                d -= self.cy[p - 1] * self.cy[p - 1] * inv[p - 1];
            }
            if p >= ny {
                d -= self.cx[p - ny] * self.cx[p - ny] * inv[p - ny];
            }
            inv[p] = 1.0 / d;
        }
        inv
    }

    /// `z = M^{-1} r` with `M = (D - L) D^{-1} (D - L^T)`.
    fn precondition(&self, inv: &[f64], r: &[f64], z: &mut [f64]) {
        let (n, ny) = (self.len(), self.ny);
        for p in 0..n {
            let mut v = r[p];
            if p >= 1 {
                v += self.cy[p - 1] * z[p - 1];
            }
            if p >= ny {
                v += self.cx[p - ny] * z[p - ny];
            }
            z[p] = v * inv[p];
        }
        for p in (0..n).rev() {
            let mut v = 0.0;
            if p + 1 < n {
                v += self.cy[p] * z[p + 1];
            }
            if p + ny < n {
                v += self.cx[p] * z[p + ny];
            }
            z[p] += v * inv[p];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Potential with conductor `k` held at `potentials[k]` and ground at zero.
pub fn fd_potential(grid: &FdGrid, potentials: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let op = Operator::new(grid);
    fd_potential_with(grid, &op, potentials, opts)
}

fn fd_potential_with(
    grid: &FdGrid,
    op: &Operator,
    potentials: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let n = grid.node_count();
    if grid.conductor_count() > potentials.len() {
        return Err(Error::Domain(format!(
            "{} conductors but {} potentials",
            grid.conductor_count(),
            potentials.len()
        )));
    }
    if !grid.nodes.contains(&Node::Ground) {
        return Err(Error::Domain(
            "no ground nodes: Dirichlet problem is not well posed".into(),
        ));
    }
    let fixed_phi: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&nd| match nd {
            Node::Conductor(k) => potentials[k],
            _ => 0.0,
        })
        .collect();
    // Solve A u = b on free nodes, b = sum of couplings to fixed neighbours.
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut b = vec![0.0; n];
    for i in 0..nx {
        for j in 0..ny {
            let p = i * ny + j;
            if i + 1 < nx {
                let g = op.gx[i * ny + j];
                let q = p + ny;
                if !op.fixed[p] && op.fixed[q] {
                    b[p] += g * fixed_phi[q];
                }
                if op.fixed[p] && !op.fixed[q] {
                    b[q] += g * fixed_phi[p];
                }
            }
            if j + 1 < ny {
                let g = op.gy[i * (ny - 1) + j];
                let q = p + 1;
                if !op.fixed[p] && op.fixed[q] {
                    b[p] += g * fixed_phi[q];
                }
                if op.fixed[p] && !op.fixed[q] {
                    b[q] += g * fixed_phi[p];
                }
            }
        }
    }
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm > 0.0 {
        let inv = op.ic0_inverse();
        let mut r = b;
        let mut z = vec![0.0; n];
        op.precondition(&inv, &r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        let mut rel = 1.0;
        let mut iterations = None;
        for it in 0..opts.max_iter {
            op.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            let mut rr = 0.0;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
                rr += r[k] * r[k];
            }
            rel = rr.sqrt() / bnorm;
            if rel <= opts.rel_tol {
                iterations = Some(it + 1);
                break;
            }
            op.precondition(&inv, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        if iterations.is_none() {
            return Err(Error::Solver(format!(
                "conjugate gradient stopped at relative residual {rel:.3e} after {} iterations",
                opts.max_iter
            )));
        }
    }
    Ok((0..n)
        .map(|k| if op.fixed[k] { fixed_phi[k] } else { x[k] })
        .collect())
}

/// Energy bilinear form `sum g_e dphi_a dphi_b` (relative to eps0).
fn energy_form(op: &Operator, a: &[f64], b: &[f64]) -> f64 {
    let ny = op.ny;
    let nx = op.len() / ny;
    let mut s = 0.0;
    for i in 0..nx {
        for j in 0..ny {
            let p = i * ny + j;
            if i + 1 < nx {
                s += op.gx[i * ny + j] * (a[p + ny] - a[p]) * (b[p + ny] - b[p]);
            }
            if j + 1 < ny {
                s += op.gy[i * (ny - 1) + j] * (a[p + 1] - a[p]) * (b[p + 1] - b[p]);
            }
        }
    }
    s
}

/// Maxwell capacitance matrix per unit length (F/m) of all conductors.
pub fn fd_capacitance(grid: &FdGrid, opts: &SolverOptions) -> Result<DMatrix<f64>> {
    let n = grid.conductor_count();
    if n == 0 {
        return Err(Error::Domain("grid has no conductors".into()));
    }
    let op = Operator::new(grid);
    let phis: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            fd_potential_with(grid, &op, &v, opts)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |a, b| {
        EPS0 * energy_form(&op, &phis[a], &phis[b])
    }))
}

/// Single-line result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdLine {
    pub c_total: f64,
    pub c_air: f64,
    pub eps_eff: f64,
    pub z0: f64,
    pub nodes: usize,
}

/// Per-strip result for a symmetric pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FdCoupled {
    pub maxwell: DMatrix<f64>,
    pub maxwell_air: DMatrix<f64>,
    pub c_even_total: f64,
    pub c_odd_total: f64,
    pub c_even_air: f64,
    pub c_odd_air: f64,
    pub eps_even: f64,
    pub eps_odd: f64,
    pub z0_even: f64,
    pub z0_odd: f64,
    pub nodes: usize,
}

fn stack_y(hs: f64, hb: f64, res: &GridResolution) -> Vec<f64> {
    let yb = -(hb + res.below);
    graded_axis(&[yb, -hb, 0.0, hs], yb, hs, res.h0, res.ratio, res.hmax_y)
}

fn stack_grid(x: Vec<f64>, hs: f64, hb: f64, eps_r: f64, res: &GridResolution) -> Result<FdGrid> {
    let mut grid = FdGrid::new(x, stack_y(hs, hb, res))?;
    grid.set_layer(-hb, 0.0, eps_r);
    let (x0, x1) = (grid.x[0], grid.x[grid.nx() - 1]);
    grid.set_strip(hs, x0, x1, Node::Ground)?;
    Ok(grid)
}

/// Grid of one top-grounded CPW centred at `x = 0`.
pub fn tgcpw_grid(cs: &CrossSection, res: &GridResolution) -> Result<FdGrid> {
    cs.validate()?;
    let (a, b) = (cs.w / 2.0, cs.w / 2.0 + cs.g);
    let span = b + res.pad * (cs.w + 2.0 * cs.g);
    let x = graded_axis(&[-b, -a, a, b], -span, span, res.h0, res.ratio, res.hmax_x);
    let mut grid = stack_grid(x, cs.hs, cs.hb, cs.eps_r, res)?;
    grid.set_strip(0.0, -a, a, Node::Conductor(0))?;
    grid.set_strip(0.0, -span, -b, Node::Ground)?;
    grid.set_strip(0.0, b, span, Node::Ground)?;
    Ok(grid)
}

/// Grid of a symmetric edge-coupled pair centred at `x = 0`.
pub fn coupled_grid(ccs: &CoupledCrossSection, res: &GridResolution) -> Result<FdGrid> {
    ccs.validate()?;
    let (za, zb, zc) = ccs.edges();
    let span = zc + res.pad * (ccs.w + 2.0 * ccs.g);
    let x = graded_axis(
        &[-zc, -zb, -za, za, zb, zc],
        -span,
        span,
        res.h0,
        res.ratio,
        res.hmax_x,
    );
    let mut grid = stack_grid(x, ccs.hs, ccs.hb, ccs.eps_r, res)?;
    grid.set_strip(0.0, -zb, -za, Node::Conductor(0))?;
    grid.set_strip(0.0, za, zb, Node::Conductor(1))?;
    grid.set_strip(0.0, -span, -zc, Node::Ground)?;
    grid.set_strip(0.0, zc, span, Node::Ground)?;
    Ok(grid)
}

/// Single-line capacitances and impedance.
pub fn tgcpw_fd(cs: &CrossSection, res: &GridResolution, opts: &SolverOptions) -> Result<FdLine> {
    let grid = tgcpw_grid(cs, res)?;
    let air = grid.vacuum();
    let (c, ca) = rayon::join(
        || fd_capacitance(&grid, opts),
        || fd_capacitance(&air, opts),
    );
    let (c_total, c_air) = (c?[(0, 0)], ca?[(0, 0)]);
    Ok(FdLine {
        c_total,
        c_air,
        eps_eff: c_total / c_air,
        z0: 1.0 / (C0 * (c_total * c_air).sqrt()),
        nodes: grid.node_count(),
    })
}

/// Maxwell matrices of the pair and their even/odd combinations.
pub fn coupled_fd(
    ccs: &CoupledCrossSection,
    res: &GridResolution,
    opts: &SolverOptions,
) -> Result<FdCoupled> {
    let grid = coupled_grid(ccs, res)?;
    let air = grid.vacuum();
    let (m, ma) = rayon::join(
        || fd_capacitance(&grid, opts),
        || fd_capacitance(&air, opts),
    );
    let (m, ma) = (m?, ma?);
    // Symmetric pair: use the averaged self and mutual terms.
    let even = |c: &DMatrix<f64>| 0.5 * (c[(0, 0)] + c[(1, 1)]) + 0.5 * (c[(0, 1)] + c[(1, 0)]);
    let odd = |c: &DMatrix<f64>| 0.5 * (c[(0, 0)] + c[(1, 1)]) - 0.5 * (c[(0, 1)] + c[(1, 0)]);
    let (ce, co, cae, cao) = (even(&m), odd(&m), even(&ma), odd(&ma));
    Ok(FdCoupled {
        c_even_total: ce,
        c_odd_total: co,
        c_even_air: cae,
        c_odd_air: cao,
        eps_even: ce / cae,
        eps_odd: co / cao,
        z0_even: 1.0 / (C0 * (ce * cae).sqrt()),
        z0_odd: 1.0 / (C0 * (co * cao).sqrt()),
        maxwell: m,
        maxwell_air: ma,
        nodes: grid.node_count(),
    })
}

/// Normalised capacitance `C / eps0` of a parallel-plate capacitor of
/// aspect `alpha = W/H` whose bottom plate is open between `beta W` and
/// `gamma W`. The side walls are magnetic (zero normal flux).
pub fn slot_capacitor_fd(
    alpha: f64,
    beta: f64,
    gamma: f64,
    h0: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    if !(alpha > 0.0) || !(0.0..=1.0).contains(&beta) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!(
            "bad slot arguments ({alpha}, {beta}, {gamma})"
        )));
    }
    let (s0, s1) = (beta.min(gamma) * alpha, beta.max(gamma) * alpha);
    let hmax = 0.02 * alpha.min(1.0);
    let x = graded_axis(&[s0, s1], 0.0, alpha, h0, 1.05, hmax);
    let y = graded_axis(&[], 0.0, 1.0, h0, 1.05, hmax);
    let mut grid = FdGrid::new(x, y)?;
    grid.set_strip(1.0, 0.0, alpha, Node::Conductor(0))?;
    grid.set_strip(0.0, 0.0, s0, Node::Ground)?;
    grid.set_strip(0.0, s1, alpha, Node::Ground)?;
    // Slot edge nodes belong to the plate; the open part is strictly inside.
    Ok(fd_capacitance(&grid, opts)?[(0, 0)] / EPS0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plates across the full width of a box with magnetic side walls and a
    /// permittivity increasing linearly from 1 to 3 across the gap. The exact
    /// capacitance per unit width is `1 / int dy / eps(y) = 2 / (h ln 3)`.
    fn graded_plate(n: usize) -> f64 {
        let (w, h) = (1.0, 1.0);
        let x: Vec<f64> = (0..=4).map(|i| w * i as f64 / 4.0).collect();
        let y: Vec<f64> = (0..=n).map(|j| h * j as f64 / n as f64).collect();
        let mut grid = FdGrid::new(x, y).unwrap();
        for j in 0..n {
            let yc = (j as f64 + 0.5) / n as f64;
            grid.set_layer(
                yc * h - 0.1 * h / n as f64,
                yc * h + 0.1 * h / n as f64,
                1.0 + 2.0 * yc,
            );
        }
        grid.set_strip(h, 0.0, w, Node::Conductor(0)).unwrap();
        grid.set_strip(0.0, 0.0, w, Node::Ground).unwrap();
        fd_capacitance(
            &grid,
            &SolverOptions {
                rel_tol: 1e-13,
                ..Default::default()
            },
        )
        .unwrap()[(0, 0)]
            / EPS0
    }

    #[test]
    fn parallel_plate_homogeneous() {
        let x: Vec<f64> = (0..=50).map(|i| 3.0 * i as f64 / 50.0).collect();
        let y: Vec<f64> = (0..=10).map(|j| 0.5 * j as f64 / 10.0).collect();
        let mut grid = FdGrid::new(x, y).unwrap();
        grid.set_layer(-1.0, 1.0, 4.0);
        grid.set_strip(0.5, 0.0, 3.0, Node::Conductor(0)).unwrap();
        grid.set_strip(0.0, 0.0, 3.0, Node::Ground).unwrap();
        let c = fd_capacitance(&grid, &SolverOptions::default()).unwrap()[(0, 0)];
        assert!((c / (EPS0 * 4.0) / (3.0 / 0.5) - 1.0).abs() < 0.02);
    }

    #[test]
    fn second_order_convergence() {
        let exact = 2.0 / 3f64.ln();
        let ns = [8usize, 16, 32, 64];
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| (graded_plate(n) - exact).abs())
            .collect();
        let slope = (errs[0] / errs[3]).ln() / ((ns[3] as f64 / ns[0] as f64).ln());
        assert!(
            (1.7..=2.3).contains(&slope),
            "slope {slope}, errors {errs:?}"
        );
    }

    #[test]
    fn maxwell_matrix_symmetric_and_dominant() {
        let x: Vec<f64> = (0..=60).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = (0..=30).map(|j| j as f64 / 10.0).collect();
        let mut grid = FdGrid::new(x, y).unwrap();
        grid.set_strip(0.0, 0.0, 6.0, Node::Ground).unwrap();
        grid.set_strip(1.5, 1.0, 2.5, Node::Conductor(0)).unwrap();
        grid.set_strip(1.5, 3.5, 5.0, Node::Conductor(1)).unwrap();
        let c = fd_capacitance(&grid, &SolverOptions::default()).unwrap();
        assert!((c[(0, 1)] - c[(1, 0)]).abs() < 1e-9 * c[(0, 0)]);
        assert!(c[(0, 1)] < 0.0);
        assert!(c[(0, 0)] > -c[(0, 1)] && c[(1, 1)] > -c[(1, 0)]);
        assert!((c[(0, 0)] / c[(1, 1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn graded_axis_contains_features() {
        let a = graded_axis(&[0.3, 0.7], 0.0, 1.0, 1e-3, 1.2, 0.05);
        for f in [0.0, 0.3, 0.7, 1.0] {
            assert!(a.contains(&f));
        }
        assert!(a
            .windows(2)
            .all(|w| w[1] > w[0] && w[1] - w[0] <= 0.05 * 1.5 + 1e-12));
    }

    #[test]
    fn ungrounded_problem_rejected() {
        let mut grid = FdGrid::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0]).unwrap();
        grid.set_strip(1.0, 0.0, 2.0, Node::Conductor(0)).unwrap();
        assert!(fd_capacitance(&grid, &SolverOptions::default()).is_err());
    }

    #[test]
    fn unslotted_plate_matches_aspect() {
        let c = slot_capacitor_fd(2.0, 0.5, 0.5, 1e-3, &SolverOptions::default()).unwrap();
        assert!((c / 2.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn slot_formula_on_open_slots() {
        use crate::coupled_tgcpw::slot_capacitor_cp;
        for (a, b, g) in [(1.5, 0.3, 0.6), (3.0, 0.2, 0.5), (0.8, 0.5, 0.9)] {
            let cp = slot_capacitor_cp(a, b, g).unwrap().value;
            let fd = slot_capacitor_fd(a, b, g, 1e-3, &SolverOptions::default()).unwrap();
            assert!(
                (cp / fd - 1.0).abs() < 5e-3,
                "({a}, {b}, {g}): {cp} vs {fd}"
            );
        }
    }
}
