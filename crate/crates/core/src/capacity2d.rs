//! Planar condenser capacity by discrete Dirichlet-energy minimization.
//!
//! A [`GridCondenser`] lives on a rectilinear node grid `xs × ys`. Nodes outside
//! the open set `A` carry the value 0, plate nodes (in `C`) carry 1, and the
//! rest are unknowns. The discrete energy is the finite-volume form
//!
//! ```text
//! E(u) = Σ_edges w_e (u_p - u_q)² / θ_e,   w_e = dual length / edge length,
//! ```
//!
//! where `θ_e ∈ (0, 1]` is the fraction of the edge that lies between a free
//! node and the true interface (cut cells). On a uniform grid `w_e = 1`, so
//! the energy does not depend on the spacing. The minimizer solves a
//! symmetric positive-definite system handled by preconditioned conjugate
//! gradients; the capacity is the energy of the discrete minimizer.
//!
//! Edges of the grid that leave the box impose no condition: truncating an
//! unbounded `A` to a box therefore gives a lower bound (natural Neumann
//! boundary), and closing the box gives an upper bound.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geom::Point;
use crate::mask::DomainMask;
use crate::sets::CompactSet;
use crate::specfun;

/// Smallest admissible cut fraction; shorter cuts are clamped to keep the
/// system well conditioned.
pub const MIN_THETA: f64 = 1e-2;

const BISECTION_STEPS: usize = 40;

/// Direction of an edge leaving a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dir {
    #[serde(rename = "+x")]
    PlusX,
    #[serde(rename = "-x")]
    MinusX,
    #[serde(rename = "+y")]
    PlusY,
    #[serde(rename = "-y")]
    MinusY,
}

impl Dir {
    const ALL: [Dir; 4] = [Dir::PlusX, Dir::MinusX, Dir::PlusY, Dir::MinusY];

    fn slot(self) -> usize {
        self as usize
    }
}

/// The interface on the edge from `node` in direction `dir` sits at fraction
/// `theta` of the edge length, measured from `node`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub node: usize,
    pub dir: Dir,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCondenser {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Node lies in the open set `A` (row-major, x fastest).
    pub a_mask: Vec<bool>,
    /// Node lies on the plate `C`.
    pub c_mask: Vec<bool>,
    pub cuts: Vec<Cut>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    Jacobi,
    /// Modified incomplete Cholesky with zero fill.
    Mic0,
}

impl std::str::FromStr for Preconditioner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(Preconditioner::Jacobi),
            "mic0" | "mic" => Ok(Preconditioner::Mic0),
            other => Err(Error::Unsupported(format!("preconditioner '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub precond: Preconditioner,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 100_000,
            precond: Preconditioner::Mic0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub capacity: f64,
    pub iterations: usize,
    /// Final relative residual `‖b - Au‖ / ‖b‖`.
    pub residual: f64,
    pub nodes: usize,
    pub free_nodes: usize,
    pub preconditioner: Preconditioner,
    /// `(h, capacity)` pairs when the solve was repeated on a refined grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement_estimates: Option<Vec<(f64, f64)>>,
    /// Richardson extrapolation of the refinement pair, assuming second-order
    /// convergence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolated: Option<f64>,
}

/// The discrete minimizer together with its report.
#[derive(Clone, Debug)]
pub struct Solution {
    pub report: SolveReport,
    /// Potential at every node (0 outside `A`, 1 on `C`).
    pub u: Vec<f64>,
}

const NONE: u32 = u32::MAX;

fn dual_lengths(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 3 {
        return Err(Error::Malformed(format!("axis {name} needs at least 3 nodes")));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite()) {
        return Err(Error::Malformed(format!("axis {name} must be strictly increasing")));
    }
    Ok(())
}

impl GridCondenser {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.xs.len() + i
    }

    pub fn node_point(&self, idx: usize) -> Point {
        let nx = self.xs.len();
        Point::xy(self.xs[idx % nx], self.ys[idx / nx])
    }

    fn neighbor(&self, idx: usize, dir: Dir) -> Option<usize> {
        let nx = self.nx();
        let (i, j) = (idx % nx, idx / nx);
        match dir {
            Dir::PlusX if i + 1 < nx => Some(idx + 1),
            Dir::MinusX if i > 0 => Some(idx - 1),
            Dir::PlusY if j + 1 < self.ny() => Some(idx + nx),
            Dir::MinusY if j > 0 => Some(idx - nx),
            _ => None,
        }
    }

    /// Structural checks: shapes, `C ⊆ A`, non-empty plate and free set, and
    /// a plate that stays away from the complement of `A`.
    pub fn validate(&self) -> Result<()> {
        const OP: &str = "solve_capacity";
        check_axis("x", &self.xs)?;
        check_axis("y", &self.ys)?;
        let total = self.nx() * self.ny();
        if self.a_mask.len() != total || self.c_mask.len() != total {
            return Err(Error::Malformed(format!(
                "masks must have {total} nodes, got {} and {}",
                self.a_mask.len(),
                self.c_mask.len()
            )));
        }
        if self.c_mask.iter().zip(&self.a_mask).any(|(&c, &a)| c && !a) {
            return Err(Error::Degenerate {
                op: OP,
                msg: "plate is not contained in A".into(),
            });
        }
        if !self.c_mask.iter().any(|&c| c) {
            return Err(Error::Degenerate {
                op: OP,
                msg: "plate C is empty".into(),
            });
        }
        if !self.a_mask.iter().zip(&self.c_mask).any(|(&a, &c)| a && !c) {
            return Err(Error::Degenerate {
                op: OP,
                msg: "A \\ C has no free nodes".into(),
            });
        }
        for idx in 0..total {
            if !self.c_mask[idx] {
                continue;
            }
            for dir in Dir::ALL {
                if let Some(nb) = self.neighbor(idx, dir) {
                    if !self.a_mask[nb] {
                        return Err(Error::Degenerate {
                            op: OP,
                            msg: format!("plate touches the boundary of A at {:?}", self.node_point(idx).coords()),
                        });
                    }
                }
            }
        }
        for cut in &self.cuts {
            if cut.node >= total || !(cut.theta > 0.0 && cut.theta <= 1.0) {
                return Err(Error::Malformed(format!("invalid cut {cut:?}")));
            }
        }
        Ok(())
    }

    /// Same cell topology with every coordinate multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> GridCondenser {
        GridCondenser {
            xs: self.xs.iter().map(|x| x * scale).collect(),
            ys: self.ys.iter().map(|y| y * scale).collect(),
            ..self.clone()
        }
    }

    /// Uniform grid with each cell split into four. New nodes belong to `A`
    /// (resp. `C`) when all their coarse neighbors do; cuts are dropped.
    pub fn refined(&self) -> GridCondenser {
        let fine_axis = |a: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(2 * a.len() - 1);
            for w in a.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(*a.last().unwrap());
            out
        };
        let xs = fine_axis(&self.xs);
        let ys = fine_axis(&self.ys);
        let (nx, ny) = (xs.len(), ys.len());
        let mut a = vec![false; nx * ny];
        let mut c = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let ci: Vec<usize> = if i % 2 == 0 { vec![i / 2] } else { vec![i / 2, i / 2 + 1] };
                let cj: Vec<usize> = if j % 2 == 0 { vec![j / 2] } else { vec![j / 2, j / 2 + 1] };
                let mut all_a = true;
                let mut all_c = true;
                for &jj in &cj {
                    for &ii in &ci {
                        let k = self.node(ii, jj);
                        all_a &= self.a_mask[k];
                        all_c &= self.c_mask[k];
                    }
                }
                a[j * nx + i] = all_a;
                c[j * nx + i] = all_c;
            }
        }
        GridCondenser {
            xs,
            ys,
            a_mask: a,
            c_mask: c,
            cuts: Vec::new(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: CondenserFile = serde_json::from_str(s)?;
        f.into_condenser()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CondenserFile::from_condenser(self))?)
    }
}

/// JSON form of a [`GridCondenser`]. Masks are row strings listed from the
/// top row down, `#`/`1` for set nodes and `.`/`0` otherwise. Node
/// coordinates are either `origin + h·index` or explicit `xs`/`ys`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CondenserFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ys: Option<Vec<f64>>,
    pub a: Vec<String>,
    pub c: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cuts: Vec<Cut>,
}

fn parse_rows(rows: &[String], what: &str) -> Result<(usize, usize, Vec<bool>)> {
    let ny = rows.len();
    let nx = rows.first().map(|r| r.chars().count()).unwrap_or(0);
    if ny == 0 || nx == 0 || rows.iter().any(|r| r.chars().count() != nx) {
        return Err(Error::Malformed(format!("mask '{what}' must be a non-empty rectangle")));
    }
    let mut out = vec![false; nx * ny];
    for (r, row) in rows.iter().enumerate() {
        let j = ny - 1 - r;
        for (i, ch) in row.chars().enumerate() {
            out[j * nx + i] = match ch {
                '#' | '1' => true,
                '.' | '0' => false,
                other => return Err(Error::Malformed(format!("unexpected character '{other}' in mask '{what}'"))),
            };
        }
    }
    Ok((nx, ny, out))
}

fn format_rows(mask: &[bool], nx: usize, ny: usize) -> Vec<String> {
    (0..ny)
        .rev()
        .map(|j| (0..nx).map(|i| if mask[j * nx + i] { '#' } else { '.' }).collect())
        .collect()
}

impl CondenserFile {
    pub fn into_condenser(self) -> Result<GridCondenser> {
        let (nx, ny, a_mask) = parse_rows(&self.a, "a")?;
        let (cx, cy, c_mask) = parse_rows(&self.c, "c")?;
        if (cx, cy) != (nx, ny) {
            return Err(Error::Malformed("masks 'a' and 'c' differ in shape".into()));
        }
        let (xs, ys) = match (self.xs, self.ys, self.h) {
            (Some(xs), Some(ys), _) => (xs, ys),
            (None, None, Some(h)) => {
                if !(h > 0.0) {
                    return Err(Error::Malformed("spacing h must be positive".into()));
                }
                let o = self.origin.unwrap_or([0.0, 0.0]);
                (
                    (0..nx).map(|i| o[0] + h * i as f64).collect(),
                    (0..ny).map(|j| o[1] + h * j as f64).collect(),
                )
            }
            _ => return Err(Error::Malformed("give either 'h' or both 'xs' and 'ys'".into())),
        };
        if xs.len() != nx || ys.len() != ny {
            return Err(Error::Malformed("axis lengths do not match the masks".into()));
        }
        let cond = GridCondenser {
            xs,
            ys,
            a_mask,
            c_mask,
            cuts: self.cuts,
        };
        cond.validate()?;
        Ok(cond)
    }

    pub fn from_condenser(c: &GridCondenser) -> Self {
        let (nx, ny) = (c.nx(), c.ny());
        let h = c.xs[1] - c.xs[0];
        let uniform = |a: &[f64]| a.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.abs().max(1.0));
        let (h_opt, origin, xs, ys) = if uniform(&c.xs) && uniform(&c.ys) {
            (Some(h), Some([c.xs[0], c.ys[0]]), None, None)
        } else {
            (None, None, Some(c.xs.clone()), Some(c.ys.clone()))
        };
        CondenserFile {
            h: h_opt,
            origin,
            xs,
            ys,
            a: format_rows(&c.a_mask, nx, ny),
            c: format_rows(&c.c_mask, nx, ny),
            cuts: c.cuts.clone(),
        }
    }
}

/// Assembled linear system over the free nodes.
struct System {
    free_of: Vec<u32>,
    node_of: Vec<usize>,
    diag: Vec<f64>,
    /// coupling to the +x / +y free neighbor (positive weights)
    wx: Vec<f64>,
    wy: Vec<f64>,
    px: Vec<u32>,
    py: Vec<u32>,
    rhs: Vec<f64>,
}

fn assemble(c: &GridCondenser) -> System {
    let (nx, ny) = (c.nx(), c.ny());
    let total = nx * ny;
    let dx = dual_lengths(&c.xs);
    let dy = dual_lengths(&c.ys);
    let mut theta = vec![[1.0f64; 4]; 0];
    let has_cuts = !c.cuts.is_empty();
    if has_cuts {
        theta = vec![[1.0f64; 4]; total];
        for cut in &c.cuts {
            theta[cut.node][cut.dir.slot()] = cut.theta.max(MIN_THETA);
        }
    }
    let mut free_of = vec![NONE; total];
    let mut node_of = Vec::new();
    for idx in 0..total {
        if c.a_mask[idx] && !c.c_mask[idx] {
            free_of[idx] = node_of.len() as u32;
            node_of.push(idx);
        }
    }
    let m = node_of.len();
    let mut sys = System {
        free_of,
        node_of,
        diag: vec![0.0; m],
        wx: vec![0.0; m],
        wy: vec![0.0; m],
        px: vec![NONE; m],
        py: vec![NONE; m],
        rhs: vec![0.0; m],
    };
    for f in 0..m {
        let idx = sys.node_of[f];
        let (i, j) = (idx % nx, idx / nx);
        for dir in Dir::ALL {
            let Some(nb) = c.neighbor(idx, dir) else { continue };
            let w = match dir {
                Dir::PlusX => dy[j] / (c.xs[i + 1] - c.xs[i]),
                Dir::MinusX => dy[j] / (c.xs[i] - c.xs[i - 1]),
                Dir::PlusY => dx[i] / (c.ys[j + 1] - c.ys[j]),
                Dir::MinusY => dx[i] / (c.ys[j] - c.ys[j - 1]),
            };
            let g = sys.free_of[nb];
            if g != NONE {
                sys.diag[f] += w;
                match dir {
                    Dir::PlusX => {
                        sys.wx[f] = w;
                        sys.px[f] = g;
                    }
                    Dir::PlusY => {
                        sys.wy[f] = w;
                        sys.py[f] = g;
                    }
                    _ => {}
                }
            } else {
                let t = if has_cuts { theta[idx][dir.slot()] } else { 1.0 };
                let value = if c.c_mask[nb] { 1.0 } else { 0.0 };
                sys.diag[f] += w / t;
                sys.rhs[f] += w / t * value;
            }
        }
    }
    sys
}

impl System {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (f, yf) in y.iter_mut().enumerate() {
            *yf = self.diag[f] * x[f];
        }
        for f in 0..x.len() {
            let g = self.px[f];
            if g != NONE {
                let g = g as usize;
                y[f] -= self.wx[f] * x[g];
                y[g] -= self.wx[f] * x[f];
            }
            let g = self.py[f];
            if g != NONE {
                let g = g as usize;
                y[f] -= self.wy[f] * x[g];
                y[g] -= self.wy[f] * x[f];
            }
        }
    }
}

enum Precond {
    Jacobi(Vec<f64>),
    Mic0 {
        p: Vec<f64>,
        /// lower neighbors (-x, -y) of every free node
        mx: Vec<u32>,
        my: Vec<u32>,
    },
}

fn build_precond(sys: &System, kind: Preconditioner) -> Precond {
    let m = sys.diag.len();
    match kind {
        Preconditioner::Jacobi => Precond::Jacobi(sys.diag.iter().map(|d| 1.0 / d).collect()),
        Preconditioner::Mic0 => {
            const TAU: f64 = 0.97;
            const SIGMA: f64 = 0.25;
            let mut mx = vec![NONE; m];
            let mut my = vec![NONE; m];
            for f in 0..m {
                if sys.px[f] != NONE {
                    mx[sys.px[f] as usize] = f as u32;
                }
                if sys.py[f] != NONE {
                    my[sys.py[f] as usize] = f as u32;
                }
            }
            let mut p = vec![0.0; m];
            for f in 0..m {
                let mut e = sys.diag[f];
                let a = mx[f];
                if a != NONE {
                    let a = a as usize;
                    let t = sys.wx[a] * p[a];
                    e -= t * t + TAU * sys.wx[a] * sys.wy[a] * p[a] * p[a];
                }
                let b = my[f];
                if b != NONE {
                    let b = b as usize;
                    let t = sys.wy[b] * p[b];
                    e -= t * t + TAU * sys.wy[b] * sys.wx[b] * p[b] * p[b];
                }
                if e < SIGMA * sys.diag[f] {
                    e = sys.diag[f];
                }
                p[f] = 1.0 / e.sqrt();
            }
            Precond::Mic0 { p, mx, my }
        }
    }
}

impl Precond {
    fn apply(&self, sys: &System, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Precond::Mic0 { p, mx, my } => {
                let m = r.len();
                // forward: L q = r
                for f in 0..m {
                    let mut t = r[f];
                    let a = mx[f];
                    if a != NONE {
                        let a = a as usize;
                        t += sys.wx[a] * p[a] * z[a];
                    }
                    let b = my[f];
                    if b != NONE {
                        let b = b as usize;
                        t += sys.wy[b] * p[b] * z[b];
                    }
                    z[f] = t * p[f];
                }
                // backward: Lᵀ z = q
                for f in (0..m).rev() {
                    let mut t = z[f];
                    let a = sys.px[f];
                    if a != NONE {
                        t += sys.wx[f] * p[f] * z[a as usize];
                    }
                    let b = sys.py[f];
                    if b != NONE {
                        t += sys.wy[f] * p[f] * z[b as usize];
                    }
                    z[f] = t * p[f];
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(sys: &System, opts: &SolveOptions) -> Result<(Vec<f64>, usize, f64)> {
    let m = sys.diag.len();
    let pre = build_precond(sys, opts.precond);
    let bnorm = dot(&sys.rhs, &sys.rhs).sqrt();
    let mut x = vec![0.0; m];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut r = sys.rhs.clone();
    let mut z = vec![0.0; m];
    pre.apply(sys, &r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; m];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 1..=opts.max_iter {
        sys.apply(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        if res <= opts.tol {
            return Ok((x, it, res));
        }
        pre.apply(sys, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Dirichlet energy of the full node field `u`.
pub fn discrete_energy(c: &GridCondenser, u: &[f64]) -> f64 {
    let (nx, ny) = (c.nx(), c.ny());
    let dx = dual_lengths(&c.xs);
    let dy = dual_lengths(&c.ys);
    let mut theta: std::collections::HashMap<(usize, usize), f64> = std::collections::HashMap::new();
    for cut in &c.cuts {
        theta.insert((cut.node, cut.dir.slot()), cut.theta.max(MIN_THETA));
    }
    let free = |k: usize| c.a_mask[k] && !c.c_mask[k];
    let mut e = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let mut edge = |nb: usize, w: f64, dir: Dir, back: Dir| {
                let (fk, fn_) = (free(k), free(nb));
                if !fk && !fn_ {
                    return;
                }
                let t = if fk && !fn_ {
                    theta.get(&(k, dir.slot())).copied().unwrap_or(1.0)
                } else if fn_ && !fk {
                    theta.get(&(nb, back.slot())).copied().unwrap_or(1.0)
                } else {
                    1.0
                };
                let d = u[k] - u[nb];
                e += w / t * d * d;
            };
            if i + 1 < nx {
                edge(k + 1, dy[j] / (c.xs[i + 1] - c.xs[i]), Dir::PlusX, Dir::MinusX);
            }
            if j + 1 < ny {
                edge(k + nx, dx[i] / (c.ys[j + 1] - c.ys[j]), Dir::PlusY, Dir::MinusY);
            }
        }
    }
    e
}

/// Solve for the discrete potential and return it with the report.
pub fn solve_field(c: &GridCondenser, opts: &SolveOptions) -> Result<Solution> {
    ensure(opts.tol > 0.0, "solve_capacity", || "tolerance must be positive".into())?;
    c.validate()?;
    let sys = assemble(c);
    let (x, iterations, residual) = pcg(&sys, opts)?;
    let mut u: Vec<f64> = c.c_mask.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
    for (f, &idx) in sys.node_of.iter().enumerate() {
        u[idx] = x[f];
    }
    let capacity = discrete_energy(c, &u);
    Ok(Solution {
        report: SolveReport {
            capacity,
            iterations,
            residual,
            nodes: u.len(),
            free_nodes: sys.node_of.len(),
            preconditioner: opts.precond,
            refinement_estimates: None,
            extrapolated: None,
        },
        u,
    })
}

/// Capacity of the discrete condenser.
pub fn solve_capacity(c: &GridCondenser, opts: &SolveOptions) -> Result<SolveReport> {
    Ok(solve_field(c, opts)?.report)
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Solve on `c` and on its uniform refinement; report both values and the
/// extrapolated capacity.
pub fn solve_capacity_refined(c: &GridCondenser, opts: &SolveOptions) -> Result<SolveReport> {
    let coarse = solve_capacity(c, opts)?;
    let fine_cond = c.refined();
    let fine = solve_capacity(&fine_cond, opts)?;
    let h = c.xs[1] - c.xs[0];
    let mut rep = fine.clone();
    rep.refinement_estimates = Some(vec![(h, coarse.capacity), (h / 2.0, fine.capacity)]);
    rep.extrapolated = Some(richardson(coarse.capacity, fine.capacity));
    Ok(rep)
}

/// Point sets and shapes used to rasterize condensers.
#[derive(Clone, Debug)]
pub enum Region {
    Disk { center: [f64; 2], radius: f64, closed: bool },
    Rect { lo: [f64; 2], hi: [f64; 2], closed: bool },
    /// Closed segment (zero width).
    Segment { a: [f64; 2], b: [f64; 2] },
    /// Raster domain; isolated boundary points are ignored (they are polar).
    Mask(Arc<DomainMask>),
    /// Union of closed disks of the given radius around sample points; a grid
    /// node belongs to it when its dual cell meets one of the disks.
    Points { points: Vec<[f64; 2]>, radius: f64 },
    Union(Vec<Region>),
    /// Points of the first region that are not in the second.
    Minus(Box<Region>, Box<Region>),
    Plane,
}

impl Region {
    pub fn disk(center: [f64; 2], radius: f64) -> Region {
        Region::Disk {
            center,
            radius,
            closed: false,
        }
    }

    pub fn closed_disk(center: [f64; 2], radius: f64) -> Region {
        Region::Disk {
            center,
            radius,
            closed: true,
        }
    }

    /// Pointwise membership. `Points` regions answer by exact disk membership
    /// here; their grid rasterization uses the dual-cell rule instead.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Region::Disk { center, radius, closed } => {
                let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                if *closed {
                    d2 <= radius * radius
                } else {
                    d2 < radius * radius
                }
            }
            Region::Rect { lo, hi, closed } => {
                if *closed {
                    x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1]
                } else {
                    x > lo[0] && x < hi[0] && y > lo[1] && y < hi[1]
                }
            }
            Region::Segment { a, b } => {
                let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
                let len2 = vx * vx + vy * vy;
                let t = (((x - a[0]) * vx + (y - a[1]) * vy) / len2).clamp(0.0, 1.0);
                let (px, py) = (a[0] + t * vx, a[1] + t * vy);
                let scale = len2.sqrt().max(x.abs()).max(y.abs()).max(1.0);
                (x - px).hypot(y - py) <= 1e-12 * scale
            }
            Region::Mask(m) => m.contains_ignoring_punctures(&Point::xy(x, y)),
            Region::Points { points, radius } => points
                .iter()
                .any(|p| (x - p[0]).powi(2) + (y - p[1]).powi(2) <= radius * radius),
            Region::Union(parts) => parts.iter().any(|r| r.contains(x, y)),
            Region::Minus(a, b) => a.contains(x, y) && !b.contains(x, y),
            Region::Plane => true,
        }
    }

    fn has_points(&self) -> bool {
        match self {
            Region::Points { .. } => true,
            Region::Union(parts) => parts.iter().any(Region::has_points),
            Region::Minus(a, _) => a.has_points(),
            _ => false,
        }
    }

    /// Mark nodes for `Points` parts by the dual-cell rule.
    fn mark_points(&self, xs: &[f64], ys: &[f64], out: &mut [bool]) {
        match self {
            Region::Points { points, radius } => {
                let nx = xs.len();
                let lo_edge = |axis: &[f64], i: usize| if i == 0 { axis[0] } else { 0.5 * (axis[i - 1] + axis[i]) };
                let hi_edge = |axis: &[f64], i: usize| {
                    if i + 1 == axis.len() {
                        axis[i]
                    } else {
                        0.5 * (axis[i] + axis[i + 1])
                    }
                };
                let range = |axis: &[f64], lo: f64, hi: f64| -> (usize, usize) {
                    let a = axis.partition_point(|&v| v < lo).saturating_sub(1);
                    let b = axis.partition_point(|&v| v <= hi).min(axis.len() - 1);
                    (a, b)
                };
                for p in points {
                    let (i0, i1) = range(xs, p[0] - radius, p[0] + radius);
                    let (j0, j1) = range(ys, p[1] - radius, p[1] + radius);
                    for j in j0..=j1 {
                        for i in i0..=i1 {
                            let gx = (lo_edge(xs, i) - p[0]).max(p[0] - hi_edge(xs, i)).max(0.0);
                            let gy = (lo_edge(ys, j) - p[1]).max(p[1] - hi_edge(ys, j)).max(0.0);
                            if gx * gx + gy * gy <= radius * radius {
                                out[j * nx + i] = true;
                            }
                        }
                    }
                }
            }
            Region::Union(parts) => parts.iter().for_each(|r| r.mark_points(xs, ys, out)),
            _ => {}
        }
    }
}

/// Where along the segment `p → q` membership in `r` flips, as a fraction
/// measured from `p`.
fn crossing(r: &Region, p: (f64, f64), q: (f64, f64)) -> f64 {
    let at = |t: f64| r.contains(p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
    let start = at(0.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if at(mid) == start {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Rasterize the condenser `(A, C)` on the grid `xs × ys`, computing cut
/// fractions along every edge that leaves the free set.
pub fn rasterize(xs: Vec<f64>, ys: Vec<f64>, a: &Region, c: &Region) -> Result<GridCondenser> {
    check_axis("x", &xs)?;
    check_axis("y", &ys)?;
    let (nx, ny) = (xs.len(), ys.len());
    let mut a_mask = vec![false; nx * ny];
    let mut c_mask = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            a_mask[k] = a.contains(xs[i], ys[j]);
            if !c.has_points() {
                c_mask[k] = c.contains(xs[i], ys[j]);
            }
        }
    }
    if c.has_points() {
        c.mark_points(&xs, &ys, &mut c_mask);
    }
    for k in 0..nx * ny {
        c_mask[k] &= a_mask[k];
    }
    let mut cond = GridCondenser {
        xs,
        ys,
        a_mask,
        c_mask,
        cuts: Vec::new(),
    };
    let mut cuts = Vec::new();
    for k in 0..nx * ny {
        if !cond.a_mask[k] || cond.c_mask[k] {
            continue;
        }
        let p = cond.node_point(k);
        for dir in Dir::ALL {
            let Some(nb) = cond.neighbor(k, dir) else { continue };
            let q = cond.node_point(nb);
            let (pp, qq) = ((p.coords()[0], p.coords()[1]), (q.coords()[0], q.coords()[1]));
            let theta = if !cond.a_mask[nb] {
                crossing(a, pp, qq)
            } else if cond.c_mask[nb] && !c.has_points() {
                crossing(c, pp, qq)
            } else {
                continue;
            };
            if theta < 1.0 {
                cuts.push(Cut { node: k, dir, theta });
            }
        }
    }
    cond.cuts = cuts;
    Ok(cond)
}

/// `n + 1` equally spaced values on `[lo, hi]`.
pub fn uniform_axis(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let h = (hi - lo) / cells as f64;
    (0..=cells).map(|i| if i == cells { hi } else { lo + h * i as f64 }).collect()
}

/// An interval on which a graded axis uses the fine spacing `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Focus {
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
}

/// Axis on `[lo, hi]` whose spacing is at most
/// `min(coarse, min_f (h_f + (growth-1)·dist(x, focus_f)))`, passing exactly
/// through every pin.
pub fn graded_axis(lo: f64, hi: f64, coarse: f64, foci: &[Focus], pins: &[f64], growth: f64) -> Result<Vec<f64>> {
    const OP: &str = "graded_axis";
    ensure(lo < hi && coarse > 0.0 && growth > 1.0, OP, || {
        format!("need lo < hi, coarse > 0 and growth > 1 (got {lo}, {hi}, {coarse}, {growth})")
    })?;
    ensure(foci.iter().all(|f| f.h > 0.0 && f.lo <= f.hi), OP, || "invalid focus".into())?;
    let spacing = |x: f64| {
        foci.iter()
            .map(|f| {
                let d = (f.lo - x).max(x - f.hi).max(0.0);
                f.h + (growth - 1.0) * d
            })
            .fold(coarse, f64::min)
    };
    let mut knots: Vec<f64> = pins.iter().copied().filter(|&p| p > lo && p < hi).collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (hi - lo));
    let mut axis = vec![knots[0]];
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        // cumulative density ∫ dx / spacing(x) on a fine walk
        let mut xs = vec![a];
        let mut cum = vec![0.0];
        let mut x = a;
        while x < b {
            let step = (spacing(x) / 8.0).min(b - x);
            let mid = x + 0.5 * step;
            let next = if b - x - step <= 1e-15 * (b - a) { b } else { x + step };
            let c = cum.last().unwrap() + (next - x) / spacing(mid);
            x = next;
            xs.push(x);
            cum.push(c);
        }
        let total = *cum.last().unwrap();
        let cells = total.ceil().max(1.0) as usize;
        let mut seg = 0;
        for k in 1..cells {
            let target = total * k as f64 / cells as f64;
            while cum[seg + 1] < target {
                seg += 1;
            }
            let t = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
            axis.push(xs[seg] + t * (xs[seg + 1] - xs[seg]));
        }
        axis.push(b);
    }
    Ok(axis)
}

/// `ω_{n-1} (log(b/a))^{1-n}`: capacity of the ring `a < |x| < b`.
pub fn ring_modulus_exact(n: usize, a: f64, b: f64) -> Result<f64> {
    const OP: &str = "ring_modulus_exact";
    ensure(0.0 < a && a < b, OP, || format!("need 0 < a < b, got a={a}, b={b}"))?;
    Ok(specfun::sphere_area(n)? * (b / a).ln().powi(1 - n as i32))
}

/// Rasterized ring condenser `(B(0, b), B̄(0, a))` on a uniform grid with
/// `cells` cells per outer radius.
pub fn annulus_condenser(a: f64, b: f64, cells: usize) -> Result<GridCondenser> {
    ensure(0.0 < a && a < b, "annulus_condenser", || format!("need 0 < a < b, got a={a}, b={b}"))?;
    let axis = uniform_axis(-b, b, 2 * cells);
    rasterize(axis.clone(), axis, &Region::disk([0.0, 0.0], b), &Region::closed_disk([0.0, 0.0], a))
}

/// `cap(x, E, r)`: the condenser `(B(x, 2r), E ∩ B̄(x, r))` with the sample
/// points of `E` fattened by `E.resolution`, on a uniform grid with
/// `2^grid_level` cells across the outer radius.
pub fn cap_x_e_r(x: &Point, e: &CompactSet, r: f64, grid_level: u32, opts: &SolveOptions) -> Result<SolveReport> {
    cap_x_e_r_outer(x, e, r, 2.0, grid_level, opts)
}

/// As [`cap_x_e_r`] with the outer ball `B(x, outer·r)`, `outer > 1`.
pub fn cap_x_e_r_outer(
    x: &Point,
    e: &CompactSet,
    r: f64,
    outer: f64,
    grid_level: u32,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    const OP: &str = "cap_xEr";
    ensure(r > 0.0, OP, || format!("r must be positive, got {r}"))?;
    ensure(outer > 1.0, OP, || format!("outer radius factor must exceed 1, got {outer}"))?;
    ensure(e.n == 2 && x.dim() == 2, OP, || "planar sets only".into())?;
    let pts: Vec<[f64; 2]> = e
        .restrict_to_ball(x, r)
        .iter()
        .map(|p| [p.coords()[0], p.coords()[1]])
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptySet { op: OP });
    }
    let (cx, cy) = (x.coords()[0], x.coords()[1]);
    let cells = 1usize << grid_level;
    let reach = outer * r;
    let per_r = (cells as f64 / 2.0 * outer).ceil() as usize;
    let xs = uniform_axis(cx - reach, cx + reach, 2 * per_r);
    let ys = uniform_axis(cy - reach, cy + reach, 2 * per_r);
    let cond = rasterize(
        xs,
        ys,
        &Region::disk([cx, cy], reach),
        &Region::Points {
            points: pts,
            radius: e.resolution,
        },
    )?;
    solve_capacity(&cond, opts)
}

/// Lower bound for the modulus of curves joining two continua at relative
/// distance `m` (Teichmüller bound `τ₂(4m²+4m)`), halved when the curves are
/// confined to a ball.
pub fn ringcap_lower(m: f64, in_ball: bool) -> Result<f64> {
    ensure(m > 0.0, "ringcap_lower", || format!("m must be positive, got {m}"))?;
    let t = specfun::teichmuller_tau2(4.0 * m * m + 4.0 * m)?;
    Ok(if in_ball { 0.5 * t } else { t })
}

/// Grötzsch condenser `(B², [0, r])` on a graded grid; its exact capacity is
/// `2π/μ(r) = 2 τ₂((1-r²)/r²)`.
pub fn grotzsch_condenser(r: f64, fine: f64) -> Result<GridCondenser> {
    ensure(r > 0.0 && r < 1.0, "grotzsch_condenser", || format!("r must lie in (0,1), got {r}"))?;
    let foci = [
        Focus { lo: 0.0, hi: r, h: fine },
        Focus { lo: -1.0, hi: 1.0, h: 8.0 * fine },
    ];
    let xs = graded_axis(-1.0, 1.0, 0.05, &foci, &[0.0, r], 1.1)?;
    let ys = graded_axis(-1.0, 1.0, 0.05, &[Focus { lo: 0.0, hi: 0.0, h: fine }], &[0.0], 1.1)?;
    rasterize(xs, ys, &Region::disk([0.0, 0.0], 1.0), &Region::Segment { a: [0.0, 0.0], b: [r, 0.0] })
}

/// Truncated Teichmüller ring: plate `[-1, 0]`, complement component
/// `[s, ∞)` cut at the box `[-L, L]²`. With `closed_box` the box boundary is
/// held at 0 (an upper bound for `τ₂(s)`); otherwise it is free (a lower
/// bound).
pub fn teichmuller_condenser(s: f64, fine: f64, half_width: f64, closed_box: bool) -> Result<GridCondenser> {
    ensure(s > 0.0 && half_width > 2.0 * (s + 1.0), "teichmuller_condenser", || {
        format!("need s > 0 and a box wider than the ring, got s={s}, L={half_width}")
    })?;
    let l = half_width;
    let foci = [
        Focus { lo: -1.0, hi: 0.0, h: fine },
        Focus { lo: s, hi: s, h: fine },
    ];
    let coarse = l / 16.0;
    let xs = graded_axis(-l, l, coarse, &foci, &[-1.0, 0.0, s], 1.15)?;
    let ys = graded_axis(-l, l, coarse, &[Focus { lo: 0.0, hi: 0.0, h: fine }], &[0.0], 1.15)?;
    let ray = Region::Segment { a: [s, 0.0], b: [l, 0.0] };
    let outer = if closed_box {
        Region::Rect { lo: [-l, -l], hi: [l, l], closed: false }
    } else {
        Region::Plane
    };
    let a = Region::Minus(Box::new(outer), Box::new(ray));
    rasterize(xs, ys, &a, &Region::Segment { a: [-1.0, 0.0], b: [0.0, 0.0] })
}

/// Bracket `τ₂(s)` between the free-box and the closed-box truncation.
pub fn teichmuller_bracket(s: f64, fine: f64, half_width: f64, opts: &SolveOptions) -> Result<(f64, f64)> {
    let lower = solve_capacity(&teichmuller_condenser(s, fine, half_width, false)?, opts)?.capacity;
    let upper = solve_capacity(&teichmuller_condenser(s, fine, half_width, true)?, opts)?.capacity;
    Ok((lower, upper))
}

/// Exact capacity `2π/log(b/a)` used as the planar ring reference.
pub fn planar_ring(a: f64, b: f64) -> f64 {
    2.0 * PI / (b / a).ln()
}
