//! Distance-ratio and quasihyperbolic metrics on raster domains.
//!
//! The quasihyperbolic distance is approximated by shortest paths in a graph
//! whose nodes are cell centres (or Whitney-cube centres) and whose edge
//! weights are `|step| / d(midpoint, ∂G)`. Graph paths are genuine polygonal
//! paths in `G`, so the approximation sits above the true distance up to the
//! quadrature error of the midpoint rule, and it exceeds it by at most the
//! 8-neighbour chord factor for straight segments.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::geom::Point;
use crate::mask::{DomainMask, HalfLattice};
use crate::whitney::WhitneyDecomposition;

/// Worst-case ratio between an 8-neighbour lattice path and the straight
/// segment it follows, `1/cos(π/8)`.
pub const CHORD_FACTOR: f64 = 1.082_392_200_292_393_9;

/// `j_G(x, y) = log(1 + |x-y| / min(d(x), d(y)))`.
pub fn j_metric(dx: f64, dy: f64, dist_xy: f64) -> Result<f64> {
    ensure(dx > 0.0 && dy > 0.0, "j_metric", || {
        format!("boundary distances must be positive, got {dx} and {dy}")
    })?;
    ensure(dist_xy >= 0.0, "j_metric", || format!("distance must be non-negative, got {dist_xy}"))?;
    Ok((dist_xy / dx.min(dy)).ln_1p())
}

/// `j_G` evaluated on a mask.
pub fn j_metric_in(g: &DomainMask, x: &Point, y: &Point) -> Result<f64> {
    j_metric(g.boundary_distance(x), g.boundary_distance(y), x.dist(y))
}

/// `C^{1 + k / (2 log(1+s))}`: Harnack constant after chaining along a
/// quasihyperbolic distance `k`.
pub fn harnack_chain_bound(c: f64, s: f64, k: f64) -> Result<f64> {
    ensure(c > 1.0 && s > 0.0 && s < 1.0 && k >= 0.0, "harnack_chain_bound", || {
        format!("need C > 1, s in (0,1), k >= 0; got C={c}, s={s}, k={k}")
    })?;
    Ok(c.powf(1.0 + k / (2.0 * s.ln_1p())))
}

/// Result of a quasihyperbolic query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QhReport {
    pub value: f64,
    /// Additive discretization allowance: `value - tolerance` is a safe lower
    /// estimate of `k_G`, `value` an upper one up to the same allowance.
    pub tolerance: f64,
    pub settled: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

enum Nodes<'a> {
    Cells { nx: usize, ny: usize, lat: HalfLattice },
    Cubes { d: &'a WhitneyDecomposition, adj: Vec<Vec<usize>> },
}

/// Weighted graph approximating the quasihyperbolic metric of a planar
/// domain. Distances to the boundary are computed lazily.
pub struct DomainGraph<'a> {
    g: &'a DomainMask,
    nodes: Nodes<'a>,
    /// Spacing scale used in the tolerance model.
    h: f64,
}

impl<'a> DomainGraph<'a> {
    /// Graph on the cell centres of `g` with 8-neighbour moves. Diagonal
    /// moves need all four cells around the shared corner inside `G`.
    pub fn from_mask(g: &'a DomainMask) -> Result<Self> {
        if g.n() != 2 {
            return Err(Error::Unsupported(format!(
                "quasihyperbolic graphs are planar, mask has n = {}",
                g.n()
            )));
        }
        Ok(DomainGraph {
            g,
            nodes: Nodes::Cells {
                nx: g.dims()[0],
                ny: g.dims()[1],
                lat: g.half_lattice_dist2()?,
            },
            h: g.cell_side(),
        })
    }

    /// Graph on Whitney-cube centres joined across shared faces.
    pub fn from_whitney(g: &'a DomainMask, d: &'a WhitneyDecomposition) -> Result<Self> {
        if g.n() != 2 || d.n != 2 {
            return Err(Error::Unsupported("quasihyperbolic graphs are planar".into()));
        }
        if d.cubes.is_empty() {
            return Err(Error::EmptySet { op: "quasihyperbolic_approx" });
        }
        let mut adj = vec![Vec::new(); d.cubes.len()];
        for &(i, j) in &d.adjacency {
            adj[i].push(j);
            adj[j].push(i);
        }
        Ok(DomainGraph {
            g,
            nodes: Nodes::Cubes { d, adj },
            h: 0.5f64.powi(d.k_max as i32),
        })
    }

    pub fn len(&self) -> usize {
        match &self.nodes {
            Nodes::Cells { nx, ny, .. } => nx * ny,
            Nodes::Cubes { d, .. } => d.cubes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn position(&self, v: usize) -> Point {
        match &self.nodes {
            Nodes::Cells { nx, .. } => self.g.cell_center(&[(v % nx) as i64, (v / nx) as i64]),
            Nodes::Cubes { d, .. } => d.cubes[v].center(),
        }
    }

    fn valid(&self, v: usize) -> bool {
        match &self.nodes {
            Nodes::Cells { nx, .. } => self.g.cell_inside(&[(v % nx) as i64, (v / nx) as i64]),
            Nodes::Cubes { .. } => true,
        }
    }

    /// Neighbours of `v` with their edge weights.
    fn neighbors(&self, v: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        match &self.nodes {
            Nodes::Cells { nx, ny, lat } => {
                let (nx, ny) = (*nx as i64, *ny as i64);
                let (i, j) = ((v as i64) % nx, (v as i64) / nx);
                let ok = |a: i64, b: i64| a >= 0 && b >= 0 && a < nx && b < ny && self.valid((b * nx + a) as usize);
                let half = 0.5 * self.h;
                let mut push = |di: i64, dj: i64| {
                    let d2 = lat.get((2 * i + 1 + di) as usize, (2 * j + 1 + dj) as usize);
                    if d2 > 0.0 {
                        let step = ((di * di + dj * dj) as f64).sqrt() * self.h;
                        out.push((((j + dj) * nx + i + di) as usize, step / (d2.sqrt() * half)));
                    }
                };
                for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if ok(i + di, j + dj) {
                        push(di, dj);
                    }
                }
                for (di, dj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    if ok(i + di, j + dj) && ok(i + di, j) && ok(i, j + dj) {
                        push(di, dj);
                    }
                }
            }
            Nodes::Cubes { adj, .. } => {
                let p = self.position(v);
                for &u in &adj[v] {
                    out.push((u, self.edge_weight(&p, &self.position(u))));
                }
            }
        }
    }

    fn edge_weight(&self, p: &Point, q: &Point) -> f64 {
        let d = self.g.boundary_distance(&p.midpoint(q));
        if d > 0.0 {
            p.dist(q) / d
        } else {
            f64::INFINITY
        }
    }

    /// Graph nodes that an endpoint links to directly: the cell containing
    /// it and its 8 neighbours (or the cube containing it and its
    /// neighbours).
    fn anchors(&self, x: &Point) -> Vec<usize> {
        match &self.nodes {
            Nodes::Cells { nx, ny, .. } => {
                let h = self.h;
                let o = self.g.origin();
                let ci = (x.coords()[0] / h).floor() as i64 - o[0];
                let cj = (x.coords()[1] / h).floor() as i64 - o[1];
                let mut out = Vec::new();
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (a, b) = (ci + di, cj + dj);
                        if a >= 0 && b >= 0 && (a as usize) < *nx && (b as usize) < *ny {
                            let v = b as usize * nx + a as usize;
                            if self.valid(v) {
                                out.push(v);
                            }
                        }
                    }
                }
                out
            }
            Nodes::Cubes { d, adj } => {
                let Some(home) = d.cubes.iter().position(|c| c.contains(x)) else {
                    return Vec::new();
                };
                let mut out = vec![home];
                out.extend_from_slice(&adj[home]);
                out
            }
        }
    }

    /// Shortest-path approximation of `k_G(x, y)`.
    pub fn quasihyperbolic(&self, x: &Point, y: &Point) -> Result<QhReport> {
        const OP: &str = "quasihyperbolic_approx";
        for p in [x, y] {
            if p.dim() != 2 || !self.g.contains(p) {
                return Err(Error::domain(OP, format!("point {:?} is not in G", p.coords())));
            }
        }
        let (dx, dy) = (self.g.boundary_distance(x), self.g.boundary_distance(y));
        let tolerance = self.tolerance(dx, dy, x.dist(y));
        if x.dist(y) == 0.0 {
            return Ok(QhReport {
                value: 0.0,
                tolerance: 0.0,
                settled: 0,
            });
        }
        // a straight segment that stays well inside the domain needs no graph
        let direct = self.segment_length(x, y);
        let sources = self.anchors(x);
        let targets: HashMap<usize, f64> = self
            .anchors(y)
            .into_iter()
            .map(|v| (v, self.edge_weight(&self.position(v), y)))
            .filter(|(_, w)| w.is_finite())
            .collect();
        if sources.is_empty() || targets.is_empty() {
            return Err(Error::domain(OP, "endpoint has no graph neighbours inside G".to_string()));
        }
        let mut best = direct;
        let mut cost = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        for v in sources {
            let w = self.edge_weight(x, &self.position(v));
            if w.is_finite() && w < cost[v] {
                cost[v] = w;
                heap.push(State { cost: w, node: v });
            }
        }
        let mut settled = 0;
        let mut nbrs = Vec::new();
        while let Some(State { cost: c, node: v }) = heap.pop() {
            if c > cost[v] {
                continue;
            }
            if c >= best {
                break;
            }
            settled += 1;
            if let Some(&t) = targets.get(&v) {
                best = best.min(c + t);
            }
            self.neighbors(v, &mut nbrs);
            for &(u, w) in &nbrs {
                let nc = c + w;
                if nc < cost[u] {
                    cost[u] = nc;
                    heap.push(State { cost: nc, node: u });
                }
            }
        }
        if !best.is_finite() {
            return Err(Error::domain(OP, "endpoints lie in different components".to_string()));
        }
        Ok(QhReport {
            value: best,
            tolerance,
            settled,
        })
    }

    /// Midpoint-rule length of the straight segment `x → y` split into
    /// pieces of length about `h`, or infinity if it leaves `G`.
    fn segment_length(&self, x: &Point, y: &Point) -> f64 {
        let pieces = ((x.dist(y) / self.h).ceil() as usize).max(1);
        let mut total = 0.0;
        let dir: Vec<f64> = y.coords().iter().zip(x.coords()).map(|(b, a)| b - a).collect();
        let mut prev = x.clone();
        for k in 1..=pieces {
            let next = if k == pieces {
                y.clone()
            } else {
                x.offset(&dir, k as f64 / pieces as f64)
            };
            let w = self.edge_weight(&prev, &next);
            if !w.is_finite() {
                return f64::INFINITY;
            }
            total += w;
            prev = next;
        }
        total
    }

    /// Additive allowance for the graph value: the chord-factor excess of a
    /// lattice path over a straight one plus a first-order quadrature term
    /// `2h / min(d(x), d(y))` from the endpoint links.
    pub fn tolerance(&self, dx: f64, dy: f64, dist_xy: f64) -> f64 {
        let m = dx.min(dy);
        let straight = dist_xy / m;
        (CHORD_FACTOR - 1.0) * straight.min((1.0 + straight).ln() * 4.0) + 2.0 * self.h / m
    }

    /// Spacing scale of the graph.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Boundary distance at graph node `v`.
    pub fn distance_at(&self, v: usize) -> f64 {
        match &self.nodes {
            Nodes::Cells { nx, lat, .. } => lat.get(2 * (v % nx) + 1, 2 * (v / nx) + 1).sqrt() * 0.5 * self.h,
            Nodes::Cubes { .. } => self.g.boundary_distance(&self.position(v)),
        }
    }
}

/// Shortest-path approximation of `k_G(x, y)` on the cell graph of `g`.
pub fn quasihyperbolic_approx(g: &DomainMask, x: &Point, y: &Point) -> Result<QhReport> {
    DomainGraph::from_mask(g)?.quasihyperbolic(x, y)
}

/// Outcome of a φ-uniformity check on sampled pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `k - φ(t) - tolerance` seen, where `t = |x-y|/min(d(x), d(y))`.
    pub worst_excess: f64,
}

/// Check `k_G(x, y) ≤ φ(|x-y| / min(d(x), d(y)))` on the given pairs, with
/// the graph's chord factor and tolerance allowed on top of `φ`.
pub fn phi_uniform_check<F: Fn(f64) -> f64>(g: &DomainMask, pairs: &[(Point, Point)], phi: F) -> Result<PhiReport> {
    let graph = DomainGraph::from_mask(g)?;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (x, y) in pairs {
        let rep = graph.quasihyperbolic(x, y)?;
        let t = x.dist(y) / g.boundary_distance(x).min(g.boundary_distance(y));
        let excess = rep.value - CHORD_FACTOR * phi(t) - rep.tolerance;
        worst = worst.max(excess);
        if excess > 0.0 {
            violations += 1;
        }
    }
    Ok(PhiReport {
        pairs: pairs.len(),
        violations,
        worst_excess: worst,
    })
}
