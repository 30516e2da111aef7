//! The capacity test function `u_α(z) = cap(G, B̄(z, α d(z, ∂G)))` and the
//! Whitney-cube capacity checks built on it.
//!
//! Every evaluation is one planar condenser solve on a graded rectilinear
//! grid: fine around the plate, geometric growth away from it, and pinned to
//! the lattice lines on which the raster boundary of `G` lies. Isolated
//! boundary points (punctures) do not enter the condenser, since points have
//! zero capacity, but they do enter `d(z, ∂G)` and therefore the plate size.
//!
//! For a Whitney cube `Q` the quantity `cap(ℝⁿ∖Q, ∂G)` is the
//! modulus of the curves joining `Q` to `∂G`. Each such curve has a subcurve
//! inside `G`, so the family has the modulus of the condenser `(G, Q)`, which
//! is what [`cube_capacity`] solves.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity2d::{graded_axis, rasterize, solve_capacity, Focus, Region, SolveOptions, SolveReport};
use crate::error::{ensure, Error, Result};
use crate::geom::Point;
use crate::mask::DomainMask;
use crate::metrics::harnack_chain_bound;
use crate::specfun;
use crate::whitney::{WhitneyCube, WhitneyDecomposition};

/// Default `α`; any fixed value in `(0, 1)` characterizes uniform perfectness.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// A planar domain on which test functions are evaluated.
#[derive(Clone, Debug)]
pub enum TestDomain {
    Mask(Arc<DomainMask>),
    /// Open disk, handled analytically (cut cells on its circle).
    Disk { center: [f64; 2], radius: f64 },
}

impl TestDomain {
    pub fn mask(g: DomainMask) -> Self {
        TestDomain::Mask(Arc::new(g))
    }

    pub fn boundary_distance(&self, z: &Point) -> f64 {
        match self {
            TestDomain::Mask(g) => g.boundary_distance(z),
            TestDomain::Disk { center, radius } => {
                (radius - Point::xy(center[0], center[1]).dist(z)).max(0.0)
            }
        }
    }

    fn region(&self) -> Region {
        match self {
            TestDomain::Mask(g) => Region::Mask(g.clone()),
            TestDomain::Disk { center, radius } => Region::disk(*center, *radius),
        }
    }

    fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            TestDomain::Mask(g) => {
                let (lo, hi) = g.bbox();
                ([lo[0], lo[1]], [hi[0], hi[1]])
            }
            TestDomain::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    /// Lattice coordinates, per axis, that carry a piece of the raster
    /// boundary.
    fn pins(&self) -> [Vec<f64>; 2] {
        match self {
            TestDomain::Mask(g) => boundary_lines(g),
            TestDomain::Disk { center, radius } => [
                vec![center[0] - radius, center[0], center[0] + radius],
                vec![center[1] - radius, center[1], center[1] + radius],
            ],
        }
    }
}

fn boundary_lines(g: &DomainMask) -> [Vec<f64>; 2] {
    let (nx, ny) = (g.dims()[0] as i64, g.dims()[1] as i64);
    let h = g.cell_side();
    let o = g.origin();
    let mut xs = BTreeSet::new();
    let mut ys = BTreeSet::new();
    for j in -1..=ny {
        for i in -1..=nx {
            let here = g.cell_inside(&[i, j]);
            if here != g.cell_inside(&[i + 1, j]) {
                xs.insert(o[0] + i + 1);
            }
            if here != g.cell_inside(&[i, j + 1]) {
                ys.insert(o[1] + j + 1);
            }
        }
    }
    [
        xs.into_iter().map(|v| v as f64 * h).collect(),
        ys.into_iter().map(|v| v as f64 * h).collect(),
    ]
}

/// Grid and solver settings for test-function evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalOptions {
    /// Grid cells across the plate radius (or the cube half-side).
    pub plate_cells: usize,
    /// Geometric growth factor of the spacing away from the plate.
    pub growth: f64,
    /// Largest spacing as a fraction of the domain extent.
    pub coarse_fraction: f64,
    #[serde(skip)]
    pub solve: SolveOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            plate_cells: 16,
            growth: 1.15,
            coarse_fraction: 1.0 / 32.0,
            solve: SolveOptions::default(),
        }
    }
}

/// One evaluation of `u_α`.
#[derive(Clone, Debug, Serialize)]
pub struct TestFnSample {
    pub z: Point,
    pub alpha: f64,
    pub value: f64,
    pub boundary_distance: f64,
    pub plate_radius: f64,
    pub solver: SolveReport,
}

/// `cap(G, C)` for a plate centred at `centre` with half-width `half`, lying
/// at distance at least `gap` from `∂G`. The fine spacing resolves both the
/// plate and the gap.
fn plate_capacity(
    g: &TestDomain,
    plate: &Region,
    centre: [f64; 2],
    half: f64,
    gap: f64,
    opts: &EvalOptions,
) -> Result<SolveReport> {
    let (lo, hi) = g.bbox();
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let fine = (half / opts.plate_cells as f64).min(0.25 * gap);
    let coarse = (extent * opts.coarse_fraction).max(fine);
    let pins = g.pins();
    let mut axes = Vec::with_capacity(2);
    for a in 0..2 {
        let focus = [Focus {
            lo: centre[a] - half,
            hi: centre[a] + half,
            h: fine,
        }];
        let mut p = pins[a].clone();
        p.extend([centre[a] - half, centre[a], centre[a] + half]);
        axes.push(graded_axis(lo[a], hi[a], coarse, &focus, &p, opts.growth)?);
    }
    let ys = axes.pop().unwrap();
    let xs = axes.pop().unwrap();
    let cond = rasterize(xs, ys, &g.region(), plate)?;
    solve_capacity(&cond, &opts.solve)
}

/// `cap(G, B̄(z, ρ))`.
pub fn ball_capacity(g: &TestDomain, z: &Point, rho: f64, opts: &EvalOptions) -> Result<SolveReport> {
    ensure(rho > 0.0, "ball_capacity", || format!("radius must be positive, got {rho}"))?;
    let c = [z.coords()[0], z.coords()[1]];
    let gap = g.boundary_distance(z) - rho;
    ensure(gap > 0.0, "ball_capacity", || format!("closed ball of radius {rho} is not inside G"))?;
    plate_capacity(g, &Region::closed_disk(c, rho), c, rho, gap, opts)
}

/// `u_α(z) = cap(G, B̄(z, α d(z, ∂G)))`.
pub fn u_alpha(g: &TestDomain, z: &Point, alpha: f64, opts: &EvalOptions) -> Result<TestFnSample> {
    const OP: &str = "u_alpha";
    ensure(alpha > 0.0 && alpha < 1.0, OP, || format!("alpha must lie in (0,1), got {alpha}"))?;
    ensure(z.dim() == 2, OP, || "planar points only".into())?;
    let d = g.boundary_distance(z);
    if !(d > 0.0) {
        return Err(Error::domain(OP, format!("point {:?} is not in G", z.coords())));
    }
    let rho = alpha * d;
    let solver = ball_capacity(g, z, rho, opts)?;
    Ok(TestFnSample {
        z: z.clone(),
        alpha,
        value: solver.capacity,
        boundary_distance: d,
        plate_radius: rho,
        solver,
    })
}

/// `cap(G, Q)` for a closed dyadic cube inside `G`.
pub fn cube_capacity(g: &TestDomain, q: &WhitneyCube, opts: &EvalOptions) -> Result<SolveReport> {
    ensure(q.corner.len() == 2, "cube_capacity", || "planar cubes only".into())?;
    let lo = q.lower();
    let s = q.side();
    let plate = Region::Rect {
        lo: [lo[0], lo[1]],
        hi: [lo[0] + s, lo[1] + s],
        closed: true,
    };
    // a Whitney cube is at least its own side away from the boundary
    plate_capacity(g, &plate, [lo[0] + 0.5 * s, lo[1] + 0.5 * s], 0.5 * s, s, opts)
}

/// Ratio `a = log β / log α` of the radial stretch taking `B(α)` to `B(β)`,
/// turned into a dilatation `max{a^{n-1}, a^{1-n}} ≥ 1`. The printed
/// constant `a^{n-1}` is below 1 for `α < β` and cannot majorize; the
/// dilatation of the radial map is what the comparison actually uses.
pub fn moduli_sandwich_factor(alpha: f64, beta: f64, n: usize) -> Result<f64> {
    ensure(0.0 < alpha && alpha < beta && beta < 1.0, "moduli_sandwich_factor", || {
        format!("need 0 < alpha < beta < 1, got alpha={alpha}, beta={beta}")
    })?;
    ensure(n >= 2, "moduli_sandwich_factor", || format!("dimension must be at least 2, got {n}"))?;
    let a = beta.ln() / alpha.ln();
    let e = n as i32 - 1;
    Ok(a.powi(e).max(a.powi(-e)))
}

/// Harnack constant of `u_α` for balls `B̄(z, s d(z, ∂G))`:
/// `max{ρ^{n-1}, ρ^{1-n}}` with `ρ = log((1+s)α+s) / log α`.
pub fn harnack_params(alpha: f64, s: f64, n: usize) -> Result<f64> {
    const OP: &str = "harnack_params";
    ensure(alpha > 0.0 && alpha < 1.0 && s > 0.0, OP, || {
        format!("need alpha in (0,1) and s > 0, got alpha={alpha}, s={s}")
    })?;
    let t = (1.0 + s) * alpha + s;
    ensure(t < 1.0, OP, || format!("(1+s)·alpha + s = {t} must be below 1"))?;
    ensure(n >= 2, OP, || format!("dimension must be at least 2, got {n}"))?;
    let rho = t.ln() / alpha.ln();
    let e = n as i32 - 1;
    Ok(rho.powi(e).max(rho.powi(-e)))
}

/// A Harnack step size admissible for `α`: half of the largest `s` with
/// `(1+s)α + s < 1`.
pub fn harnack_step(alpha: f64) -> f64 {
    0.5 * (1.0 - alpha) / (1.0 + alpha)
}

/// Factor `a(c)` with `u_α(z) ≥ a(c) · u_α(x)` whenever
/// `z ∈ B(x, c·d(x, ∂G))`: a Harnack chain along the quasihyperbolic distance
/// `log(1/(1-c))` of such pairs.
pub fn harnack_correction(alpha: f64, c: f64, n: usize) -> Result<f64> {
    ensure(c > 0.0 && c < 1.0, "harnack_correction", || format!("c must lie in (0,1), got {c}"))?;
    let s = harnack_step(alpha);
    let big_c = harnack_params(alpha, s, n)?;
    let k = -(1.0 - c).ln();
    Ok(1.0 / harnack_chain_bound(big_c.max(1.0 + 1e-15), s, k)?)
}

/// `c = exp(-(2ⁿ ω_{n-1} / γ)^{1/(n-1)})`: the uniform-perfectness
/// parameter implied by `u_α ≥ γ`.
pub fn up_param_from_inf_u(n: usize, gamma: f64) -> Result<f64> {
    ensure(gamma > 0.0, "up_param_from_inf_u", || format!("gamma must be positive, got {gamma}"))?;
    let omega = specfun::sphere_area(n)?;
    let x = 2f64.powi(n as i32) * omega / gamma;
    Ok((-x.powf(1.0 / (n as f64 - 1.0))).exp())
}

/// Symmetries of the mask (as maps on absolute cell coordinates) used to
/// share solves between congruent cubes.
#[derive(Clone, Debug)]
struct Symmetries {
    /// twice the centre, in cells
    c2: [i64; 2],
    level: u32,
    ops: Vec<u8>,
}

impl Symmetries {
    fn of(g: &DomainMask) -> Symmetries {
        let o = g.origin();
        let d = g.dims();
        let c2 = [2 * o[0] + d[0] as i64, 2 * o[1] + d[1] as i64];
        let mut ops = vec![0u8];
        let square = d[0] == d[1] && c2[0] == c2[1];
        for op in 1u8..8 {
            if !square && op & 4 != 0 {
                continue;
            }
            let fixes = (0..d[1] as i64).all(|j| {
                (0..d[0] as i64).all(|i| {
                    let (a, b) = Self::apply_cell(op, c2, o[0] + i, o[1] + j);
                    g.cell_inside(&[i, j]) == g.cell_inside(&[a - o[0], b - o[1]])
                })
            });
            let mut p0: Vec<Vec<i64>> = g.punctures().to_vec();
            let mut p1: Vec<Vec<i64>> = g
                .punctures()
                .iter()
                .map(|p| {
                    let (a, b) = Self::apply_vertex(op, c2, p[0], p[1]);
                    vec![a, b]
                })
                .collect();
            p0.sort();
            p1.sort();
            if fixes && p0 == p1 {
                ops.push(op);
            }
        }
        Symmetries {
            c2,
            level: g.level(),
            ops,
        }
    }

    /// bit 0: reflect x, bit 1: reflect y, bit 2: swap axes (applied last)
    fn apply_vertex(op: u8, c2: [i64; 2], x: i64, y: i64) -> (i64, i64) {
        let x = if op & 1 != 0 { c2[0] - x } else { x };
        let y = if op & 2 != 0 { c2[1] - y } else { y };
        // swaps are only used when both centre coordinates agree
        if op & 4 != 0 {
            (y, x)
        } else {
            (x, y)
        }
    }

    fn apply_cell(op: u8, c2: [i64; 2], i: i64, j: i64) -> (i64, i64) {
        // a cell is the vertex pair (i, j)-(i+1, j+1)
        let (a, b) = Self::apply_vertex(op, c2, i, j);
        let (c, d) = Self::apply_vertex(op, c2, i + 1, j + 1);
        (a.min(c), b.min(d))
    }

    /// Smallest image of the cube under the symmetry group, used as a key.
    fn canonical(&self, q: &WhitneyCube) -> (u32, Vec<i64>) {
        let mut best = (q.k, q.corner.clone());
        if q.k > self.level || q.corner.len() != 2 {
            return best;
        }
        let s = 1i64 << (self.level - q.k);
        for &op in &self.ops[1..] {
            let (a, b) = Self::apply_vertex(op, self.c2, q.corner[0] * s, q.corner[1] * s);
            let (c, d) = Self::apply_vertex(op, self.c2, (q.corner[0] + 1) * s, (q.corner[1] + 1) * s);
            let (lx, ly) = (a.min(c), b.min(d));
            if lx % s != 0 || ly % s != 0 {
                continue;
            }
            let cand = (q.k, vec![lx / s, ly / s]);
            if cand < best {
                best = cand;
            }
        }
        best
    }
}

/// Result of scanning `u_α` over Whitney-cube centres.
#[derive(Clone, Debug, Serialize)]
pub struct InfScan {
    pub alpha: f64,
    pub inf_estimate: f64,
    pub argmin: Point,
    pub samples: usize,
    pub distinct_solves: usize,
    /// `a(c)` for the covering constant `c = √n/(1+2√n)` of cube centres.
    pub correction: f64,
    /// `correction · inf_estimate`, a lower estimate for `u_α` on all of `G`.
    pub corrected_inf: f64,
}

/// Minimum of `u_α` over the centres of the cubes of `d`.
pub fn inf_scan(g: &DomainMask, d: &WhitneyDecomposition, alpha: f64, opts: &EvalOptions) -> Result<InfScan> {
    ensure(!d.cubes.is_empty(), "inf_scan", || "decomposition has no cubes".into())?;
    let sym = Symmetries::of(g);
    let dom = TestDomain::mask(g.clone());
    let mut reps: HashMap<(u32, Vec<i64>), usize> = HashMap::new();
    let mut rep_cubes = Vec::new();
    let owner: Vec<usize> = d
        .cubes
        .iter()
        .map(|q| {
            let key = sym.canonical(q);
            *reps.entry(key.clone()).or_insert_with(|| {
                rep_cubes.push(WhitneyCube::new(key.0, key.1));
                rep_cubes.len() - 1
            })
        })
        .collect();
    let values: Vec<f64> = rep_cubes
        .par_iter()
        .map(|q| u_alpha(&dom, &q.center(), alpha, opts).map(|s| s.value))
        .collect::<Result<_>>()?;
    let (best, _) = owner
        .iter()
        .enumerate()
        .map(|(i, &r)| (i, values[r]))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .unwrap();
    let inf = values[owner[best]];
    let n = 2.0f64;
    let c = n.sqrt() / (1.0 + 2.0 * n.sqrt());
    let correction = harnack_correction(alpha, c, 2)?;
    Ok(InfScan {
        alpha,
        inf_estimate: inf,
        argmin: d.cubes[best].center(),
        samples: d.cubes.len(),
        distinct_solves: rep_cubes.len(),
        correction,
        corrected_inf: correction * inf,
    })
}

/// `γ = 1/(9√n)`.
pub fn whitney_gamma(n: usize) -> f64 {
    1.0 / (9.0 * (n as f64).sqrt())
}

/// `η = √n/(1+2√n)`: cube centres see their cube inside `B̄(m, η d(m, ∂G))`.
pub fn whitney_eta(n: usize) -> f64 {
    let r = (n as f64).sqrt();
    r / (1.0 + 2.0 * r)
}

/// `d₁ = (9√n/(1+2√n))^{n-1}`.
pub fn whitney_d1(n: usize) -> f64 {
    let r = (n as f64).sqrt();
    (9.0 * r / (1.0 + 2.0 * r)).powi(n as i32 - 1)
}

/// A value for the all-points constant: `d₂ = d₁ · d₃`, where `d₃` chains
/// the Harnack inequality of `u_γ` from the centre to any point of the cube.
/// Points of `Q` are within quasihyperbolic distance `1/2` of the centre.
pub fn whitney_d2(n: usize) -> Result<f64> {
    let gamma = whitney_gamma(n);
    let s = harnack_step(gamma);
    let c = harnack_params(gamma, s, n)?;
    Ok(whitney_d1(n) * harnack_chain_bound(c, s, 0.5)?)
}

/// Per-cube row of the Whitney capacity test.
#[derive(Clone, Debug, Serialize)]
pub struct CubeRecord {
    pub k: u32,
    pub corner: Vec<i64>,
    pub cap: f64,
    pub u_gamma: f64,
    pub sandwich_ok: bool,
    /// `u_γ` at the cube corner nearest to `∂G`, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_gamma_corner: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_points_ok: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeTestReport {
    pub gamma: f64,
    pub d1: f64,
    pub d2: f64,
    pub tolerance: f64,
    pub cubes: usize,
    pub distinct_solves: usize,
    pub violations: usize,
    pub min_cap: f64,
    pub argmin: (u32, Vec<i64>),
    pub records: Vec<CubeRecord>,
}

/// Capacities shared between runs: keyed by canonical cube.
pub type CubeCache = HashMap<(u32, Vec<i64>), (f64, f64, Option<f64>)>;

/// Settings of [`whitney_cube_test`].
#[derive(Clone, Copy, Debug)]
pub struct CubeTestOptions {
    pub eval: EvalOptions,
    /// Relative slack for the numerical sandwich.
    pub tolerance: f64,
    /// Also check the all-points version at the cube corner nearest `∂G`.
    pub all_points: bool,
}

impl Default for CubeTestOptions {
    fn default() -> Self {
        CubeTestOptions {
            eval: EvalOptions::default(),
            tolerance: 0.03,
            all_points: false,
        }
    }
}

/// For every cube `Q`: `cap(G, Q)` and `u_γ` at its centre, and the check
/// `u_γ(m) ≤ cap ≤ d₁ u_γ(m)` with relative slack `tolerance`.
pub fn whitney_cube_test(g: &DomainMask, d: &WhitneyDecomposition, opts: &CubeTestOptions) -> Result<CubeTestReport> {
    whitney_cube_test_cached(g, d, opts, &mut CubeCache::new())
}

/// [`whitney_cube_test`] reusing and extending `cache`.
pub fn whitney_cube_test_cached(
    g: &DomainMask,
    d: &WhitneyDecomposition,
    opts: &CubeTestOptions,
    cache: &mut CubeCache,
) -> Result<CubeTestReport> {
    const OP: &str = "whitney_cube_test";
    ensure(g.n() == 2 && d.n == 2, OP, || "planar decompositions only".into())?;
    ensure(!d.cubes.is_empty(), OP, || "decomposition has no cubes".into())?;
    let sym = Symmetries::of(g);
    let dom = TestDomain::mask(g.clone());
    let gamma = whitney_gamma(2);
    let keys: Vec<(u32, Vec<i64>)> = d.cubes.iter().map(|q| sym.canonical(q)).collect();
    let missing: Vec<(u32, Vec<i64>)> = keys
        .iter()
        .filter(|k| match cache.get(*k) {
            None => true,
            Some(v) => opts.all_points && v.2.is_none(),
        })
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let distinct = keys.iter().collect::<BTreeSet<_>>().len();
    let fresh: Vec<((u32, Vec<i64>), (f64, f64, Option<f64>))> = missing
        .par_iter()
        .map(|key| {
            let q = WhitneyCube::new(key.0, key.1.clone());
            let cap = cube_capacity(&dom, &q, &opts.eval)?.capacity;
            let u = u_alpha(&dom, &q.center(), gamma, &opts.eval)?.value;
            let corner = if opts.all_points {
                let z = nearest_corner(g, &q);
                Some(u_alpha(&dom, &z, gamma, &opts.eval)?.value)
            } else {
                None
            };
            Ok((key.clone(), (cap, u, corner)))
        })
        .collect::<Result<_>>()?;
    cache.extend(fresh);
    let d1 = whitney_d1(2);
    let d2 = whitney_d2(2)?;
    let tol = opts.tolerance;
    let mut records = Vec::with_capacity(d.cubes.len());
    let mut violations = 0;
    let mut best: Option<(f64, usize)> = None;
    for (i, (q, key)) in d.cubes.iter().zip(&keys).enumerate() {
        let (cap, u, corner) = cache[key];
        let ok = u <= cap * (1.0 + tol) && cap <= d1 * u * (1.0 + tol);
        let all_ok = corner.map(|uz| uz / d2 <= cap * (1.0 + tol) && cap <= d2 * uz * (1.0 + tol));
        if !ok || all_ok == Some(false) {
            violations += 1;
        }
        if best.is_none_or(|(b, _)| cap < b) {
            best = Some((cap, i));
        }
        records.push(CubeRecord {
            k: q.k,
            corner: q.corner.clone(),
            cap,
            u_gamma: u,
            sandwich_ok: ok,
            u_gamma_corner: corner,
            all_points_ok: all_ok,
        });
    }
    let (min_cap, at) = best.unwrap();
    Ok(CubeTestReport {
        gamma,
        d1,
        d2,
        tolerance: tol,
        cubes: d.cubes.len(),
        distinct_solves: distinct,
        violations,
        min_cap,
        argmin: (d.cubes[at].k, d.cubes[at].corner.clone()),
        records,
    })
}

fn nearest_corner(g: &DomainMask, q: &WhitneyCube) -> Point {
    let lo = q.lower();
    let s = q.side();
    let mut best = (f64::INFINITY, Point::xy(lo[0], lo[1]));
    for (dx, dy) in [(0.0, 0.0), (s, 0.0), (0.0, s), (s, s)] {
        let z = Point::xy(lo[0] + dx, lo[1] + dy);
        let d = g.boundary_distance(&z);
        if d < best.0 {
            best = (d, z);
        }
    }
    best.1
}

/// CSV with columns `k,corner,cap,u_gamma,sandwich_ok`.
pub fn cube_report_csv(rep: &CubeTestReport) -> String {
    let mut out = String::from("k,corner,cap,u_gamma,sandwich_ok\n");
    for r in &rep.records {
        let corner: Vec<String> = r.corner.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!(
            "{},{},{:.9e},{:.9e},{}\n",
            r.k,
            corner.join(" "),
            r.cap,
            r.u_gamma,
            r.sandwich_ok
        ));
    }
    out
}

/// Smallest cube capacity among cubes touching the closed ball
/// `B̄(p, radius)`, e.g. the cubes around a puncture.
pub fn min_cap_near(rep: &CubeTestReport, p: &Point, radius: f64) -> Option<f64> {
    rep.records
        .iter()
        .filter(|r| {
            let q = WhitneyCube::new(r.k, r.corner.clone());
            let lo = q.lower();
            let s = q.side();
            let gx = (lo[0] - p.coords()[0]).max(p.coords()[0] - lo[0] - s).max(0.0);
            let gy = (lo[1] - p.coords()[1]).max(p.coords()[1] - lo[1] - s).max(0.0);
            gx.hypot(gy) <= radius
        })
        .map(|r| r.cap)
        .min_by(f64::total_cmp)
}
