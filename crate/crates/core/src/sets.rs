//! Sampled compact sets: generators, the uniform-perfectness estimator and a
//! dyadic Hausdorff-content estimate.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geom::{self, Ball, Point};

/// Radii below `UP_SAFETY × resolution` are ignored by the estimator: a finite
/// sample has spurious gaps at the scale of its own spacing.
pub const UP_SAFETY: f64 = 8.0;

/// Finite sample of a compact set with its declared resolution (every point
/// of the intended set lies within `resolution` of the sample).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    pub n: usize,
    pub resolution: f64,
    pub points: Vec<Point>,
}

impl CompactSet {
    pub fn new(n: usize, resolution: f64, points: Vec<Point>) -> Result<Self> {
        const OP: &str = "CompactSet::new";
        ensure(resolution > 0.0 && resolution.is_finite(), OP, || {
            format!("resolution must be positive, got {resolution}")
        })?;
        ensure(points.len() >= 2, OP, || {
            format!("need at least two points, got {}", points.len())
        })?;
        if let Some(p) = points.iter().find(|p| p.dim() != n) {
            return Err(Error::DimensionMismatch {
                op: OP,
                left: n,
                right: p.dim(),
            });
        }
        let set = CompactSet {
            n,
            resolution,
            points,
        };
        ensure(set.diameter() > 0.0, OP, || "diameter must be positive".into())?;
        Ok(set)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CompactSet = serde_json::from_str(s)?;
        CompactSet::new(raw.n, raw.resolution, raw.points)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        geom::set_diameter(&self.points).unwrap_or(0.0)
    }

    /// `λE + v`, with the resolution scaled by `|λ|`.
    pub fn similarity(&self, scale: f64, shift: &[f64]) -> CompactSet {
        CompactSet {
            n: self.n,
            resolution: self.resolution * scale.abs(),
            points: self.points.iter().map(|p| p.similarity(scale, shift)).collect(),
        }
    }

    /// Sample points inside the closed ball `B̄(center, r)`.
    pub fn restrict_to_ball(&self, center: &Point, r: f64) -> Vec<Point> {
        self.points
            .iter()
            .filter(|p| p.dist(center) <= r)
            .cloned()
            .collect()
    }
}

/// Endpoints of the `2^depth` intervals of the middle-third construction,
/// placed on the x-axis of ℝ². Resolution is `3^{-depth}`.
pub fn cantor_middle_third(depth: u32) -> CompactSet {
    let scale = 3f64.powi(depth as i32);
    let mut lefts: Vec<u64> = vec![0];
    let mut len = 3u64.pow(depth);
    for _ in 0..depth {
        len /= 3;
        lefts = lefts
            .iter()
            .flat_map(|&l| [l, l + 2 * len])
            .collect();
    }
    // after the loop every interval has integer length `len` (= 1) on the 3^depth grid
    let mut points = Vec::with_capacity(2 * lefts.len());
    for l in lefts {
        points.push(Point::xy(l as f64 / scale, 0.0));
        points.push(Point::xy((l + len) as f64 / scale, 0.0));
    }
    CompactSet {
        n: 2,
        resolution: 1.0 / scale,
        points,
    }
}

/// Output of [`up_parameter_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpEstimate {
    /// Infimum of `D_a(r)/r` over centers and admissible radii.
    pub c_hat: f64,
    pub center: Point,
    pub center_index: usize,
    pub radius: f64,
    /// Admissible radius window `(lo, hi)`.
    pub r_min: f64,
    pub r_max: f64,
}

/// Estimate the largest `c` with `E ∈ UP_n(c)` from the sample.
///
/// `D_a(r) = max{|x-a| : x ∈ E, |x-a| < r}`; the estimate is
/// `inf D_a(r)/r` over `a ∈ E` and `UP_SAFETY·resolution < r < d(E)/2`.
pub fn up_parameter_estimate(e: &CompactSet) -> Result<UpEstimate> {
    up_parameter_estimate_with(e, UP_SAFETY)
}

pub fn up_parameter_estimate_with(e: &CompactSet, safety: f64) -> Result<UpEstimate> {
    const OP: &str = "up_parameter_estimate";
    ensure(e.len() >= 2, OP, || "need at least two points".into())?;
    let lo = safety * e.resolution;
    let hi = 0.5 * e.diameter();
    ensure(lo < hi, OP, || {
        format!("all radii excluded: safety*resolution = {lo} >= d(E)/2 = {hi}")
    })?;

    let best = e
        .points
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut d: Vec<f64> = e
                .points
                .iter()
                .map(|x| x.dist(a))
                .filter(|&t| t > 0.0)
                .collect();
            d.sort_by(f64::total_cmp);
            let (ratio, r) = min_gap_ratio(&d, lo, hi);
            (ratio, i, r)
        })
        .reduce(
            || (f64::INFINITY, usize::MAX, f64::NAN),
            |x, y| if (y.0, y.1) < (x.0, x.1) { y } else { x },
        );
    let (c_hat, idx, radius) = best;
    Ok(UpEstimate {
        c_hat,
        center: e.points[idx].clone(),
        center_index: idx,
        radius,
        r_min: lo,
        r_max: hi,
    })
}

/// For sorted positive distances, minimize `D(r)/r` over `r ∈ (lo, hi)`.
/// Returns the ratio and the radius where the infimum is approached.
fn min_gap_ratio(sorted: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    let mut inner: f64 = 0.0;
    for k in 0..=sorted.len() {
        let next = sorted.get(k).copied().unwrap_or(f64::INFINITY);
        // on (inner, next] the farthest point strictly inside r is at `inner`
        let left = inner.max(lo);
        let right = next.min(hi);
        if left < right {
            let ratio = inner / right;
            if ratio < best.0 {
                best = (ratio, right);
            }
        }
        if next >= hi {
            break;
        }
        inner = next;
    }
    best
}

/// How the radii of a nested ball family shrink per generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusLaw {
    /// `r_k = (c/3)^k r`, children at distance in `(2c r_{k-1}/3, 2 r_{k-1}/3)`.
    Thirds,
    /// `r_k = c^k r`, children anywhere inside the parent.
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedBallSpec {
    pub n: usize,
    pub branching: usize,
    pub c: f64,
    pub root_radius: f64,
    pub generations: usize,
    pub seed: u64,
    pub law: RadiusLaw,
}

/// A finite stage of a nested family of closed balls. Ball `i` of generation
/// `k` has parent `i / branching` in generation `k - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedBallFamily {
    pub spec: NestedBallSpec,
    pub centers: Vec<Vec<Point>>,
}

const MAX_PLACEMENT_TRIES: usize = 10_000;

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

impl NestedBallFamily {
    pub fn ratio(&self) -> f64 {
        match self.spec.law {
            RadiusLaw::Thirds => self.spec.c / 3.0,
            RadiusLaw::Geometric => self.spec.c,
        }
    }

    pub fn radius(&self, generation: usize) -> f64 {
        self.spec.root_radius * self.ratio().powi(generation as i32)
    }

    /// Exponent `β = log p / log(1/ratio)` of the limit set.
    pub fn exponent(&self) -> f64 {
        (self.spec.branching as f64).ln() / (1.0 / self.ratio()).ln()
    }

    /// `Λ^β(K) ≥ r^β / (p 3ⁿ)` for the limit set `K`.
    pub fn content_lower_bound(&self) -> f64 {
        self.spec.root_radius.powf(self.exponent())
            / (self.spec.branching as f64 * 3f64.powi(self.spec.n as i32))
    }

    pub fn build(spec: NestedBallSpec) -> Result<Self> {
        const OP: &str = "nested_ball_cantor";
        ensure(spec.n >= 1, OP, || "dimension must be >= 1".into())?;
        ensure(spec.branching >= 2, OP, || {
            format!("branching must be >= 2, got {}", spec.branching)
        })?;
        ensure(spec.c > 0.0 && spec.c < 1.0, OP, || {
            format!("c must lie in (0,1), got {}", spec.c)
        })?;
        ensure(spec.root_radius > 0.0, OP, || "root radius must be positive".into())?;

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut fam = NestedBallFamily {
            centers: vec![vec![Point::origin(spec.n)]],
            spec,
        };
        let p = fam.spec.branching;
        for k in 1..=fam.spec.generations {
            let parent_r = fam.radius(k - 1);
            let child_r = fam.radius(k);
            let mut next = Vec::with_capacity(fam.centers[k - 1].len() * p);
            for parent in &fam.centers[k - 1] {
                let mut kids: Vec<Point> = Vec::with_capacity(p);
                if fam.spec.law == RadiusLaw::Thirds {
                    kids.push(parent.clone());
                }
                let mut tries = 0;
                while kids.len() < p {
                    tries += 1;
                    if tries > MAX_PLACEMENT_TRIES {
                        return Err(Error::Infeasible {
                            op: OP,
                            msg: format!(
                                "could not place {p} disjoint children of radius {child_r} \
                                 inside a ball of radius {parent_r} (generation {k})"
                            ),
                        });
                    }
                    let dir = random_unit(&mut rng, fam.spec.n);
                    let dist = match fam.spec.law {
                        RadiusLaw::Thirds => {
                            let (a, b) = (2.0 * fam.spec.c * parent_r / 3.0, 2.0 * parent_r / 3.0);
                            let t: f64 = rng.gen_range(0.0..1.0);
                            // open band; t = 0 is pushed off the inner edge
                            a + (b - a) * t.max(1e-9)
                        }
                        RadiusLaw::Geometric => {
                            let t: f64 = rng.gen_range(0.0..1.0);
                            (parent_r - child_r) * t * (1.0 - 1e-12)
                        }
                    };
                    let cand = parent.offset(&dir, dist);
                    if kids.iter().all(|q| q.dist(&cand) > 2.0 * child_r) {
                        kids.push(cand);
                    }
                }
                next.extend(kids);
            }
            fam.centers.push(next);
        }
        fam.verify()?;
        Ok(fam)
    }

    /// Check sibling disjointness and nesting in every generation.
    pub fn verify(&self) -> Result<()> {
        let p = self.spec.branching;
        for k in 1..self.centers.len() {
            let r = self.radius(k);
            let pr = self.radius(k - 1);
            for (i, c) in self.centers[k].iter().enumerate() {
                let child = Ball::new(c.clone(), r, true)?;
                let parent = Ball::new(self.centers[k - 1][i / p].clone(), pr, true)?;
                if !child.is_inside(&parent) {
                    return Err(Error::Infeasible {
                        op: "nested_ball_cantor",
                        msg: format!("generation {k} ball {i} is not inside its parent"),
                    });
                }
                let first_sibling = (i / p) * p;
                for j in first_sibling..i {
                    let other = Ball::new(self.centers[k][j].clone(), r, true)?;
                    if !child.is_disjoint(&other) {
                        return Err(Error::Infeasible {
                            op: "nested_ball_cantor",
                            msg: format!("generation {k} siblings {j} and {i} intersect"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Centers of the deepest generation as a sample of the limit set; each
    /// limit point lies within the deepest radius of some center. With no
    /// generations the sample is the diameter `{a ± r e₁}` of the root ball.
    pub fn leaf_set(&self) -> Result<CompactSet> {
        let depth = self.centers.len() - 1;
        if depth == 0 {
            let a = &self.centers[0][0];
            let e1 = Point::unit(self.spec.n, 0);
            let r = self.spec.root_radius;
            return CompactSet::new(
                self.spec.n,
                r,
                vec![a.offset(e1.coords(), -r), a.offset(e1.coords(), r)],
            );
        }
        CompactSet::new(self.spec.n, self.radius(depth), self.centers[depth].clone())
    }
}

/// The planar two-branch family with radii `(c/3)^k r`.
pub fn nested_ball_cantor(
    p: usize,
    c: f64,
    r: f64,
    depth: usize,
    seed: u64,
) -> Result<(NestedBallFamily, CompactSet)> {
    let fam = NestedBallFamily::build(NestedBallSpec {
        n: 2,
        branching: p,
        c,
        root_radius: r,
        generations: depth,
        seed,
        law: RadiusLaw::Thirds,
    })?;
    let leaves = fam.leaf_set()?;
    Ok((fam, leaves))
}

/// Dyadic covering estimate of the β-dimensional Hausdorff content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentEstimate {
    pub value: f64,
    pub level: u32,
    pub cells: usize,
}

/// Minimum over dyadic levels `0..=max_level` of `Σ (cell diameter / 2)^β`
/// over the level's cells that contain a sample point.
pub fn hausdorff_content_upper(points: &[Point], beta: f64, max_level: u32) -> Result<ContentEstimate> {
    const OP: &str = "hausdorff_content_upper";
    ensure(beta > 0.0, OP, || format!("beta must be positive, got {beta}"))?;
    let n = points.first().ok_or(Error::EmptySet { op: OP })?.dim();
    let mut best = ContentEstimate {
        value: f64::INFINITY,
        level: 0,
        cells: 0,
    };
    for level in 0..=max_level {
        let side = 0.5f64.powi(level as i32);
        let cells: HashSet<Vec<i64>> = points
            .iter()
            .map(|p| p.coords().iter().map(|x| (x / side).floor() as i64).collect())
            .collect();
        let radius = 0.5 * side * (n as f64).sqrt();
        let value = cells.len() as f64 * radius.powf(beta);
        if value < best.value {
            best = ContentEstimate {
                value,
                level,
                cells: cells.len(),
            };
        }
    }
    Ok(best)
}
