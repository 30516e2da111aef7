//! Whitney decomposition of raster domains.
//!
//! Cubes are absolute dyadic: a cube of level `k` with integer corner `c`
//! occupies `Π [c_i 2^{-k}, (c_i + 1) 2^{-k}]`. The decomposition is built top
//! down: a cube is kept when it lies in `G` and satisfies
//! `d(Q) ≤ d(Q, ∂G) < 4 d(Q)` with `d(Q) = √n 2^{-k}`, and split otherwise.
//! Cubes that still fail at `k_max` (or that are already too far from the
//! boundary at `k_min`) form the declared truncation remainder.
//!
//! All distance tests are done in integers on the mask's vertex lattice, so
//! the inequality is decided exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geom::Point;
use crate::mask::DomainMask;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WhitneyCube {
    pub k: u32,
    pub corner: Vec<i64>,
}

impl WhitneyCube {
    pub fn new(k: u32, corner: Vec<i64>) -> Self {
        WhitneyCube { k, corner }
    }

    pub fn side(&self) -> f64 {
        0.5f64.powi(self.k as i32)
    }

    /// Euclidean diameter `√n 2^{-k}`.
    pub fn diameter(&self) -> f64 {
        (self.corner.len() as f64).sqrt() * self.side()
    }

    pub fn center(&self) -> Point {
        let s = self.side();
        Point::new(self.corner.iter().map(|&c| (c as f64 + 0.5) * s).collect())
    }

    /// Closed-cube membership.
    pub fn contains(&self, x: &Point) -> bool {
        let s = self.side();
        x.dim() == self.corner.len()
            && self
                .corner
                .iter()
                .zip(x.coords())
                .all(|(&c, &v)| v >= c as f64 * s && v <= (c + 1) as f64 * s)
    }

    pub fn lower(&self) -> Vec<f64> {
        let s = self.side();
        self.corner.iter().map(|&c| c as f64 * s).collect()
    }

    fn children(&self) -> impl Iterator<Item = WhitneyCube> + '_ {
        let n = self.corner.len();
        (0..(1usize << n)).map(move |bits| WhitneyCube {
            k: self.k + 1,
            corner: (0..n)
                .map(|a| 2 * self.corner[a] + ((bits >> a) & 1) as i64)
                .collect(),
        })
    }

    /// Corner of the level-`level` cell range covered by this cube.
    fn cells_at(&self, level: u32) -> (Vec<i64>, i64) {
        let m = 1i64 << (level - self.k);
        (self.corner.iter().map(|&c| c * m).collect(), m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyDecomposition {
    pub n: usize,
    pub k_min: u32,
    pub k_max: u32,
    pub cubes: Vec<WhitneyCube>,
    /// Cubes meeting `G` that could not be accepted within `[k_min, k_max]`.
    pub remainder: Vec<WhitneyCube>,
    #[serde(skip)]
    pub adjacency: Vec<(usize, usize)>,
}

/// Outcome of the Whitney test for one cube.
enum Verdict {
    Accept,
    Split,
    TooFar,
    Outside,
}

fn classify(g: &DomainMask, cube: &WhitneyCube) -> Verdict {
    if g.cube_outside(cube.k, &cube.corner) {
        return Verdict::Outside;
    }
    let m = 1i64 << (g.level() - cube.k);
    let nm2 = g.n() as i64 * m * m;
    match g.cube_boundary_dist2(cube.k, &cube.corner) {
        None => Verdict::Split,
        Some(d2) if d2 < nm2 => Verdict::Split,
        Some(d2) if d2 < 16 * nm2 => Verdict::Accept,
        Some(_) => Verdict::TooFar,
    }
}

/// Top-down Whitney decomposition of `g` using cube levels `k_min..=k_max`.
pub fn decompose(g: &DomainMask, k_min: u32, k_max: u32) -> Result<WhitneyDecomposition> {
    const OP: &str = "decompose";
    ensure(k_min <= k_max, OP, || format!("need k_min <= k_max, got {k_min} > {k_max}"))?;
    ensure(k_max <= g.level(), OP, || {
        format!("k_max = {k_max} exceeds the raster level {}", g.level())
    })?;
    let n = g.n();
    let shift = g.level() - k_min;
    let lo: Vec<i64> = g.origin().iter().map(|&o| o.div_euclid(1 << shift)).collect();
    let hi: Vec<i64> = g
        .origin()
        .iter()
        .zip(g.dims())
        .map(|(&o, &d)| (o + d as i64 + (1 << shift) - 1).div_euclid(1 << shift))
        .collect();
    let mut frontier: Vec<WhitneyCube> = Vec::new();
    let counts: Vec<i64> = (0..n).map(|a| hi[a] - lo[a]).collect();
    let total: i64 = counts.iter().product();
    for code in 0..total {
        let mut c = code;
        let corner = (0..n)
            .map(|a| {
                let v = lo[a] + c % counts[a];
                c /= counts[a];
                v
            })
            .collect();
        frontier.push(WhitneyCube::new(k_min, corner));
    }

    let mut cubes = Vec::new();
    let mut remainder = Vec::new();
    while !frontier.is_empty() {
        let verdicts: Vec<Verdict> = frontier.par_iter().map(|q| classify(g, q)).collect();
        let mut next = Vec::new();
        for (q, v) in frontier.into_iter().zip(verdicts) {
            match v {
                Verdict::Outside => {}
                Verdict::Accept => cubes.push(q),
                Verdict::TooFar => remainder.push(q),
                Verdict::Split if q.k < k_max => next.extend(q.children()),
                Verdict::Split => remainder.push(q),
            }
        }
        frontier = next;
    }
    if cubes.is_empty() && remainder.is_empty() {
        return Err(Error::EmptySet { op: OP });
    }
    cubes.sort();
    remainder.sort();
    let mut d = WhitneyDecomposition {
        n,
        k_min,
        k_max,
        cubes,
        remainder,
        adjacency: Vec::new(),
    };
    d.adjacency = adjacency(&d.cubes, k_max);
    Ok(d)
}

/// Pairs of cubes that share an (n-1)-dimensional face.
pub fn adjacency(cubes: &[WhitneyCube], finest: u32) -> Vec<(usize, usize)> {
    let n = match cubes.first() {
        Some(c) => c.corner.len(),
        None => return Vec::new(),
    };
    let mut owner: HashMap<Vec<i64>, usize> = HashMap::new();
    for (i, q) in cubes.iter().enumerate() {
        let (lo, m) = q.cells_at(finest);
        let count = (m as usize).pow(n as u32);
        for code in 0..count {
            let mut c = code;
            let cell: Vec<i64> = (0..n)
                .map(|a| {
                    let v = lo[a] + (c % m as usize) as i64;
                    c /= m as usize;
                    v
                })
                .collect();
            owner.insert(cell, i);
        }
    }
    let mut edges = Vec::new();
    for (i, q) in cubes.iter().enumerate() {
        let (lo, m) = q.cells_at(finest);
        let face = (m as usize).pow(n as u32 - 1);
        let mut seen = Vec::new();
        for axis in 0..n {
            // only look in the + direction so that each pair is found once
            let others: Vec<usize> = (0..n).filter(|&a| a != axis).collect();
            for code in 0..face {
                let mut c = code;
                let mut cell = lo.clone();
                cell[axis] = lo[axis] + m;
                for &a in &others {
                    cell[a] = lo[a] + (c % m as usize) as i64;
                    c /= m as usize;
                }
                if let Some(&j) = owner.get(&cell) {
                    if !seen.contains(&j) {
                        seen.push(j);
                        edges.push((i.min(j), i.max(j)));
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Per-level counts `N_k`.
pub fn level_counts(d: &WhitneyDecomposition) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for q in &d.cubes {
        *m.entry(q.k).or_insert(0) += 1;
    }
    m
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub cubes: usize,
    /// Level outside `[k_min, k_max]` or corner of the wrong dimension.
    pub dyadic_violations: usize,
    /// Cubes whose interiors overlap another cube.
    pub overlap_violations: usize,
    /// Cubes not contained in `G`.
    pub containment_violations: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Fraction of `G` (by raster cells) covered neither by cubes nor by the
    /// declared remainder.
    pub coverage_deficit: f64,
    /// `Σ N_k 2^{-nk} / vol(G)`.
    pub covered_fraction: f64,
    /// Fraction of `G` lying in remainder cubes.
    pub remainder_fraction: f64,
}

impl VerifyReport {
    pub fn violations(&self) -> usize {
        self.dyadic_violations
            + self.overlap_violations
            + self.containment_violations
            + self.lower_violations
            + self.upper_violations
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

/// Check properties (1)-(3), disjointness and coverage of `d` against `g`.
pub fn verify(d: &WhitneyDecomposition, g: &DomainMask) -> VerifyReport {
    let n = g.n();
    let level = g.level();
    let mut rep = VerifyReport {
        cubes: d.cubes.len(),
        ..Default::default()
    };
    let checks: Vec<(bool, bool, bool, bool)> = d
        .cubes
        .par_iter()
        .map(|q| {
            if q.corner.len() != n || q.k > level || q.k < d.k_min || q.k > d.k_max {
                return (true, false, false, false);
            }
            let m = 1i64 << (level - q.k);
            let nm2 = n as i64 * m * m;
            match g.cube_boundary_dist2(q.k, &q.corner) {
                None => (false, true, false, false),
                Some(d2) => (false, false, d2 < nm2, d2 >= 16 * nm2),
            }
        })
        .collect();
    for (dy, cont, low, up) in checks {
        rep.dyadic_violations += dy as usize;
        rep.containment_violations += cont as usize;
        rep.lower_violations += low as usize;
        rep.upper_violations += up as usize;
    }

    // paint raster cells; a cell painted twice marks overlapping interiors
    let mut paint: HashMap<Vec<i64>, u8> = HashMap::new();
    let mut overlapping = vec![false; d.cubes.len()];
    let mut owner: HashMap<Vec<i64>, usize> = HashMap::new();
    for (i, q) in d.cubes.iter().enumerate() {
        if q.corner.len() != n || q.k > level {
            continue;
        }
        for cell in cells_of(q, level) {
            if let Some(&j) = owner.get(&cell) {
                overlapping[i] = true;
                overlapping[j] = true;
            } else {
                owner.insert(cell.clone(), i);
            }
            paint.insert(cell, 1);
        }
    }
    rep.overlap_violations = overlapping.iter().filter(|&&b| b).count();
    let mut in_remainder = 0usize;
    for q in &d.remainder {
        if q.corner.len() != n || q.k > level {
            continue;
        }
        for cell in cells_of(q, level) {
            if is_inside_abs(g, &cell) {
                in_remainder += 1;
            }
            paint.entry(cell).or_insert(2);
        }
    }
    let total = g.cell_count();
    let mut covered = 0usize;
    for rel in g.inside_cells() {
        let abs: Vec<i64> = rel.iter().zip(g.origin()).map(|(r, o)| r + o).collect();
        if paint.contains_key(&abs) {
            covered += 1;
        }
    }
    rep.coverage_deficit = 1.0 - covered as f64 / total as f64;
    let cube_volume: f64 = d.cubes.iter().map(|q| q.side().powi(n as i32)).sum();
    rep.covered_fraction = cube_volume / g.volume();
    rep.remainder_fraction = in_remainder as f64 / total as f64;
    rep
}

fn is_inside_abs(g: &DomainMask, abs: &[i64]) -> bool {
    let rel: Vec<i64> = abs.iter().zip(g.origin()).map(|(a, o)| a - o).collect();
    g.cell_inside(&rel)
}

fn cells_of(q: &WhitneyCube, level: u32) -> impl Iterator<Item = Vec<i64>> + '_ {
    let n = q.corner.len();
    let (lo, m) = q.cells_at(level);
    let count = (m as usize).pow(n as u32);
    (0..count).map(move |code| {
        let mut c = code;
        (0..n)
            .map(|a| {
                let v = lo[a] + (c % m as usize) as i64;
                c /= m as usize;
                v
            })
            .collect()
    })
}

#[derive(Serialize, Deserialize)]
struct DecompositionFile {
    n: usize,
    k_min: u32,
    k_max: u32,
    cubes: Vec<WhitneyCube>,
    #[serde(rename = "Nk")]
    nk: BTreeMap<String, usize>,
    #[serde(default)]
    remainder: Vec<WhitneyCube>,
}

/// Export formats for [`export`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(Error::Unsupported(format!("export format '{other}'"))),
        }
    }
}

pub fn export(d: &WhitneyDecomposition, format: ExportFormat) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Json => {
            let file = DecompositionFile {
                n: d.n,
                k_min: d.k_min,
                k_max: d.k_max,
                cubes: d.cubes.clone(),
                nk: level_counts(d).into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                remainder: d.remainder.clone(),
            };
            Ok(serde_json::to_vec(&file)?)
        }
        ExportFormat::Svg => to_svg(d).map(String::into_bytes),
    }
}

pub fn import_json(s: &str) -> Result<WhitneyDecomposition> {
    let f: DecompositionFile = serde_json::from_str(s)?;
    let adjacency = adjacency(&f.cubes, f.k_max);
    Ok(WhitneyDecomposition {
        n: f.n,
        k_min: f.k_min,
        k_max: f.k_max,
        cubes: f.cubes,
        remainder: f.remainder,
        adjacency,
    })
}

fn level_colour(k: u32, k_min: u32, k_max: u32) -> String {
    let span = (k_max - k_min).max(1) as f64;
    let t = (k - k_min) as f64 / span;
    let r = (40.0 + 200.0 * t) as u8;
    let b = (220.0 - 180.0 * t) as u8;
    format!("#{r:02x}50{b:02x}")
}

fn to_svg(d: &WhitneyDecomposition) -> Result<String> {
    if d.n != 2 {
        return Err(Error::Unsupported("SVG export is planar only".into()));
    }
    let all = d.cubes.iter().chain(&d.remainder);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for q in all {
        let l = q.lower();
        for a in 0..2 {
            lo[a] = lo[a].min(l[a]);
            hi[a] = hi[a].max(l[a] + q.side());
        }
    }
    let w = hi[0] - lo[0];
    let h = hi[1] - lo[1];
    let pad = 0.02 * w.max(h);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        lo[0] - pad,
        -hi[1] - pad,
        w + 2.0 * pad,
        h + 2.0 * pad,
        (800.0 * (h + 2.0 * pad) / (w + 2.0 * pad)).round()
    )
    .unwrap();
    // flip y so that the picture has the usual orientation
    writeln!(s, r#"<g transform="scale(1,-1)" fill="none">"#).unwrap();
    for q in &d.remainder {
        let l = q.lower();
        writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{w}" height="{w}" fill="#f3d0d0" stroke="none"/>"##,
            l[0],
            l[1],
            w = q.side()
        )
        .unwrap();
    }
    for q in &d.cubes {
        let l = q.lower();
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{w}" height="{w}" stroke="{}" stroke-width="{}"/>"#,
            l[0],
            l[1],
            level_colour(q.k, d.k_min, d.k_max),
            0.08 * q.side(),
            w = q.side()
        )
        .unwrap();
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_decomposition() {
        let g = DomainMask::unit_square(8).unwrap();
        let d = decompose(&g, 0, 6).unwrap();
        let rep = verify(&d, &g);
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.coverage_deficit, 0.0);
        assert!(rep.covered_fraction <= 1.0);
        let counts = level_counts(&d);
        // [1/4,3/4]² splits into the sixteen level-3 cubes, nothing coarser fits
        assert_eq!(counts.get(&2), None);
        assert_eq!(counts[&3], 16);
        assert!(counts[&6] > counts[&5]);
    }

    #[test]
    fn boundary_case_is_included() {
        // [1/4,1/2]² at level 2 has d(Q,∂G) = 1/4 < √2/4, so it splits; its
        // child [1/4,3/8]² has d = 1/4 and d(Q) = √2/8 ≈ 0.177: accepted
        let g = DomainMask::unit_square(6).unwrap();
        assert!(matches!(classify(&g, &WhitneyCube::new(3, vec![2, 2])), Verdict::Accept));
        assert!(matches!(classify(&g, &WhitneyCube::new(2, vec![1, 1])), Verdict::Split));
        // equality d(Q,∂G) = d(Q): a single outside cell whose corner sits
        // diagonally one cell away from the cube
        let mut inside = vec![true; 16 * 16];
        inside[0] = false;
        let g = DomainMask::new(2, 4, vec![0, 0], vec![16, 16], inside, vec![]).unwrap();
        let d2 = g.cube_boundary_dist2(4, &[2, 2]).unwrap();
        assert_eq!(d2, 2);
        assert!(matches!(classify(&g, &WhitneyCube::new(4, vec![2, 2])), Verdict::Accept));
    }

    #[test]
    fn planted_fault() {
        let g = DomainMask::unit_square(8).unwrap();
        let mut d = decompose(&g, 0, 6).unwrap();
        d.cubes.push(WhitneyCube::new(4, vec![7, 7]));
        let rep = verify(&d, &g);
        assert_eq!(rep.upper_violations, 1);
        assert!(rep.overlap_violations >= 1);
    }

    #[test]
    fn json_round_trip() {
        let g = DomainMask::l_shape(7).unwrap();
        let d = decompose(&g, 1, 5).unwrap();
        let bytes = export(&d, ExportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert!(v["Nk"].is_object());
        assert!(v["cubes"][0]["k"].is_u64());
        let back = import_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back, d);
        assert!(verify(&back, &g).passed());
        let svg = String::from_utf8(export(&d, ExportFormat::Svg).unwrap()).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<rect"));
        assert!("png".parse::<ExportFormat>().is_err());
    }

    #[test]
    fn adjacency_is_symmetric_face_sharing() {
        let g = DomainMask::unit_square(6).unwrap();
        let d = decompose(&g, 0, 5).unwrap();
        for &(i, j) in &d.adjacency {
            let (a, b) = (&d.cubes[i], &d.cubes[j]);
            let (la, lb) = (a.lower(), b.lower());
            let touching = (0..2).all(|ax| la[ax] <= lb[ax] + b.side() && lb[ax] <= la[ax] + a.side());
            let overlap_len: Vec<f64> = (0..2)
                .map(|ax| (la[ax] + a.side()).min(lb[ax] + b.side()) - la[ax].max(lb[ax]))
                .collect();
            assert!(touching);
            assert!(overlap_len.iter().filter(|&&l| l > 0.0).count() == 1);
        }
        // the sixteen central cubes form a 4×4 grid graph with 24 edges
        let central: Vec<usize> = (0..d.cubes.len()).filter(|&i| d.cubes[i].k == 3).collect();
        let internal = d
            .adjacency
            .iter()
            .filter(|(i, j)| central.contains(i) && central.contains(j))
            .count();
        assert_eq!(internal, 24);
    }

    #[test]
    fn deterministic() {
        let g = DomainMask::punctured_square(7).unwrap();
        let a = decompose(&g, 0, 6).unwrap();
        let b = decompose(&g, 0, 6).unwrap();
        assert_eq!(a, b);
    }
}
