//! Raster domains on a dyadic lattice.
//!
//! A [`DomainMask`] stores a bounded open set `G ⊂ ℝⁿ` (n = 2 or 3) as a union
//! of closed cells of side `h = 2^{-level}`, plus optional isolated boundary
//! points ("punctures") that sit on lattice vertices. Everything outside the
//! bounding box counts as complement.
//!
//! Two distance oracles are kept:
//!
//! * an exact squared Euclidean distance transform on the *vertex* lattice,
//!   measured in cell units, used for integer-exact Whitney tests;
//! * a bucketed nearest-cell search giving `d(x, ∂G)` for arbitrary points.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geom::Point;

const BUCKET: usize = 8;

#[derive(Clone, Debug)]
pub struct DomainMask {
    n: usize,
    level: u32,
    /// Lattice coordinate (in cells) of the box's lower corner.
    origin: Vec<i64>,
    dims: Vec<usize>,
    inside: Vec<bool>,
    /// Absolute lattice vertex coordinates of isolated boundary points.
    punctures: Vec<Vec<i64>>,
    // derived data
    vdims: Vec<usize>,
    vertex_edt: Vec<f64>,
    outside_prefix: Vec<u32>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

/// Output of [`DomainMask::half_lattice_dist2`].
#[derive(Clone, Debug)]
pub struct HalfLattice {
    pub dims: [usize; 2],
    pub dist2: Vec<f64>,
}

impl HalfLattice {
    /// Squared distance at half-lattice point `(a, b)`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.dist2[b * self.dims[0] + a]
    }
}

/// Serialized form. `rows` (n = 2 only) lists rows from top to bottom with
/// `#` for inside cells and `.` for outside ones; `runs` lists `[start, len]`
/// runs of inside cells over the row-major flat index (x fastest).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaskFile {
    pub n: usize,
    pub level: u32,
    #[serde(default)]
    pub origin: Option<Vec<i64>>,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub punctures: Vec<Vec<i64>>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(dims.len());
    let mut acc = 1;
    for &d in dims {
        s.push(acc);
        acc *= d;
    }
    s
}

fn unflatten(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let v = idx % d;
            idx /= d;
            v
        })
        .collect()
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: the new parabola dominates from the start
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
            }
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

const FAR: f64 = 1e18;

impl DomainMask {
    /// Build from an inside-cell bitmap over a box with lower corner `origin`
    /// (in cells of side `2^{-level}`).
    pub fn new(
        n: usize,
        level: u32,
        origin: Vec<i64>,
        dims: Vec<usize>,
        inside: Vec<bool>,
        punctures: Vec<Vec<i64>>,
    ) -> Result<Self> {
        const OP: &str = "DomainMask";
        ensure(n == 2 || n == 3, OP, || format!("only n = 2 or 3 supported, got {n}"))?;
        ensure(level <= 24, OP, || format!("level {level} too fine"))?;
        if origin.len() != n || dims.len() != n {
            return Err(Error::DimensionMismatch {
                op: OP,
                left: n,
                right: origin.len().min(dims.len()),
            });
        }
        ensure(dims.iter().all(|&d| d > 0), OP, || "box dimensions must be positive".into())?;
        let total: usize = dims.iter().product();
        ensure(inside.len() == total, OP, || {
            format!("bitmap has {} cells, box has {total}", inside.len())
        })?;
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptySet { op: OP });
        }
        for p in &punctures {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    op: OP,
                    left: n,
                    right: p.len(),
                });
            }
        }
        let vdims: Vec<usize> = dims.iter().map(|d| d + 1).collect();
        let mut mask = DomainMask {
            n,
            level,
            origin,
            dims,
            inside,
            punctures,
            vdims,
            vertex_edt: Vec::new(),
            outside_prefix: Vec::new(),
            buckets: HashMap::new(),
        };
        mask.build_edt();
        mask.build_prefix();
        mask.build_buckets();
        Ok(mask)
    }

    /// Cells whose centers satisfy `f` in the box `[lo, lo + dims·h]`.
    pub fn from_fn(
        n: usize,
        level: u32,
        origin: Vec<i64>,
        dims: Vec<usize>,
        punctures: Vec<Vec<i64>>,
        f: impl Fn(&[f64]) -> bool,
    ) -> Result<Self> {
        let h = 0.5f64.powi(level as i32);
        let total: usize = dims.iter().product();
        let inside = (0..total)
            .map(|i| {
                let idx = unflatten(i, &dims);
                let c: Vec<f64> = idx
                    .iter()
                    .zip(&origin)
                    .map(|(&k, &o)| (o as f64 + k as f64 + 0.5) * h)
                    .collect();
                f(&c)
            })
            .collect();
        DomainMask::new(n, level, origin, dims, inside, punctures)
    }

    /// Open unit square `(0,1)²`, with a one-cell margin of complement.
    pub fn unit_square(level: u32) -> Result<Self> {
        let m = 1i64 << level;
        Self::from_fn(2, level, vec![-1, -1], vec![m as usize + 2; 2], vec![], |c| {
            c.iter().all(|&x| x > 0.0 && x < 1.0)
        })
    }

    /// Unit square with the closed upper-right quarter `[1/2, 1]²` removed.
    pub fn l_shape(level: u32) -> Result<Self> {
        ensure(level >= 1, "DomainMask::l_shape", || "level must be >= 1".into())?;
        let m = 1i64 << level;
        Self::from_fn(2, level, vec![-1, -1], vec![m as usize + 2; 2], vec![], |c| {
            c.iter().all(|&x| x > 0.0 && x < 1.0) && !(c[0] > 0.5 && c[1] > 0.5)
        })
    }

    /// Unit square minus its center point.
    pub fn punctured_square(level: u32) -> Result<Self> {
        ensure(level >= 1, "DomainMask::punctured_square", || "level must be >= 1".into())?;
        let m = 1i64 << level;
        let c = m / 2;
        Self::from_fn(2, level, vec![-1, -1], vec![m as usize + 2; 2], vec![vec![c, c]], |c| {
            c.iter().all(|&x| x > 0.0 && x < 1.0)
        })
    }

    /// Raster disk: cells whose centers lie in `B(center, radius)`.
    pub fn disk(level: u32, center: [f64; 2], radius: f64) -> Result<Self> {
        ensure(radius > 0.0, "DomainMask::disk", || "radius must be positive".into())?;
        let h = 0.5f64.powi(level as i32);
        let lo: Vec<i64> = center.iter().map(|c| ((c - radius) / h).floor() as i64 - 1).collect();
        let hi: Vec<i64> = center.iter().map(|c| ((c + radius) / h).ceil() as i64 + 1).collect();
        let dims = lo.iter().zip(&hi).map(|(l, h)| (h - l) as usize).collect();
        Self::from_fn(2, level, lo, dims, vec![], |c| {
            let dx = c[0] - center[0];
            let dy = c[1] - center[1];
            dx * dx + dy * dy < radius * radius
        })
    }

    /// Open rectangle `(lo, hi)` whose corners are multiples of `2^{-level}`.
    pub fn rectangle(level: u32, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        const OP: &str = "DomainMask::rectangle";
        let scale = 2f64.powi(level as i32);
        let mut cl = [0i64; 2];
        let mut ch = [0i64; 2];
        for a in 0..2 {
            let (l, h) = (lo[a] * scale, hi[a] * scale);
            ensure(l.fract() == 0.0 && h.fract() == 0.0 && l < h, OP, || {
                format!("corners must be increasing multiples of 2^-{level}")
            })?;
            cl[a] = l as i64;
            ch[a] = h as i64;
        }
        let dims = (0..2).map(|a| (ch[a] - cl[a]) as usize + 2).collect();
        Self::from_fn(2, level, vec![cl[0] - 1, cl[1] - 1], dims, vec![], |c| {
            (0..2).all(|a| c[a] > lo[a] && c[a] < hi[a])
        })
    }

    /// A named built-in domain: `square`, `l-shape`, `punctured-square`,
    /// `disk` (unit disk) or `strip` (`(-16,16)×(0,16)`, a half-plane proxy).
    pub fn builtin(name: &str, level: u32) -> Result<Self> {
        match name {
            "square" => Self::unit_square(level),
            "l-shape" | "lshape" => Self::l_shape(level),
            "punctured-square" | "punctured" => Self::punctured_square(level),
            "disk" => Self::disk(level, [0.0, 0.0], 1.0),
            "strip" => Self::rectangle(level, [-16.0, 0.0], [16.0, 16.0]),
            other => Err(Error::Unsupported(format!("unknown built-in domain '{other}'"))),
        }
    }

    pub fn from_file(file: &MaskFile) -> Result<Self> {
        let n = file.n;
        if let Some(rows) = &file.rows {
            ensure(n == 2, "DomainMask", || "row strings describe planar masks only".into())?;
            let height = rows.len();
            let width = rows.first().map(|r| r.chars().count()).unwrap_or(0);
            if rows.iter().any(|r| r.chars().count() != width) || width == 0 {
                return Err(Error::Malformed("mask rows must be non-empty and of equal length".into()));
            }
            let mut inside = vec![false; width * height];
            for (r, row) in rows.iter().enumerate() {
                let y = height - 1 - r;
                for (x, ch) in row.chars().enumerate() {
                    inside[y * width + x] = match ch {
                        '#' | '1' => true,
                        '.' | '0' => false,
                        c => return Err(Error::Malformed(format!("unexpected mask character '{c}'"))),
                    };
                }
            }
            let origin = file.origin.clone().unwrap_or(vec![0, 0]);
            return DomainMask::new(2, file.level, origin, vec![width, height], inside, file.punctures.clone());
        }
        let dims = file
            .dims
            .clone()
            .ok_or_else(|| Error::Malformed("run-length masks need 'dims'".into()))?;
        let runs = file
            .runs
            .as_ref()
            .ok_or_else(|| Error::Malformed("mask needs 'rows' or 'runs'".into()))?;
        let total: usize = dims.iter().product();
        let mut inside = vec![false; total];
        for &[start, len] in runs {
            if start + len > total {
                return Err(Error::Malformed(format!("run [{start}, {len}] exceeds the box")));
            }
            inside[start..start + len].iter_mut().for_each(|b| *b = true);
        }
        let origin = file.origin.clone().unwrap_or(vec![0; n]);
        DomainMask::new(n, file.level, origin, dims, inside, file.punctures.clone())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: MaskFile = serde_json::from_str(s)?;
        Self::from_file(&file)
    }

    /// Plain PBM (`P1`); `1` marks inside cells, the first image row is the top.
    pub fn from_pbm(text: &str, level: u32, origin: Vec<i64>) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .flat_map(|t| {
                // bits may be packed without separators
                if t.chars().all(|c| c == '0' || c == '1') && t.len() > 1 {
                    t.chars().map(|c| c.to_string()).collect::<Vec<_>>()
                } else {
                    vec![t.to_string()]
                }
            });
        if tokens.next().as_deref() != Some("P1") {
            return Err(Error::Malformed("expected a plain PBM (P1) header".into()));
        }
        let mut num = || -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Malformed("truncated PBM data".into()))
        };
        let width = num()?;
        let height = num()?;
        let mut inside = vec![false; width * height];
        for r in 0..height {
            let y = height - 1 - r;
            for x in 0..width {
                inside[y * width + x] = num()? == 1;
            }
        }
        DomainMask::new(2, level, origin, vec![width, height], inside, vec![])
    }

    pub fn to_file(&self) -> MaskFile {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.inside.len() {
            if self.inside[i] {
                let start = i;
                while i < self.inside.len() && self.inside[i] {
                    i += 1;
                }
                runs.push([start, i - start]);
            } else {
                i += 1;
            }
        }
        MaskFile {
            n: self.n,
            level: self.level,
            origin: Some(self.origin.clone()),
            dims: Some(self.dims.clone()),
            rows: None,
            runs: Some(runs),
            punctures: self.punctures.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cell side `2^{-level}`.
    pub fn cell_side(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn punctures(&self) -> &[Vec<i64>] {
        &self.punctures
    }

    pub fn puncture_points(&self) -> Vec<Point> {
        let h = self.cell_side();
        self.punctures
            .iter()
            .map(|p| Point::new(p.iter().map(|&v| v as f64 * h).collect()))
            .collect()
    }

    /// Bounding box `(lo, hi)` in real coordinates.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.cell_side();
        let lo = self.origin.iter().map(|&o| o as f64 * h).collect();
        let hi = self
            .origin
            .iter()
            .zip(&self.dims)
            .map(|(&o, &d)| (o + d as i64) as f64 * h)
            .collect();
        (lo, hi)
    }

    pub fn cell_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Lebesgue measure of `G`.
    pub fn volume(&self) -> f64 {
        self.cell_count() as f64 * self.cell_side().powi(self.n as i32)
    }

    /// Whether the cell with box-relative index `idx` belongs to `G`.
    pub fn cell_inside(&self, idx: &[i64]) -> bool {
        let mut flat = 0usize;
        let mut stride = 1usize;
        for (a, &i) in idx.iter().enumerate() {
            if i < 0 || i as usize >= self.dims[a] {
                return false;
            }
            flat += i as usize * stride;
            stride *= self.dims[a];
        }
        self.inside[flat]
    }

    /// Centers of the inside cells, in flat order.
    pub fn inside_cells(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        self.inside
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| unflatten(i, &self.dims).into_iter().map(|v| v as i64).collect())
    }

    pub fn cell_center(&self, idx: &[i64]) -> Point {
        let h = self.cell_side();
        Point::new(
            idx.iter()
                .zip(&self.origin)
                .map(|(&i, &o)| (o + i) as f64 * h + 0.5 * h)
                .collect(),
        )
    }

    fn build_edt(&mut self) {
        let vtotal: usize = self.vdims.iter().product();
        let mut f = vec![FAR; vtotal];
        let vstr = strides(&self.vdims);
        let n = self.n;
        // a vertex belongs to the complement when one of its incident cells does
        for (vi, fv) in f.iter_mut().enumerate() {
            let v = unflatten(vi, &self.vdims);
            let mut comp = false;
            for corner in 0..(1usize << n) {
                let cell: Vec<i64> = (0..n)
                    .map(|a| v[a] as i64 - ((corner >> a) & 1) as i64)
                    .collect();
                if !self.cell_inside(&cell) {
                    comp = true;
                    break;
                }
            }
            if comp {
                *fv = 0.0;
            }
        }
        for p in &self.punctures {
            let rel: Vec<i64> = p.iter().zip(&self.origin).map(|(a, o)| a - o).collect();
            if rel.iter().zip(&self.vdims).all(|(&r, &d)| r >= 0 && (r as usize) < d) {
                let flat: usize = rel.iter().zip(&vstr).map(|(&r, &s)| r as usize * s).sum();
                f[flat] = 0.0;
            }
        }
        // separable passes along each axis
        let maxd = *self.vdims.iter().max().unwrap();
        let mut line = vec![0.0; maxd];
        let mut out = vec![0.0; maxd];
        let mut v = vec![0usize; maxd];
        let mut z = vec![0.0; maxd + 1];
        for axis in 0..n {
            let len = self.vdims[axis];
            let stride = vstr[axis];
            for start in 0..vtotal {
                if (start / stride) % len != 0 {
                    continue;
                }
                for i in 0..len {
                    line[i] = f[start + i * stride];
                }
                edt_1d(&line[..len], &mut out[..len], &mut v[..len], &mut z[..len + 1]);
                for i in 0..len {
                    f[start + i * stride] = out[i];
                }
            }
        }
        self.vertex_edt = f;
    }

    /// Exact squared distances to `∂G` (punctures included) at every point
    /// of the half-cell lattice of a planar mask, in units of `(h/2)²`. The
    /// lattice has `2·dims + 1` points per axis, starting at the box corner.
    /// Cell centres, face midpoints and vertices all lie on it, and the
    /// nearest boundary point of any of them is again a lattice point, so the
    /// transform is exact there.
    pub fn half_lattice_dist2(&self) -> Result<HalfLattice> {
        if self.n != 2 {
            return Err(Error::Unsupported("half-lattice transform is planar".into()));
        }
        let hd = [2 * self.dims[0] + 1, 2 * self.dims[1] + 1];
        let mut f = vec![FAR; hd[0] * hd[1]];
        for b in 0..hd[1] as i64 {
            for a in 0..hd[0] as i64 {
                let mut comp = false;
                'cells: for j in (b - 1).div_euclid(2)..=b.div_euclid(2) {
                    for i in (a - 1).div_euclid(2)..=a.div_euclid(2) {
                        if !self.cell_inside(&[i, j]) {
                            comp = true;
                            break 'cells;
                        }
                    }
                }
                if comp {
                    f[b as usize * hd[0] + a as usize] = 0.0;
                }
            }
        }
        for p in &self.punctures {
            let (a, b) = (2 * (p[0] - self.origin[0]), 2 * (p[1] - self.origin[1]));
            if a >= 0 && b >= 0 && (a as usize) < hd[0] && (b as usize) < hd[1] {
                f[b as usize * hd[0] + a as usize] = 0.0;
            }
        }
        let maxd = hd[0].max(hd[1]);
        let mut line = vec![0.0; maxd];
        let mut out = vec![0.0; maxd];
        let mut v = vec![0usize; maxd];
        let mut z = vec![0.0; maxd + 1];
        for b in 0..hd[1] {
            let row = &mut f[b * hd[0]..(b + 1) * hd[0]];
            edt_1d(row, &mut out[..hd[0]], &mut v[..hd[0]], &mut z[..hd[0] + 1]);
            row.copy_from_slice(&out[..hd[0]]);
        }
        for a in 0..hd[0] {
            for b in 0..hd[1] {
                line[b] = f[b * hd[0] + a];
            }
            edt_1d(&line[..hd[1]], &mut out[..hd[1]], &mut v[..hd[1]], &mut z[..hd[1] + 1]);
            for b in 0..hd[1] {
                f[b * hd[0] + a] = out[b];
            }
        }
        Ok(HalfLattice { dims: hd, dist2: f })
    }

    fn build_prefix(&mut self) {
        // summed-volume table of outside cells, with a zero layer in front
        let pdims: Vec<usize> = self.dims.iter().map(|d| d + 1).collect();
        let pstr = strides(&pdims);
        let total: usize = pdims.iter().product();
        let mut p = vec![0u32; total];
        for (ci, &ins) in self.inside.iter().enumerate() {
            if !ins {
                let idx = unflatten(ci, &self.dims);
                let flat: usize = idx.iter().zip(&pstr).map(|(&i, &s)| (i + 1) * s).sum();
                p[flat] = 1;
            }
        }
        for (a, &s) in pstr.iter().enumerate() {
            for i in 0..total {
                if (i / s) % pdims[a] != 0 {
                    p[i] += p[i - s];
                }
            }
        }
        self.outside_prefix = p;
    }

    /// Number of outside cells in the box-relative cell range `[lo, hi)`,
    /// counting cells beyond the box as outside.
    fn outside_count(&self, lo: &[i64], hi: &[i64]) -> u64 {
        let n = self.n;
        let mut vol: u64 = 1;
        let mut clo = vec![0usize; n];
        let mut chi = vec![0usize; n];
        for a in 0..n {
            vol *= (hi[a] - lo[a]) as u64;
            clo[a] = lo[a].clamp(0, self.dims[a] as i64) as usize;
            chi[a] = hi[a].clamp(0, self.dims[a] as i64) as usize;
        }
        let in_box: u64 = (0..n).map(|a| (chi[a] - clo[a]) as u64).product();
        let pdims: Vec<usize> = self.dims.iter().map(|d| d + 1).collect();
        let pstr = strides(&pdims);
        let mut sum: i64 = 0;
        if in_box > 0 {
            for corner in 0..(1usize << n) {
                let mut flat = 0;
                let mut sign = 1i64;
                for a in 0..n {
                    if (corner >> a) & 1 == 1 {
                        flat += chi[a] * pstr[a];
                    } else {
                        flat += clo[a] * pstr[a];
                        sign = -sign;
                    }
                }
                sum += sign * self.outside_prefix[flat] as i64;
            }
        }
        sum as u64 + (vol - in_box)
    }

    fn build_buckets(&mut self) {
        // outside cells that touch an inside cell (by a vertex) bound G
        let n = self.n;
        let mut map: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for ci in 0..self.inside.len() {
            if self.inside[ci] {
                continue;
            }
            let idx: Vec<i64> = unflatten(ci, &self.dims).into_iter().map(|v| v as i64).collect();
            let mut touches = false;
            let nb = 3usize.pow(n as u32);
            for code in 0..nb {
                let mut c = code;
                let mut other = idx.clone();
                for o in other.iter_mut() {
                    *o += (c % 3) as i64 - 1;
                    c /= 3;
                }
                if self.cell_inside(&other) {
                    touches = true;
                    break;
                }
            }
            if touches {
                let key: Vec<i64> = idx.iter().map(|&v| v.div_euclid(BUCKET as i64)).collect();
                map.entry(key).or_default().push(ci);
            }
        }
        self.buckets = map;
    }

    /// Squared distance (in cell units) from lattice vertex `v` (absolute
    /// coordinates) to the complement of `G`. Vertices beyond the box are 0.
    pub fn vertex_dist2(&self, v: &[i64]) -> f64 {
        let mut flat = 0usize;
        let mut stride = 1usize;
        for a in 0..self.n {
            let r = v[a] - self.origin[a];
            if r < 0 || r as usize >= self.vdims[a] {
                return 0.0;
            }
            flat += r as usize * stride;
            stride *= self.vdims[a];
        }
        self.vertex_edt[flat]
    }

    /// For the dyadic cube of level `k` with absolute corner `corner`, return
    /// `None` if the open cube meets the complement of `G` (or holds a
    /// puncture), and otherwise the exact squared distance `d(Q, ∂G)²` in
    /// units of `2^{-2·level}`. A cube that only touches `∂G` gets `Some(0)`.
    pub fn cube_boundary_dist2(&self, k: u32, corner: &[i64]) -> Option<i64> {
        assert!(k <= self.level, "cube level exceeds raster level");
        let n = self.n;
        let m = 1i64 << (self.level - k);
        let lo: Vec<i64> = corner.iter().map(|&c| c * m).collect();
        let rel_lo: Vec<i64> = lo.iter().zip(&self.origin).map(|(l, o)| l - o).collect();
        let rel_hi: Vec<i64> = rel_lo.iter().map(|l| l + m).collect();
        if self.outside_count(&rel_lo, &rel_hi) > 0 {
            return None;
        }
        for p in &self.punctures {
            if (0..n).all(|a| p[a] >= lo[a] && p[a] <= lo[a] + m) {
                return None;
            }
        }
        // the nearest complement point of an interior-free cube lies on its faces
        let mut best = f64::INFINITY;
        let mut v = vec![0i64; n];
        for axis in 0..n {
            for side in [0, m] {
                let others: Vec<usize> = (0..n).filter(|&a| a != axis).collect();
                let count = ((m + 1) as usize).pow(others.len() as u32);
                for code in 0..count {
                    let mut c = code;
                    v[axis] = lo[axis] + side;
                    for &a in &others {
                        v[a] = lo[a] + (c % (m as usize + 1)) as i64;
                        c /= m as usize + 1;
                    }
                    best = best.min(self.vertex_dist2(&v));
                }
            }
        }
        Some(best as i64)
    }

    /// Whether the dyadic cube lies inside the raster union of cells
    /// (ignoring punctures).
    pub fn cube_in_cells(&self, k: u32, corner: &[i64]) -> bool {
        let m = 1i64 << (self.level - k);
        let rel_lo: Vec<i64> = corner.iter().zip(&self.origin).map(|(&c, o)| c * m - o).collect();
        let rel_hi: Vec<i64> = rel_lo.iter().map(|l| l + m).collect();
        self.outside_count(&rel_lo, &rel_hi) == 0
    }

    /// Whether the dyadic cube misses every inside cell.
    pub fn cube_outside(&self, k: u32, corner: &[i64]) -> bool {
        let m = 1i64 << (self.level - k);
        let rel_lo: Vec<i64> = corner.iter().zip(&self.origin).map(|(&c, o)| c * m - o).collect();
        let rel_hi: Vec<i64> = rel_lo.iter().map(|l| l + m).collect();
        self.outside_count(&rel_lo, &rel_hi) == (m as u64).pow(self.n as u32)
    }

    /// Whether `x` lies in the open set `G`.
    pub fn contains(&self, x: &Point) -> bool {
        x.dim() == self.n && self.boundary_distance(x) > 0.0
    }

    /// Whether `x` lies in the interior of the cell union, treating punctures
    /// as part of `G`. Capacity computations use this, since isolated points
    /// have zero capacity.
    pub fn contains_ignoring_punctures(&self, x: &Point) -> bool {
        let h = self.cell_side();
        let n = self.n;
        if x.dim() != n {
            return false;
        }
        let mut base = vec![0i64; n];
        let mut on_line = vec![false; n];
        for a in 0..n {
            let t = x.coords()[a] / h - self.origin[a] as f64;
            base[a] = t.floor() as i64;
            on_line[a] = t.fract() == 0.0;
        }
        for corner in 0..(1usize << n) {
            let mut cell = base.clone();
            let mut skip = false;
            for a in 0..n {
                if (corner >> a) & 1 == 1 {
                    if !on_line[a] {
                        skip = true;
                        break;
                    }
                    cell[a] -= 1;
                }
            }
            if !skip && !self.cell_inside(&cell) {
                return false;
            }
        }
        true
    }

    /// Exact Euclidean distance from `x` to the complement of `G`
    /// (0 for points outside `G`).
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        let d = self.cells_distance(x);
        if d == 0.0 {
            return 0.0;
        }
        self.puncture_points()
            .iter()
            .map(|p| p.dist(x))
            .fold(d, f64::min)
    }

    /// Distance to the complement of the cell union (punctures ignored).
    pub fn cells_distance(&self, x: &Point) -> f64 {
        if !self.contains_ignoring_punctures(x) {
            return 0.0;
        }
        let h = self.cell_side();
        let n = self.n;
        let (lo, hi) = self.bbox();
        let mut best = (0..n)
            .map(|a| (x.coords()[a] - lo[a]).min(hi[a] - x.coords()[a]))
            .fold(f64::INFINITY, f64::min);
        let rel: Vec<f64> = (0..n).map(|a| x.coords()[a] / h - self.origin[a] as f64).collect();
        let home: Vec<i64> = rel.iter().map(|&t| (t.floor() as i64).div_euclid(BUCKET as i64)).collect();
        let max_ring = self.dims.iter().map(|&d| d / BUCKET + 2).max().unwrap() as i64;
        let bucket_len = BUCKET as f64 * h;
        for ring in 0..=max_ring {
            if best <= (ring as f64 - 1.0).max(0.0) * bucket_len {
                break;
            }
            let side = (2 * ring + 1) as usize;
            for code in 0..side.pow(n as u32) {
                let mut c = code;
                let mut key = home.clone();
                let mut on_shell = false;
                for k in key.iter_mut() {
                    let off = (c % side) as i64 - ring;
                    c /= side;
                    on_shell |= off.abs() == ring;
                    *k += off;
                }
                if !on_shell {
                    continue;
                }
                if let Some(cells) = self.buckets.get(&key) {
                    for &ci in cells {
                        let idx = unflatten(ci, &self.dims);
                        let mut d2 = 0.0;
                        for a in 0..n {
                            let clo = (self.origin[a] + idx[a] as i64) as f64 * h;
                            let chi = clo + h;
                            let xa = x.coords()[a];
                            let g = (clo - xa).max(xa - chi).max(0.0);
                            d2 += g * g;
                        }
                        best = best.min(d2.sqrt());
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edt_line() {
        let f = [FAR, FAR, 0.0, FAR, FAR, FAR, 0.0];
        let mut out = [0.0; 7];
        let mut v = [0usize; 7];
        let mut z = [0.0; 8];
        edt_1d(&f, &mut out, &mut v, &mut z);
        assert_eq!(out, [4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0]);
    }

    #[test]
    fn edt_matches_brute_force() {
        let g = DomainMask::l_shape(4).unwrap();
        let o = g.origin().to_vec();
        let comp: Vec<Vec<i64>> = (0..g.vdims[0] as i64)
            .flat_map(|i| (0..g.vdims[1] as i64).map(move |j| vec![i, j]))
            .map(|v| vec![v[0] + o[0], v[1] + o[1]])
            .filter(|v| g.vertex_dist2(v) == 0.0)
            .collect();
        for i in 0..g.vdims[0] as i64 {
            for j in 0..g.vdims[1] as i64 {
                let v = [i + o[0], j + o[1]];
                let brute = comp
                    .iter()
                    .map(|c| ((c[0] - v[0]).pow(2) + (c[1] - v[1]).pow(2)) as f64)
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(g.vertex_dist2(&v), brute);
            }
        }
    }

    #[test]
    fn square_distances() {
        let g = DomainMask::unit_square(5).unwrap();
        assert!((g.volume() - 1.0).abs() < 1e-15);
        assert!((g.boundary_distance(&Point::xy(0.5, 0.5)) - 0.5).abs() < 1e-15);
        assert!((g.boundary_distance(&Point::xy(0.1, 0.3)) - 0.1).abs() < 1e-15);
        assert_eq!(g.boundary_distance(&Point::xy(1.0, 0.3)), 0.0);
        assert!(!g.contains(&Point::xy(1.2, 0.3)));
        // the whole square at level 0 touches the boundary
        assert_eq!(g.cube_boundary_dist2(0, &[0, 0]), Some(0));
        assert_eq!(g.cube_boundary_dist2(0, &[1, 0]), None);
        // level-2 cube [1/4,1/2]²: distance 1/4 = 8 cells
        assert_eq!(g.cube_boundary_dist2(2, &[1, 1]), Some(64));
    }

    #[test]
    fn puncture_and_l_shape() {
        let g = DomainMask::punctured_square(4).unwrap();
        assert!(!g.contains(&Point::xy(0.5, 0.5)));
        assert!(g.contains_ignoring_punctures(&Point::xy(0.5, 0.5)));
        let d = g.boundary_distance(&Point::xy(0.55, 0.5));
        assert!((d - 0.05).abs() < 1e-12);
        assert_eq!(g.cube_boundary_dist2(2, &[1, 1]), None);

        let l = DomainMask::l_shape(4).unwrap();
        assert!(!l.contains(&Point::xy(0.75, 0.75)));
        let d = l.boundary_distance(&Point::xy(0.25, 0.75));
        assert!((d - 0.25).abs() < 1e-15);
        let d = l.boundary_distance(&Point::xy(0.4, 0.4));
        assert!((d - (0.02f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn formats_round_trip() {
        let g = DomainMask::l_shape(3).unwrap();
        let back = DomainMask::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back.inside, g.inside);
        assert_eq!(back.origin, g.origin);

        let rows = r#"{"n":2,"level":2,"origin":[-1,-1],"rows":["......",".####.",".####.",".####.",".####.","......"]}"#;
        let sq = DomainMask::from_json(rows).unwrap();
        assert_eq!(sq.inside, DomainMask::unit_square(2).unwrap().inside);

        let pbm = "P1\n# square\n6 6\n000000\n011110\n011110\n011110\n011110\n000000\n";
        let sq2 = DomainMask::from_pbm(pbm, 2, vec![-1, -1]).unwrap();
        assert_eq!(sq2.inside, sq.inside);
        assert!(DomainMask::from_json(r##"{"n":2,"level":2,"rows":["#x"]}"##).is_err());
        assert!(DomainMask::from_json(r#"{"n":2,"level":2,"rows":[".."]}"#).is_err());
    }

    #[test]
    fn three_dimensional_cube() {
        let g = DomainMask::from_fn(3, 3, vec![-1; 3], vec![10; 3], vec![], |c| {
            c.iter().all(|&x| x > 0.0 && x < 1.0)
        })
        .unwrap();
        assert_eq!(g.cube_boundary_dist2(2, &[1, 1, 1]), Some(4));
        assert!((g.boundary_distance(&Point::new(vec![0.5, 0.3, 0.5])) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn half_lattice_matches_point_queries() {
        let g = DomainMask::punctured_square(3).unwrap().clone();
        let l = DomainMask::l_shape(3).unwrap();
        for m in [&g, &l] {
            let lat = m.half_lattice_dist2().unwrap();
            let h = m.cell_side();
            for b in 0..lat.dims[1] {
                for a in 0..lat.dims[0] {
                    let x = Point::xy(
                        (m.origin()[0] as f64 + a as f64 / 2.0) * h,
                        (m.origin()[1] as f64 + b as f64 / 2.0) * h,
                    );
                    let want = m.boundary_distance(&x);
                    let got = lat.get(a, b).sqrt() * h / 2.0;
                    assert!((want - got).abs() < 1e-12, "{a} {b}: {want} vs {got}");
                }
            }
        }
    }
}
