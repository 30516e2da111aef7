//! Euclidean and chordal geometry on finite-dimensional points.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// A finite point of ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn origin(n: usize) -> Self {
        Point {
            coords: vec![0.0; n],
        }
    }

    /// Unit vector `e_axis` in ℝⁿ.
    pub fn unit(n: usize, axis: usize) -> Self {
        let mut coords = vec![0.0; n];
        coords[axis] = 1.0;
        Point { coords }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Point { coords: vec![x, y] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Euclidean distance. Panics in debug builds on dimension mismatch;
    /// use [`distance`] for a checked version.
    pub fn dist(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        }
    }

    /// `self + t * dir`.
    pub fn offset(&self, dir: &[f64], t: f64) -> Point {
        Point {
            coords: self
                .coords
                .iter()
                .zip(dir)
                .map(|(a, d)| a + t * d)
                .collect(),
        }
    }

    /// `scale * self + shift`.
    pub fn similarity(&self, scale: f64, shift: &[f64]) -> Point {
        Point {
            coords: self
                .coords
                .iter()
                .zip(shift)
                .map(|(a, s)| scale * a + s)
                .collect(),
        }
    }
}

/// A point of the one-point compactification ℝⁿ ∪ {∞}.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtPoint {
    Finite(Point),
    Infinity,
}

impl From<Point> for ExtPoint {
    fn from(p: Point) -> Self {
        ExtPoint::Finite(p)
    }
}

/// Checked Euclidean distance.
pub fn distance(x: &Point, y: &Point) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            op: "distance",
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(x.dist(y))
}

/// Chordal (spherical) distance `q(x, y)` on ℝⁿ ∪ {∞}; values lie in `[0, 1]`.
pub fn chordal_distance(x: &ExtPoint, y: &ExtPoint) -> Result<f64> {
    match (x, y) {
        (ExtPoint::Infinity, ExtPoint::Infinity) => Ok(0.0),
        (ExtPoint::Finite(p), ExtPoint::Infinity) | (ExtPoint::Infinity, ExtPoint::Finite(p)) => {
            Ok(1.0 / (1.0 + p.norm().powi(2)).sqrt())
        }
        (ExtPoint::Finite(p), ExtPoint::Finite(q)) => {
            let d = distance(p, q).map_err(|_| Error::DimensionMismatch {
                op: "chordal_distance",
                left: p.dim(),
                right: q.dim(),
            })?;
            Ok(d / ((1.0 + p.norm().powi(2)).sqrt() * (1.0 + q.norm().powi(2)).sqrt()))
        }
    }
}

fn check_same_dim(op: &'static str, pts: &[Point]) -> Result<usize> {
    let n = pts.first().ok_or(Error::EmptySet { op })?.dim();
    if let Some(p) = pts.iter().find(|p| p.dim() != n) {
        return Err(Error::DimensionMismatch {
            op,
            left: n,
            right: p.dim(),
        });
    }
    Ok(n)
}

/// Distance `d(J, K)` between two sampled sets (minimum over pairs).
pub fn set_distance(j: &[Point], k: &[Point]) -> Result<f64> {
    let nj = check_same_dim("set_distance", j)?;
    let nk = check_same_dim("set_distance", k)?;
    if nj != nk {
        return Err(Error::DimensionMismatch {
            op: "set_distance",
            left: nj,
            right: nk,
        });
    }
    let mut best = f64::INFINITY;
    for p in j {
        for q in k {
            best = best.min(p.dist(q));
        }
    }
    Ok(best)
}

/// Diameter `d(J)` of a sampled set (maximum over pairs).
pub fn set_diameter(j: &[Point]) -> Result<f64> {
    check_same_dim("set_diameter", j)?;
    let mut best: f64 = 0.0;
    for (i, p) in j.iter().enumerate() {
        for q in &j[i + 1..] {
            best = best.max(p.dist(q));
        }
    }
    Ok(best)
}

/// Ball with a finite center; `closed` distinguishes B̄ from B.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub closed: bool,
}

impl Ball {
    pub fn new(center: Point, radius: f64, closed: bool) -> Result<Self> {
        ensure(radius > 0.0 && radius.is_finite(), "Ball::new", || {
            format!("radius must be positive, got {radius}")
        })?;
        Ok(Ball {
            center,
            radius,
            closed,
        })
    }

    pub fn contains(&self, p: &Point) -> bool {
        let d = self.center.dist(p);
        if self.closed {
            d <= self.radius
        } else {
            d < self.radius
        }
    }

    /// `B(a, r) ⊆ B(b, s)` for closed balls iff `|a - b| + r ≤ s`.
    pub fn is_inside(&self, other: &Ball) -> bool {
        self.center.dist(&other.center) + self.radius <= other.radius
    }

    pub fn is_disjoint(&self, other: &Ball) -> bool {
        self.center.dist(&other.center) > self.radius + other.radius
    }
}

/// Closed annulus `R(x, outer, inner) = B̄(x, outer) \ B(x, inner)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: Point,
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn new(center: Point, inner: f64, outer: f64) -> Result<Self> {
        ensure(0.0 < inner && inner < outer, "Annulus::new", || {
            format!("need 0 < inner < outer, got inner={inner}, outer={outer}")
        })?;
        Ok(Annulus {
            center,
            inner,
            outer,
        })
    }

    pub fn contains(&self, p: &Point) -> bool {
        let d = self.center.dist(p);
        self.inner <= d && d <= self.outer
    }

    pub fn ratio(&self) -> f64 {
        self.outer / self.inner
    }
}

/// Common annulus `R(w, b + |x1-x2|, a - |x1-x2|)` containing both
/// `R(x_j, b, a)`; requires `|x1 - x2| < a`.
pub fn enclosing_annulus(x1: &Point, x2: &Point, a: f64, b: f64) -> Result<Annulus> {
    const OP: &str = "enclosing_annulus";
    ensure(0.0 < a && a < b, OP, || format!("need 0 < a < b, got a={a}, b={b}"))?;
    let sep = distance(x1, x2)?;
    ensure(sep < a, OP, || format!("need |x1-x2| < a, got {sep} >= {a}"))?;
    Annulus::new(x1.midpoint(x2), a - sep, b + sep)
}

/// Upper bound on the modulus ratio `d/c` of [`enclosing_annulus`].
pub fn enclosing_ratio_bound(a: f64, b: f64, sep: f64) -> f64 {
    (b / a) * (1.0 + sep / b) / (1.0 - sep / a)
}

/// Superannulus `R(w, τ²b, a/τ²)` with `w` the midpoint of `x1, x2`.
///
/// Contains `R(x_j, τb, a/τ)` for both centers and is itself contained in
/// `B(x_j, 2τ²b)` whenever `|x1 - x2| < a/τ²` and `τ ≥ 2`.
pub fn superannulus(x1: &Point, x2: &Point, a: f64, b: f64, tau: f64) -> Result<Annulus> {
    const OP: &str = "superannulus";
    ensure(0.0 < a && a < b, OP, || format!("need 0 < a < b, got a={a}, b={b}"))?;
    ensure(tau >= 2.0 && tau.is_finite(), OP, || {
        format!("need tau >= 2, got {tau}")
    })?;
    let sep = distance(x1, x2)?;
    let t2 = tau * tau;
    ensure(sep < a / t2, OP, || {
        format!("separation hypothesis |x1-x2| < a/tau^2 violated: {sep} >= {}", a / t2)
    })?;
    Annulus::new(x1.midpoint(x2), a / t2, t2 * b)
}

/// Exponent and maximal dilatation of the radial stretch `x ↦ |x|^{a-1} x`
/// mapping the sphere of radius α onto the sphere of radius β.
pub fn radial_dilatation(alpha: f64, beta: f64, n: usize) -> Result<(f64, f64)> {
    const OP: &str = "radial_dilatation";
    ensure(alpha > 0.0 && alpha < 1.0, OP, || {
        format!("alpha must lie in (0,1), got {alpha}")
    })?;
    ensure(beta > 0.0 && beta < 1.0, OP, || {
        format!("beta must lie in (0,1), got {beta}")
    })?;
    ensure(n >= 2, OP, || format!("dimension must be >= 2, got {n}"))?;
    let a = beta.ln() / alpha.ln();
    let e = (n - 1) as i32;
    Ok((a, a.powi(e).max(a.powi(-e))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chordal_examples() {
        let o = ExtPoint::Finite(Point::origin(2));
        assert_eq!(chordal_distance(&o, &o).unwrap(), 0.0);
        assert!((chordal_distance(&o, &ExtPoint::Infinity).unwrap() - 1.0).abs() < 1e-15);
        let e1 = ExtPoint::Finite(Point::unit(2, 0));
        let q = chordal_distance(&o, &e1).unwrap();
        assert!((q - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let bad = ExtPoint::Finite(Point::origin(3));
        assert!(matches!(
            chordal_distance(&o, &bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn set_distance_and_diameter() {
        let z = vec![Point::origin(2)];
        assert_eq!(set_distance(&z, &z).unwrap(), 0.0);
        let two = vec![Point::origin(2), Point::unit(2, 0)];
        assert_eq!(set_diameter(&two).unwrap(), 1.0);
        assert!(matches!(set_diameter(&[]), Err(Error::EmptySet { .. })));

        // [0,1/3] and [2/3,1] sampled at spacing 1/300
        let left: Vec<_> = (0..=100).map(|i| Point::xy(i as f64 / 300.0, 0.0)).collect();
        let right: Vec<_> = (200..=300).map(|i| Point::xy(i as f64 / 300.0, 0.0)).collect();
        let mut brute = f64::INFINITY;
        for p in &left {
            for q in &right {
                brute = brute.min((p.coords()[0] - q.coords()[0]).abs());
            }
        }
        let d = set_distance(&left, &right).unwrap();
        assert!((d - brute).abs() < 1e-15);
        assert!((d - 1.0 / 3.0).abs() <= 1.0 / 300.0);
    }

    #[test]
    fn superannulus_examples() {
        let o = Point::origin(2);
        let r = superannulus(&o, &o, 1.0, 2.0, 2.0).unwrap();
        assert_eq!((r.inner, r.outer), (0.25, 8.0));

        let x2 = Point::xy(0.2, 0.0);
        let r = superannulus(&o, &x2, 1.0, 2.0, 2.0).unwrap();
        assert!((r.center.coords()[0] - 0.1).abs() < 1e-15);
        assert_eq!((r.inner, r.outer), (0.25, 8.0));
        for xj in [&o, &x2] {
            for i in 0..720 {
                let th = i as f64 * std::f64::consts::PI / 360.0;
                for rad in [0.5, 1.0, 2.5, 4.0] {
                    let p = xj.offset(&[th.cos(), th.sin()], rad);
                    assert!(r.contains(&p), "{p:?}");
                }
            }
        }

        assert!(superannulus(&o, &Point::xy(0.25, 0.0), 1.0, 2.0, 2.0).is_err());
        assert!(superannulus(&o, &o, 2.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn enclosing_ratio_is_bounded() {
        let (a, b) = (1.0, 3.0);
        let x1 = Point::origin(2);
        for sep in [0.0, 0.1, 0.5, 0.9] {
            let x2 = Point::xy(sep, 0.0);
            let r = enclosing_annulus(&x1, &x2, a, b).unwrap();
            assert!(r.ratio() <= enclosing_ratio_bound(a, b, sep) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn radial_dilatation_examples() {
        let (a, k) = radial_dilatation(0.3, 0.3, 2).unwrap();
        assert_eq!((a, k), (1.0, 1.0));
        let (a, k) = radial_dilatation(0.25, 0.5, 2).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (k - 2.0).abs() < 1e-14);
        let (a, k) = radial_dilatation(0.5, 0.25, 3).unwrap();
        assert!((a - 2.0).abs() < 1e-15 && (k - 4.0).abs() < 1e-14);
        assert!(radial_dilatation(1.0, 0.5, 2).is_err());
        assert!(radial_dilatation(0.5, 0.0, 2).is_err());
    }
}
