//! Closed-form bounds: dimension exponents, Hausdorff content, capacity,
//! and the constants that chain them together.
//!
//! Every calculator returns a [`BoundReport`] carrying the inputs it used so
//! that a printed number can be traced back to its formula. Where a constant
//! depends on the Teichmüller function in dimension n ≥ 3 only the logarithmic
//! lower bound is available, and the report is flagged `conservative`.

use std::collections::BTreeMap;
use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::geom::{Annulus, Point};
use crate::specfun::{self, TauMode};

/// A named bound with its audit trail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub inputs: BTreeMap<String, f64>,
    pub formula_ref: String,
    /// A lower bound was substituted for an unavailable exact constant.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub conservative: bool,
    /// The value carries no information (e.g. a UP parameter ≥ 1).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vacuous: bool,
    /// The constant was assembled by following a proof whose final constant
    /// is not stated explicitly.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub proof_traced: bool,
}

impl BoundReport {
    fn new(name: &str, value: f64, formula_ref: &str) -> Self {
        BoundReport {
            name: name.to_string(),
            value,
            inputs: BTreeMap::new(),
            formula_ref: formula_ref.to_string(),
            conservative: false,
            vacuous: false,
            proof_traced: false,
        }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.inputs.insert(key.to_string(), v);
        self
    }

    pub fn input(&self, key: &str) -> Option<f64> {
        self.inputs.get(key).copied()
    }
}

fn check_c(op: &'static str, c: f64) -> Result<()> {
    ensure(c > 0.0 && c < 1.0, op, || format!("c must lie in (0,1), got {c}"))
}

fn check_n(op: &'static str, n: usize) -> Result<()> {
    ensure(n >= 2, op, || format!("dimension must be >= 2, got {n}"))
}

/// β = log 2 / log(3/c), the dimension exponent for `E ∈ UP_n(c)`.
pub fn beta_exponent(c: f64) -> Result<f64> {
    check_c("beta_exponent", c)?;
    Ok(LN_2 / (3.0 / c).ln())
}

/// `Λ^β(E ∩ B̄(a, r)) ≥ r^β / (2·3ⁿ)` for `E ∈ UP_n(c)`, `a ∈ E`.
pub fn content_lower_bound(n: usize, c: f64, r: f64) -> Result<BoundReport> {
    const OP: &str = "content_lower_bound";
    check_n(OP, n)?;
    ensure(r > 0.0, OP, || format!("r must be positive, got {r}"))?;
    let beta = beta_exponent(c)?;
    let value = r.powf(beta) / (2.0 * 3f64.powi(n as i32));
    Ok(BoundReport::new("content_lower_bound", value, "Hausdorff content of UP sets in balls")
        .with("n", n as f64)
        .with("c", c)
        .with("r", r)
        .with("beta", beta))
}

/// `cap(a, E, r) ≥ 1/(2·3ⁿ·M₁(n, β))` for `E ∈ UP_n(c)`.
pub fn capacity_lower_bound(n: usize, c: f64) -> Result<BoundReport> {
    const OP: &str = "capacity_lower_bound";
    check_n(OP, n)?;
    let beta = beta_exponent(c)?;
    let m1 = specfun::m1(n, beta)?;
    let value = 1.0 / (2.0 * 3f64.powi(n as i32) * m1);
    Ok(BoundReport::new("capacity_lower_bound", value, "capacity of UP sets via the Martio content estimate")
        .with("n", n as f64)
        .with("c", c)
        .with("beta", beta)
        .with("M1", m1))
}

/// Converse direction: `cap(a, E, r) ≥ σ` for all admissible `a, r` implies
/// `E ∈ UP_n(c)` with `c = 2 exp{-(ω_{n-1}/σ)^{1/(n-1)}}`. Flagged vacuous
/// when the value is ≥ 1.
pub fn up_from_capacity(n: usize, sigma: f64) -> Result<BoundReport> {
    const OP: &str = "up_from_capacity";
    check_n(OP, n)?;
    ensure(sigma > 0.0, OP, || format!("sigma must be positive, got {sigma}"))?;
    let omega = specfun::sphere_area(n)?;
    let value = 2.0 * (-(omega / sigma).powf(1.0 / (n as f64 - 1.0))).exp();
    let mut rep = BoundReport::new("up_from_capacity", value, "UP parameter from a capacity lower bound")
        .with("n", n as f64)
        .with("sigma", sigma)
        .with("omega", omega);
    rep.vacuous = value >= 1.0;
    Ok(rep)
}

/// λ(n, c) = max{t, 2} with `ω_{n-1} (log 2t)^{1-n} = c/2`.
pub fn lambda_basic(n: usize, c: f64) -> Result<f64> {
    const OP: &str = "lambda_basic";
    check_n(OP, n)?;
    ensure(c > 0.0 && c.is_finite(), OP, || format!("c must be positive, got {c}"))?;
    let omega = specfun::sphere_area(n)?;
    let t = 0.5 * (2.0 * omega / c).powf(1.0 / (n as f64 - 1.0)).exp();
    Ok(t.max(2.0))
}

/// The variant `exp{(4ω_{n-1}/c)^{1/(n-1)}}` used for annuli containing two sets.
pub fn lambda_sets_in_ring(n: usize, c: f64) -> Result<f64> {
    const OP: &str = "lambda_sets_in_ring";
    check_n(OP, n)?;
    ensure(c > 0.0 && c.is_finite(), OP, || format!("c must be positive, got {c}"))?;
    let omega = specfun::sphere_area(n)?;
    Ok((4.0 * omega / c).powf(1.0 / (n as f64 - 1.0)).exp())
}

/// Comparison-principle constant
/// `v(n, b/a, t) = 3^{-n} min{1, v₁(n,t)/A}` with `A = ω_{n-1}(log b/a)^{1-n}`
/// and `v₁ = τ_n(4m²+4m)/2`, `m = 2/t`.
pub fn comparison_constant_v(n: usize, ratio_ba: f64, t: f64, mode: TauMode) -> Result<BoundReport> {
    const OP: &str = "comparison_constant_v";
    check_n(OP, n)?;
    ensure(ratio_ba > 1.0, OP, || format!("b/a must exceed 1, got {ratio_ba}"))?;
    ensure(t > 0.0, OP, || format!("t must be positive, got {t}"))?;
    let omega = specfun::sphere_area(n)?;
    let a = omega * ratio_ba.ln().powi(1 - n as i32);
    let m = 2.0 / t;
    let arg = 4.0 * m * m + 4.0 * m;
    let (tau, conservative) = specfun::tau_n(n, arg, mode)?;
    let v1 = 0.5 * tau;
    let value = 3f64.powi(-(n as i32)) * (v1 / a).min(1.0);
    let mut rep = BoundReport::new("comparison_constant_v", value, "comparison principle for moduli")
        .with("n", n as f64)
        .with("b_over_a", ratio_ba)
        .with("t", t)
        .with("A", a)
        .with("m", m)
        .with("tau_arg", arg)
        .with("v1", v1);
    rep.conservative = conservative;
    Ok(rep)
}

/// μ_n = 3^{-n} min{1, τ_n(80)/(2A)} (log 2)^{n-1} (1/2)(e/(n-1))^{n-1},
/// `A = ω_{n-1}(log 2)^{1-n}`.
pub fn mu_n(n: usize, mode: TauMode) -> Result<BoundReport> {
    const OP: &str = "mu_n";
    check_n(OP, n)?;
    let omega = specfun::sphere_area(n)?;
    let nf = n as f64;
    let a = omega * LN_2.powi(1 - n as i32);
    let (tau80, conservative) = specfun::tau_n(n, 80.0, mode)?;
    let value = 3f64.powi(-(n as i32))
        * (tau80 / (2.0 * a)).min(1.0)
        * LN_2.powi(n as i32 - 1)
        * 0.5
        * (E / (nf - 1.0)).powi(n as i32 - 1);
    let mut rep = BoundReport::new("mu_n", value, "modulus lower bound for two small sets")
        .with("n", nf)
        .with("A", a)
        .with("tau_80", tau80);
    rep.conservative = conservative;
    Ok(rep)
}

/// Output of [`separating_annuli`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatingAnnuli {
    pub p: u32,
    /// Radii `(λ^{m-1} dist/2, λ^m dist/2)` for `m = 1..=p`, centered at `w`.
    pub annuli: Vec<(f64, f64)>,
    /// `log(1 + dE/dist) / (2 log λ)`.
    pub p_lower: f64,
    /// Whether `dE/dist > max{λ^p+2, λ²+2λ+2}`, the regime in which
    /// `p_lower < p` is guaranteed.
    pub lower_bound_applies: bool,
}

impl SeparatingAnnuli {
    pub fn to_annuli(&self, w: &Point) -> Result<Vec<Annulus>> {
        self.annuli
            .iter()
            .map(|&(a, b)| Annulus::new(w.clone(), a, b))
            .collect()
    }
}

/// Number of disjoint annuli separating a nearest point of `E` from a far
/// point of `E`, for `dE = d(E)` and `dist = d(E, ∂G)`.
pub fn separating_annuli(de: f64, dist: f64, lambda: f64) -> Result<SeparatingAnnuli> {
    const OP: &str = "separating_annuli";
    ensure(de > 0.0 && dist > 0.0, OP, || {
        format!("d(E) and d(E, boundary) must be positive, got {de}, {dist}")
    })?;
    ensure(lambda > 1.0, OP, || format!("lambda must exceed 1, got {lambda}"))?;
    let u = de / dist;
    let mut p = 0u32;
    while u > lambda.powi(p as i32 + 1) + 2.0 {
        p += 1;
    }
    let annuli = (1..=p)
        .map(|m| {
            (
                lambda.powi(m as i32 - 1) * dist / 2.0,
                lambda.powi(m as i32) * dist / 2.0,
            )
        })
        .collect();
    let p_lower = u.ln_1p() / (2.0 * lambda.ln());
    let lower_bound_applies =
        p >= 1 && u > (lambda.powi(p as i32) + 2.0).max(lambda * lambda + 2.0 * lambda + 2.0);
    Ok(SeparatingAnnuli {
        p,
        annuli,
        p_lower,
        lower_bound_applies,
    })
}

/// `λ^{2p} + λ^p √(1+a) + a`; above it `t - a ≥ λ^p √(1+t)`.
pub fn quad_threshold(a: f64, p: u32, lambda: f64) -> Result<f64> {
    const OP: &str = "quad_threshold";
    ensure(a > 0.0, OP, || format!("a must be positive, got {a}"))?;
    ensure(p >= 1, OP, || "p must be >= 1".into())?;
    ensure(lambda > 1.0, OP, || format!("lambda must exceed 1, got {lambda}"))?;
    let lp = lambda.powi(p as i32);
    Ok(lp * lp + lp * (1.0 + a).sqrt() + a)
}

/// `(log(s/r) / log(t/r))^{n-1}`: passing from the outer radius `s` to `t`
/// shrinks `cap(B(x, ·), F)` for `F ⊂ B̄(x, r)` by at most this factor.
pub fn marsarbd_factor(r: f64, s: f64, t: f64, n: usize) -> Result<f64> {
    const OP: &str = "marsarbd_factor";
    check_n(OP, n)?;
    ensure(0.0 < r && r < s && s <= t, OP, || {
        format!("need 0 < r < s <= t, got r={r}, s={s}, t={t}")
    })?;
    Ok(((s / r).ln() / (t / r).ln()).powi(n as i32 - 1))
}

/// `cap(G, E) ≥ s·log(1 + d(E)/d(E, ∂G))` with `s = min{c_A, c_B, c_C}`
/// depending only on `n` and the capacity-density constant `δ`.
///
/// * `c_A = μ_n δ` covers `d(E)/d(E,∂G) ≤ 1/2`.
/// * `c_B = d δ / (16 log Λ)` covers `d(E)/d(E,∂G) ≥ t₀ = Λ⁶ + 1`, where
///   `Λ = λ(n,δ)²` and `d = v(n, 2Λ², 1/(2Λ))/2`.
/// * `c_C = d·min{d₃/(2t₀), δ(log 2/log(2t₀+1))^{n-1}/log(1+t₀)}` covers the
///   middle range, with `d₃ = δ (log 2)^{n-1} (1/2)(e/(n-1))^{n-1}`.
///
/// The input `case_bound` records the constant of the case that applies to the
/// given ratio, times `log(1+u)`.
pub fn cap_ge_lower(n: usize, delta: f64, de: f64, dist: f64, mode: TauMode) -> Result<BoundReport> {
    const OP: &str = "cap_GE_lower";
    check_n(OP, n)?;
    ensure(delta > 0.0 && de > 0.0 && dist > 0.0, OP, || {
        format!("delta, d(E), d(E, boundary) must be positive, got {delta}, {de}, {dist}")
    })?;
    let nf = n as f64;
    let u = de / dist;
    let log_u = u.ln_1p();

    let mu = mu_n(n, mode)?;
    let c_a = mu.value * delta;

    let tau = lambda_basic(n, delta)?;
    let big_lambda = tau * tau;
    let v = comparison_constant_v(n, 2.0 * big_lambda * big_lambda, 1.0 / (2.0 * big_lambda), mode)?;
    let d = v.value / 2.0;
    let c_b = d * delta / (16.0 * big_lambda.ln());

    let t0 = big_lambda.powi(6) + 1.0;
    let d3 = delta * LN_2.powi(n as i32 - 1) * 0.5 * (E / (nf - 1.0)).powi(n as i32 - 1);
    let gamma13 = d3 / (2.0 * t0);
    let gamma23 = delta * (LN_2 / (2.0 * t0 + 1.0).ln()).powi(n as i32 - 1) / t0.ln_1p();
    let c_c = d * gamma13.min(gamma23);

    let s = c_a.min(c_b).min(c_c);
    let case_const = if u <= 0.5 {
        c_a
    } else if u >= t0 {
        c_b
    } else {
        c_c
    };

    let mut rep = BoundReport::new("cap_GE_lower", s * log_u, "capacity of E relative to G from capacity density")
        .with("n", nf)
        .with("delta", delta)
        .with("dE", de)
        .with("dist", dist)
        .with("ratio", u)
        .with("mu_n", mu.value)
        .with("tau", tau)
        .with("Lambda", big_lambda)
        .with("d", d)
        .with("t0", t0)
        .with("d3", d3)
        .with("c_A", c_a)
        .with("c_B", c_b)
        .with("c_C", c_c)
        .with("s", s)
        .with("case_bound", case_const * log_u);
    rep.conservative = mu.conservative || v.conservative;
    rep.proof_traced = true;
    Ok(rep)
}

/// All bounds that follow from a UP parameter `c` in dimension `n`.
pub fn up_summary(n: usize, c: f64) -> Result<Vec<BoundReport>> {
    let beta = beta_exponent(c)?;
    let mut beta_rep = BoundReport::new("beta_exponent", beta, "Hausdorff dimension of UP sets")
        .with("c", c);
    beta_rep.inputs.insert("n".into(), n as f64);
    Ok(vec![
        beta_rep,
        content_lower_bound(n, c, 1.0)?,
        capacity_lower_bound(n, c)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn beta_values() {
        assert!((beta_exponent(0.4).unwrap() - 0.34401).abs() < 1e-5);
        assert!(close(beta_exponent(0.75).unwrap(), 0.5, 1e-14));
        assert!((beta_exponent(1.0 - 1e-12).unwrap() - 0.63093).abs() < 1e-5);
        assert!(beta_exponent(1.0).is_err());
        assert!(beta_exponent(0.0).is_err());
    }

    #[test]
    fn content_and_capacity() {
        // at r = 1 the content bound is 1/18 for every c
        let v = content_lower_bound(2, 0.4, 1.0).unwrap().value;
        assert!(close(v, 1.0 / 18.0, 1e-14));
        let half = content_lower_bound(2, 0.4, 0.5).unwrap();
        assert!(close(half.value, 0.5f64.powf(half.input("beta").unwrap()) / 18.0, 1e-14));

        let cap = capacity_lower_bound(2, 0.4).unwrap();
        assert!(close(cap.input("M1").unwrap(), 300.3, 1e-3));
        assert!(close(cap.value, 1.85e-4, 0.01));
        let cap34 = capacity_lower_bound(2, 0.75).unwrap();
        assert!(close(cap34.value, 1.0 / (18.0 * 28.0 * 2f64.sqrt() / 0.25), 1e-12));
        assert!(close(cap34.value, 3.51e-4, 0.01));
    }

    #[test]
    fn converse_up() {
        assert!(close(up_from_capacity(2, 2.0 * PI).unwrap().value, 2.0 / E, 1e-14));
        assert!(close(up_from_capacity(2, 2.0 * PI / 4f64.ln()).unwrap().value, 0.5, 1e-14));
        let big = up_from_capacity(2, 1e12).unwrap();
        assert!(big.vacuous && big.value > 1.99);
        assert!(!up_from_capacity(2, 1.0).unwrap().vacuous);
        assert!(up_from_capacity(2, 0.0).is_err());
    }

    #[test]
    fn lambda_values() {
        assert!(close(lambda_basic(2, 2.0 * PI).unwrap(), E * E / 2.0, 1e-14));
        assert_eq!(lambda_basic(2, 1e9).unwrap(), 2.0);
        assert!(close(lambda_sets_in_ring(2, 2.0 * PI).unwrap(), E.powi(4), 1e-14));
        assert!(lambda_basic(2, -1.0).is_err());
    }

    #[test]
    fn comparison_constant() {
        let v = comparison_constant_v(2, 2.0, 1.0, TauMode::Conservative).unwrap();
        assert_eq!(v.input("tau_arg").unwrap(), 24.0);
        assert!(close(v.value, 1.6e-3, 0.02), "{}", v.value);
        assert!(v.conservative);
        let num = comparison_constant_v(2, 2.0, 1.0, TauMode::Numeric).unwrap();
        assert!(num.value >= v.value && !num.conservative);
        for t in [0.1, 0.5, 1.0, 4.0, 100.0] {
            assert!(comparison_constant_v(3, 5.0, t, TauMode::Numeric).unwrap().value <= 1.0 / 27.0);
        }
    }

    #[test]
    fn mu_values() {
        let mu = mu_n(2, TauMode::Conservative).unwrap();
        assert!(close(mu.input("A").unwrap(), 9.065, 1e-3));
        assert!(close(mu.value, 8.2e-4, 0.01), "{}", mu.value);
        for n in 2..6 {
            let m = mu_n(n, TauMode::Numeric).unwrap().value;
            let cap = 3f64.powi(-(n as i32)) * LN_2.powi(n as i32 - 1) * 0.5
                * (E / (n as f64 - 1.0)).powi(n as i32 - 1);
            assert!(m > 0.0 && m <= cap);
        }
    }

    #[test]
    fn annuli_examples() {
        let a = separating_annuli(70.0, 1.0, 4.0).unwrap();
        assert_eq!(a.p, 3);
        assert!(close(a.p_lower, 71f64.ln() / (2.0 * 4f64.ln()), 1e-14));
        assert!((a.p_lower - 1.537).abs() < 1e-3);
        assert!(a.lower_bound_applies && a.p_lower < a.p as f64);
        assert_eq!(separating_annuli(6.0, 1.0, 4.0).unwrap().p, 0);
        assert_eq!(separating_annuli(5.0, 1.0, 4.0).unwrap().annuli.len(), 0);
        let w = Point::xy(0.0, 0.0);
        let rings = a.to_annuli(&w).unwrap();
        for pair in rings.windows(2) {
            assert!(pair[0].outer <= pair[1].inner);
        }
    }

    #[test]
    fn quad_and_marsarbd() {
        let t = quad_threshold(2.0, 1, 2.0).unwrap();
        assert!(close(t, 6.0 + 2.0 * 3f64.sqrt(), 1e-14));
        assert!(9.5 - 2.0 >= 2.0 * (10.5f64).sqrt());
        assert_eq!(marsarbd_factor(1.0, 3.0, 3.0, 2).unwrap(), 1.0);
        assert!(close(marsarbd_factor(1.0, 2.0, 4.0, 2).unwrap(), 0.5, 1e-14));
        assert!(marsarbd_factor(1.0, 0.5, 4.0, 2).is_err());
    }

    #[test]
    fn cap_ge_cases() {
        let delta = 0.5;
        let rep = cap_ge_lower(2, delta, 1.0, 4.0, TauMode::Numeric).unwrap();
        let mu = mu_n(2, TauMode::Numeric).unwrap().value;
        assert!(close(rep.input("case_bound").unwrap(), mu * delta * 1.25f64.ln(), 1e-12));
        assert!(rep.value <= rep.input("case_bound").unwrap());
        assert!(rep.value > 0.0 && rep.proof_traced);
        let s = rep.input("s").unwrap();
        let far = cap_ge_lower(2, delta, 1e9, 1.0, TauMode::Numeric).unwrap();
        assert!(close(far.value, s * 1e9f64.ln_1p(), 1e-12));
        let conservative = cap_ge_lower(3, delta, 2.0, 1.0, TauMode::Numeric).unwrap();
        assert!(conservative.conservative);
    }

    proptest! {
        #[test]
        fn quad_threshold_holds(a in 0.01f64..50.0, p in 1u32..5, lambda in 1.01f64..6.0, extra in 0.0f64..100.0) {
            let thr = quad_threshold(a, p, lambda).unwrap();
            let t = thr + extra;
            prop_assert!(t - a >= lambda.powi(p as i32) * (1.0 + t).sqrt() * (1.0 - 1e-12));
        }

        #[test]
        fn annuli_lower_bound(u in 1.5f64..1e6, lambda in 1.05f64..10.0) {
            let rep = separating_annuli(u, 1.0, lambda).unwrap();
            if rep.lower_bound_applies {
                prop_assert!(rep.p_lower < rep.p as f64);
            }
            prop_assert!(u > lambda.powi(rep.p as i32) + 2.0 || rep.p == 0);
            prop_assert!(u <= lambda.powi(rep.p as i32 + 1) + 2.0);
        }

        #[test]
        fn calculators_are_continuous(c in 0.05f64..0.95, n in 2usize..5) {
            let h = 1e-7;
            let f = |c: f64| capacity_lower_bound(n, c).unwrap().value;
            prop_assert!(f(c) > 0.0);
            prop_assert!(((f(c + h) - f(c)) / f(c)).abs() < 1e-4);
            let g = |c: f64| content_lower_bound(n, c, 0.3).unwrap().value;
            prop_assert!(((g(c + h) - g(c)) / g(c)).abs() < 1e-4);
        }
    }
}
