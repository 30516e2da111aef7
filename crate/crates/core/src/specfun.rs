//! Dimensional constants and special functions.
//!
//! Γ is evaluated exactly (up to rounding) at integers and half-integers and
//! with a Lanczos approximation (g = 7, 9 terms, relative error below 1e-14)
//! elsewhere. Complete elliptic integrals use the arithmetic-geometric mean.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Identifier of the Γ approximation, reported by `upcap --version`.
pub const GAMMA_METHOD: &str = "exact half-integer recurrence; Lanczos g=7 n=9 otherwise";

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) for real x outside the non-positive integers.
pub fn gamma(x: f64) -> f64 {
    let twice = 2.0 * x;
    if x > 0.0 && twice == twice.round() && x <= 170.0 {
        return gamma_half_integer(twice as u32);
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Γ(m/2) for a positive integer m.
fn gamma_half_integer(m: u32) -> f64 {
    let (mut value, mut arg) = if m % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = m as f64 / 2.0;
    while arg < target {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// Euler Beta function B(a, b) = Γ(a)Γ(b)/Γ(a+b).
pub fn beta_fn(a: f64, b: f64) -> f64 {
    if a + b == 1.0 && a > 0.0 && b > 0.0 {
        // reflection: Γ(a)Γ(1-a) = π / sin(πa), exact for a = 1/2
        return PI / (PI * a).sin();
    }
    gamma(a) * gamma(b) / gamma(a + b)
}

fn check_dim(op: &'static str, n: usize, min: usize) -> Result<()> {
    ensure(n >= min, op, || format!("dimension must be >= {min}, got {n}"))
}

/// Surface area ω_{n-1} = 2π^{n/2}/Γ(n/2) of the unit sphere in ℝⁿ.
/// `n = 1` gives ω₀ = 2 (the two points ±1).
pub fn sphere_area(n: usize) -> Result<f64> {
    check_dim("sphere_area", n, 1)?;
    let h = n as f64 / 2.0;
    Ok(2.0 * PI.powf(h) / gamma(h))
}

/// Volume Ω_n of the unit ball of ℝⁿ.
pub fn ball_volume(n: usize) -> Result<f64> {
    check_dim("ball_volume", n, 1)?;
    let h = n as f64 / 2.0;
    Ok(PI.powf(h) / gamma(h + 1.0))
}

/// K_n = (1/Γ(n/2 + 1)) (n√π/2)ⁿ, equal to 2⁻ⁿ ω_{n-1}ⁿ Ω_n^{1-n}.
pub fn grisha_k(n: usize) -> Result<f64> {
    check_dim("grisha_K", n, 1)?;
    let nf = n as f64;
    Ok((nf * PI.sqrt() / 2.0).powi(n as i32) / gamma(nf / 2.0 + 1.0))
}

/// Kissing number and the covering-overlap constant N*_n = κ(n) + 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KissingEntry {
    pub kappa: u32,
    pub n_star: u32,
}

/// Built-in kissing numbers (dimensions 2, 3, 4).
pub const KISSING_TABLE: [(usize, u32); 3] = [(2, 6), (3, 12), (4, 24)];

/// κ(n) and N*_n. Dimensions outside the built-in table need `kappa_override`.
pub fn kissing_table(n: usize, kappa_override: Option<u32>) -> Result<KissingEntry> {
    let kappa = match kappa_override {
        Some(k) => k,
        None => KISSING_TABLE
            .iter()
            .find(|(d, _)| *d == n)
            .map(|(_, k)| *k)
            .ok_or_else(|| {
                Error::domain(
                    "kissing_table",
                    format!("no built-in kissing number for n={n}; supply an override"),
                )
            })?,
    };
    Ok(KissingEntry {
        kappa,
        n_star: kappa + 1,
    })
}

/// All per-dimension constants in one place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub n: usize,
    pub omega: f64,
    pub volume: f64,
    pub k_n: f64,
    pub n_star: Option<u32>,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Result<Self> {
        check_dim("DimensionConstants", n, 2)?;
        Ok(DimensionConstants {
            n,
            omega: sphere_area(n)?,
            volume: ball_volume(n)?,
            k_n: grisha_k(n)?,
            n_star: kissing_table(n, None).ok().map(|e| e.n_star),
        })
    }
}

/// M₁(n, β) = max{2^{β+n} ((n-1)/β)ⁿ N*_n, 1/K_n} for β ∈ (0, n].
pub fn m1(n: usize, beta: f64) -> Result<f64> {
    let n_star = kissing_table(n, None)?.n_star;
    m1_with(n, beta, n_star)
}

/// [`m1`] with an explicit overlap constant N*_n.
pub fn m1_with(n: usize, beta: f64, n_star: u32) -> Result<f64> {
    const OP: &str = "M1";
    check_dim(OP, n, 2)?;
    ensure(beta > 0.0 && beta <= n as f64, OP, || {
        format!("beta must lie in (0, n], got {beta}")
    })?;
    let nf = n as f64;
    let first = 2f64.powf(beta + nf) * ((nf - 1.0) / beta).powi(n as i32) * n_star as f64;
    Ok(first.max(1.0 / grisha_k(n)?))
}

/// c_n = B(1/(2(n-1)), 1/2)^{1-n} ω_{n-2}; c₂ = 2/π.
pub fn teich_constant(n: usize) -> Result<f64> {
    check_dim("tau_lower_bound", n, 2)?;
    let b = beta_fn(1.0 / (2.0 * (n as f64 - 1.0)), 0.5);
    Ok(b.powi(1 - n as i32) * sphere_area(n - 1)?)
}

/// Logarithmic lower bound c_n log(1 + 2(1+√(1+s))/s) for τ_n(s).
pub fn tau_lower_bound(n: usize, s: f64) -> Result<f64> {
    ensure(s > 0.0 && s.is_finite(), "tau_lower_bound", || {
        format!("s must be positive, got {s}")
    })?;
    Ok(teich_constant(n)? * (2.0 * (1.0 + (1.0 + s).sqrt()) / s).ln_1p())
}

/// The weaker form 2 c_n log(1 + 1/√s).
pub fn tau_lower_bound_weak(n: usize, s: f64) -> Result<f64> {
    ensure(s > 0.0 && s.is_finite(), "tau_lower_bound", || {
        format!("s must be positive, got {s}")
    })?;
    Ok(2.0 * teich_constant(n)? * (1.0 / s.sqrt()).ln_1p())
}

const AGM_TOL: f64 = 1e-15;

/// Arithmetic-geometric mean of two positive numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= AGM_TOL * a {
            break;
        }
        let m = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = m;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind, K(k) = ∫₀^{π/2} dθ/√(1-k² sin²θ),
/// as a function of the modulus k ∈ [0, 1).
pub fn complete_elliptic_k(k: f64) -> Result<f64> {
    ensure((0.0..1.0).contains(&k), "complete_elliptic_K", || {
        format!("modulus must lie in [0,1), got {k}")
    })?;
    Ok(PI / (2.0 * agm(1.0, (1.0 - k * k).sqrt())))
}

/// Modulus μ(r) = (π/2) K(√(1-r²))/K(r) of the Grötzsch ring B² \ [0, r].
pub fn grotzsch_mu(r: f64) -> Result<f64> {
    ensure(r > 0.0 && r < 1.0, "grotzsch_mu", || {
        format!("r must lie in (0,1), got {r}")
    })?;
    let rp = ((1.0 - r) * (1.0 + r)).sqrt();
    Ok(0.5 * PI * agm(1.0, rp) / agm(1.0, r))
}

/// Capacity 2π/μ(r) of the planar Grötzsch condenser (B², [0, r]).
pub fn grotzsch_capacity(r: f64) -> Result<f64> {
    Ok(2.0 * PI / grotzsch_mu(r)?)
}

/// Planar Teichmüller function τ₂(s) = π/μ(1/√(1+s)), the modulus of the
/// curves joining [-1, 0] and [s, ∞).
pub fn teichmuller_tau2(s: f64) -> Result<f64> {
    ensure(s > 0.0 && s.is_finite(), "teichmuller_tau2", || {
        format!("s must be positive, got {s}")
    })?;
    Ok(PI / grotzsch_mu(1.0 / (1.0 + s).sqrt())?)
}

/// Which value of τ_n feeds a derived constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauMode {
    /// τ₂ from elliptic integrals when n = 2, the logarithmic bound otherwise.
    Numeric,
    /// Always the logarithmic lower bound.
    Conservative,
}

/// τ_n(s) or a lower bound for it; the flag is true when the bound was used.
pub fn tau_n(n: usize, s: f64, mode: TauMode) -> Result<(f64, bool)> {
    if n == 2 && mode == TauMode::Numeric {
        Ok((teichmuller_tau2(s)?, false))
    } else {
        Ok((tau_lower_bound(n, s)?, true))
    }
}

fn check_sug(op: &'static str, k: f64, n: usize, x: f64) -> Result<()> {
    ensure(k > 1.0 && k.is_finite(), op, || format!("need K > 1, got {k}"))?;
    check_dim(op, n, 2)?;
    ensure(x > 0.0 && x <= 1.0, op, || format!("need 0 < x <= 1, got {x}"))
}

/// g(x) = log(1+x) (log(K/x))^{n-1}.
pub fn sug_g(k: f64, n: usize, x: f64) -> Result<f64> {
    check_sug("sug_g", k, n, x)?;
    Ok(x.ln_1p() * (k / x).ln().powi(n as i32 - 1))
}

/// Upper bound K((n-1)/e)^{n-1} for [`sug_g`].
pub fn sug_g_bound(k: f64, n: usize) -> f64 {
    k * ((n as f64 - 1.0) / E).powi(n as i32 - 1)
}

/// Right-hand side (1/K)(e/(n-1))^{n-1} log(1+x), a lower bound for
/// (log(K/x))^{1-n} when K > 1 > x > 0.
pub fn sug_log_ratio_lower(k: f64, n: usize, x: f64) -> Result<f64> {
    check_sug("sug_log_ratio_lower", k, n, x)?;
    ensure(x < 1.0, "sug_log_ratio_lower", || format!("need x < 1, got {x}"))?;
    Ok((E / (n as f64 - 1.0)).powi(n as i32 - 1) * x.ln_1p() / k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(1.0), 1.0);
        assert_eq!(gamma(5.0), 24.0);
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-15);
        assert!(rel(gamma(2.5), 0.75 * PI.sqrt()) < 1e-15);
        // Lanczos branch vs the exact branch through the recurrence Γ(x+1) = xΓ(x)
        for x in [0.1, 0.25, 0.3, 1.7, 3.3, 7.9] {
            assert!(rel(gamma(x + 1.0), x * gamma(x)) < 1e-13, "x={x}");
        }
        // Γ(1/4) = 3.6256099082219083119...
        assert!(rel(gamma(0.25), 3.625_609_908_221_908_3) < 1e-13);
        assert!(rel(beta_fn(0.5, 0.5), PI) < 1e-15);
    }

    #[test]
    fn sphere_constants() {
        assert!(rel(sphere_area(2).unwrap(), 2.0 * PI) < 1e-15);
        assert!(rel(sphere_area(3).unwrap(), 4.0 * PI) < 1e-15);
        assert!(rel(ball_volume(2).unwrap(), PI) < 1e-15);
        assert_eq!(sphere_area(1).unwrap(), 2.0);
        assert!(rel(grisha_k(2).unwrap(), PI) < 1e-15);
        for n in 2..=10 {
            let w = sphere_area(n).unwrap();
            let v = ball_volume(n).unwrap();
            assert!(rel(w, n as f64 * v) < 1e-12);
            let alt = 2f64.powi(-(n as i32)) * w.powi(n as i32) * v.powi(1 - n as i32);
            assert!(rel(grisha_k(n).unwrap(), alt) < 1e-12);
        }
        assert!(sphere_area(0).is_err());
    }

    #[test]
    fn kissing() {
        assert_eq!(kissing_table(2, None).unwrap(), KissingEntry { kappa: 6, n_star: 7 });
        assert_eq!(kissing_table(3, None).unwrap().n_star, 13);
        assert_eq!(kissing_table(4, None).unwrap().n_star, 25);
        assert!(kissing_table(8, None).is_err());
        assert_eq!(kissing_table(8, Some(240)).unwrap().n_star, 241);
    }

    #[test]
    fn m1_planar_closed_form() {
        assert!(rel(m1(2, 1.0).unwrap(), 56.0) < 1e-14);
        let b = 0.344_014;
        let v = m1(2, b).unwrap();
        assert!(rel(v, 28.0 * 2f64.powf(b) / (b * b)) < 1e-14);
        assert!((v - 300.3).abs() < 0.1, "{v}");
        assert!(m1(2, 0.0).is_err());
        assert!(m1(2, 2.5).is_err());
    }

    #[test]
    fn teich_constant_and_bound() {
        assert_eq!(teich_constant(2).unwrap(), 2.0 / PI);
        let v = tau_lower_bound(2, 80.0).unwrap();
        assert!(rel(v, 2.0 / PI * 1.25f64.ln()) < 1e-14);
        assert!((v - 0.14205).abs() < 1e-5);
        let mut prev = f64::INFINITY;
        for s in [1.0, 10.0, 1e2, 1e4, 1e8] {
            let v = tau_lower_bound(2, s).unwrap();
            assert!(v < prev && v > 0.0);
            assert!(v >= tau_lower_bound_weak(2, s).unwrap());
            prev = v;
        }
        assert!(tau_lower_bound(2, 1e12).unwrap() < 1e-5);
        // n = 3: B(1/4, 1/2)^{-2} · 2π
        let c3 = teich_constant(3).unwrap();
        let b = gamma(0.25) * gamma(0.5) / gamma(0.75);
        assert!(rel(c3, 2.0 * PI / (b * b)) < 1e-13);
    }

    #[test]
    fn elliptic_and_teichmuller() {
        assert!(rel(complete_elliptic_k(0.0).unwrap(), PI / 2.0) < 1e-15);
        // K(1/√2) = Γ(1/4)²/(4√π)
        let k = complete_elliptic_k(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!(rel(k, gamma(0.25).powi(2) / (4.0 * PI.sqrt())) < 1e-13);
        assert!(complete_elliptic_k(1.0).is_err());
        // μ(1/√2) = π/2, hence τ₂(1) = 2
        assert!(rel(grotzsch_mu(std::f64::consts::FRAC_1_SQRT_2).unwrap(), PI / 2.0) < 1e-14);
        assert!(rel(teichmuller_tau2(1.0).unwrap(), 2.0) < 1e-14);
        // μ(r)μ(r') = π²/4
        for r in [0.01, 0.3, 0.8] {
            let rp = (1.0f64 - r * r).sqrt();
            let p = grotzsch_mu(r).unwrap() * grotzsch_mu(rp).unwrap();
            assert!(rel(p, PI * PI / 4.0) < 1e-13);
        }
        let mut prev = f64::INFINITY;
        for i in 1..400 {
            let s = 0.05 * i as f64 * (1.0 + i as f64 / 10.0);
            let t = teichmuller_tau2(s).unwrap();
            assert!(t < prev);
            assert!(t >= tau_lower_bound(2, s).unwrap());
            prev = t;
        }
        assert!(teichmuller_tau2(80.0).unwrap() >= 0.14205);
    }

    #[test]
    fn sug_examples() {
        let v = sug_log_ratio_lower(2.0, 2, 0.5).unwrap();
        assert!(rel(v, 0.5 * E * 1.5f64.ln()) < 1e-15);
        assert!((v - 0.5511).abs() < 1e-4);
        assert!(v <= 1.0 / 4f64.ln());
        assert!(sug_log_ratio_lower(2.0, 2, 1e-12).unwrap() < 1e-11);
        assert!(sug_log_ratio_lower(1.0, 2, 0.5).is_err());
        assert!(sug_log_ratio_lower(2.0, 2, 1.0).is_err());
        for k in [1.01, 2.0, 10.0] {
            for n in 2..6 {
                for i in 1..=1000 {
                    let x = i as f64 / 1000.0;
                    assert!(sug_g(k, n, x).unwrap() <= sug_g_bound(k, n));
                }
            }
        }
    }
}
