//! End-to-end acceptance checks. Every criterion prints one line of the form
//! `criterion N: PASS|FAIL <details>`. The target runs without the libtest
//! harness so the lines are always shown; it exits non-zero if any
//! criterion failed, after all of them have run.

use std::f64::consts::{E, FRAC_2_PI, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use upcap::bounds::{
    beta_exponent, capacity_lower_bound, content_lower_bound, quad_threshold, separating_annuli,
};
use upcap::capacity2d::{annulus_condenser, cap_x_e_r, planar_ring, solve_capacity, SolveOptions};
use upcap::geom::Point;
use upcap::mask::DomainMask;
use upcap::metrics::{j_metric_in, phi_uniform_check, DomainGraph};
use upcap::sets::{
    cantor_middle_third, hausdorff_content_upper, nested_ball_cantor, up_parameter_estimate,
    CompactSet, UP_SAFETY,
};
use upcap::specfun::{m1, sug_g, sug_g_bound, sug_log_ratio_lower, teich_constant};
use upcap::testfn::{
    harnack_params, min_cap_near, moduli_sandwich_factor, u_alpha, whitney_cube_test_cached,
    CubeCache, CubeTestOptions, EvalOptions, TestDomain,
};
use upcap::whitney::{decompose, verify};

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// Pinned tolerances.
const BETA_TOL: f64 = 1e-5;
const M1_TOL: f64 = 1e-12;
const ANNULUS_TOL: f64 = 0.03;
const SOLVER_SLACK: f64 = 0.03;
const STABILITY_TOL: f64 = 0.20;
const QH_TOL: f64 = 0.05;
const ORACLE_TOL: f64 = 1e-12;
const CANTOR_BAND: (f64, f64) = (0.35, 0.60);

fn criterion_1() -> Outcome {
    let b = beta_exponent(0.4).unwrap();
    let b1 = beta_exponent(1.0 - 1e-12).unwrap();
    let ok_b = (b - 0.34401).abs() <= BETA_TOL && (b1 - 0.63093).abs() <= BETA_TOL;
    let mut worst = 0.0f64;
    for i in 1..=100 {
        let beta = 2.0 * i as f64 / 100.0;
        let want = 28.0 * 2f64.powf(beta) / (beta * beta);
        worst = worst.max(rel(m1(2, beta).unwrap(), want));
    }
    let c2 = teich_constant(2).unwrap();
    let ok = ok_b && worst <= M1_TOL && c2 == FRAC_2_PI;
    (
        ok,
        format!(
            "beta(2/5)={b:.6} beta(1-)={b1:.6} (tol {BETA_TOL:e}); M1 worst rel err {worst:.1e} (tol {M1_TOL:e}); c2-2/pi={:e}",
            c2 - FRAC_2_PI
        ),
    )
}

fn criterion_2() -> Outcome {
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for ratio in [1.5, 2.0, E, 4.0, 8.0] {
        let exact = planar_ring(1.0 / ratio, 1.0);
        let err = |cells| {
            let c = annulus_condenser(1.0 / ratio, 1.0, cells).unwrap();
            rel(solve_capacity(&c, &opts).unwrap().capacity, exact)
        };
        let (coarse, fine) = (err(256), err(512));
        ok &= fine <= ANNULUS_TOL && fine < coarse;
        parts.push(format!("b/a={ratio:.3}: {fine:.2e} (256: {coarse:.2e})"));
    }
    (ok, format!("rel err at 512 cells, tol {ANNULUS_TOL}; {}", parts.join(", ")))
}

fn criterion_3() -> Outcome {
    let e = cantor_middle_third(10);
    let c_hat = up_parameter_estimate(&e).unwrap().c_hat;
    let bound = capacity_lower_bound(2, c_hat).unwrap().value;
    let opts = SolveOptions::default();
    let centres = [0usize, 300, 777, 1500, 2047];
    let mut min_cap = f64::INFINITY;
    let mut fails = 0;
    for &i in &centres {
        let a = &e.points[i];
        for r in [0.1, 0.25, 0.45] {
            let cap = cap_x_e_r(a, &e, r, 8, &opts).unwrap().capacity;
            min_cap = min_cap.min(cap);
            if cap < bound {
                fails += 1;
            }
        }
    }
    (
        fails == 0,
        format!("c_hat={c_hat:.4}, bound={bound:.3e}, min solver cap={min_cap:.4} over 15 condensers, {fails} below"),
    )
}

fn criterion_4() -> Outcome {
    // ten balls on one Cantor sample, one ball on each of ten nested-ball sets
    let cantor = cantor_middle_third(10);
    let mut sets: Vec<&CompactSet> = vec![&cantor; 10];
    let nested: Vec<CompactSet> = (0..10)
        .map(|seed| nested_ball_cantor(2, 0.5, 1.0, 8, seed).unwrap().1)
        .collect();
    sets.extend(nested.iter());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    let mut fails = 0;
    for e in sets {
        let c_hat = up_parameter_estimate(e).unwrap().c_hat;
        let beta = beta_exponent(c_hat).unwrap();
        let a = &e.points[rng.gen_range(0..e.len())];
        let r = rng.gen_range(0.05..0.5) * e.diameter();
        let piece = e.restrict_to_ball(a, r);
        let upper = hausdorff_content_upper(&piece, beta, 12).unwrap().value;
        let lower = content_lower_bound(2, c_hat, r).unwrap().value;
        worst = worst.min(upper / lower);
        if upper < lower {
            fails += 1;
        }
    }
    (fails == 0, format!("20 configurations, {fails} inversions, smallest upper/lower ratio {worst:.3}"))
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["square", "l-shape", "punctured-square"] {
        let g = DomainMask::builtin(name, 10).unwrap();
        let d = decompose(&g, 0, 8).unwrap();
        let v = verify(&d, &g);
        ok &= v.passed() && v.coverage_deficit < 0.01;
        parts.push(format!(
            "{name}: {} cubes, {} violations, deficit {:.2e}, covered {:.3}",
            v.cubes,
            v.violations(),
            v.coverage_deficit,
            v.covered_fraction
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let opts = CubeTestOptions::default();
    let levels = [6u32, 7, 8];

    let square = DomainMask::builtin("square", 10).unwrap();
    let mut cache = CubeCache::new();
    let mins: Vec<f64> = levels
        .iter()
        .map(|&k| {
            let d = decompose(&square, 0, k).unwrap();
            whitney_cube_test_cached(&square, &d, &opts, &mut cache).unwrap().min_cap
        })
        .collect();
    let (lo, hi) = mins
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let spread = hi / lo - 1.0;

    let punct = DomainMask::builtin("punctured-square", 10).unwrap();
    let p = punct.puncture_points()[0].clone();
    let mut cache = CubeCache::new();
    let near: Vec<f64> = levels
        .iter()
        .map(|&k| {
            let d = decompose(&punct, 0, k).unwrap();
            let rep = whitney_cube_test_cached(&punct, &d, &opts, &mut cache).unwrap();
            min_cap_near(&rep, &p, 1.0 / 32.0).unwrap_or(f64::NAN)
        })
        .collect();
    let decreasing = near.windows(2).all(|w| w[1] < w[0]);
    (
        spread < STABILITY_TOL && decreasing,
        format!(
            "square min cap {:.4?} (spread {spread:.3}, tol {STABILITY_TOL}); puncture-adjacent min {:.4?}",
            mins, near
        ),
    )
}

fn criterion_7() -> Outcome {
    let eval = EvalOptions::default();
    let (alpha, s) = (0.5, 0.1);
    let c = harnack_params(alpha, s, 2).unwrap();
    let square = TestDomain::mask(DomainMask::builtin("square", 8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut harnack_fails = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z = Point::xy(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
        let rad = s * square.boundary_distance(&z) * rng.gen::<f64>().sqrt();
        let th = rng.gen_range(0.0..2.0 * PI);
        let x = Point::xy(z.coords()[0] + rad * th.cos(), z.coords()[1] + rad * th.sin());
        let uz = u_alpha(&square, &z, alpha, &eval).unwrap().value;
        let ux = u_alpha(&square, &x, alpha, &eval).unwrap().value;
        worst = worst.max(uz / (c * ux));
        if uz > c * ux * (1.0 + SOLVER_SLACK) {
            harnack_fails += 1;
        }
    }

    let disk = TestDomain::Disk { center: [0.0, 0.0], radius: 1.0 };
    let origin = Point::xy(0.0, 0.0);
    let mut sandwich_fails = 0;
    let mut oracle_fails = 0;
    for _ in 0..50 {
        let a: f64 = rng.gen_range(0.05..0.9);
        let b: f64 = rng.gen_range(a + 0.02..0.95);
        let kappa = moduli_sandwich_factor(a, b, 2).unwrap();
        let ua = u_alpha(&disk, &origin, a, &eval).unwrap().value;
        let ub = u_alpha(&disk, &origin, b, &eval).unwrap().value;
        if ua > ub * (1.0 + SOLVER_SLACK) || ub > kappa * ua * (1.0 + SOLVER_SLACK) {
            sandwich_fails += 1;
        }
        // on the disk the ring ratio attains κ, so only rounding is allowed
        let (ea, eb) = (planar_ring(a, 1.0), planar_ring(b, 1.0));
        let sharp_ok = ea <= eb && eb <= kappa * ea * (1.0 + ORACLE_TOL);
        if rel(ua, ea) > SOLVER_SLACK || rel(ub, eb) > SOLVER_SLACK || !sharp_ok {
            oracle_fails += 1;
        }
    }
    (
        harnack_fails + sandwich_fails + oracle_fails == 0,
        format!(
            "C={c:.4}, max u(z)/(C u(x))={worst:.3}, {harnack_fails}/100 Harnack fails; {sandwich_fails}/50 sandwich fails, {oracle_fails}/50 ring-oracle fails (slack {SOLVER_SLACK})"
        ),
    )
}

fn random_inside(g: &DomainMask, rng: &mut ChaCha8Rng) -> Point {
    let (lo, hi) = g.bbox();
    loop {
        let p = Point::xy(rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]));
        if g.contains(&p) && g.boundary_distance(&p) >= g.cell_side() {
            return p;
        }
    }
}

fn criterion_8() -> Outcome {
    let strip = DomainMask::builtin("strip", 5).unwrap();
    let graph = DomainGraph::from_mask(&strip).unwrap();
    let k = graph.quasihyperbolic(&Point::xy(0.0, 1.0), &Point::xy(0.0, 2.0)).unwrap().value;
    let qh_err = rel(k, 2f64.ln());

    let l = DomainMask::builtin("l-shape", 6).unwrap();
    let graph = DomainGraph::from_mask(&l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut j_fails = 0;
    for _ in 0..1000 {
        let (x, y) = (random_inside(&l, &mut rng), random_inside(&l, &mut rng));
        let rep = graph.quasihyperbolic(&x, &y).unwrap();
        if j_metric_in(&l, &x, &y).unwrap() > rep.value + rep.tolerance {
            j_fails += 1;
        }
    }

    let square = DomainMask::builtin("square", 6).unwrap();
    let pairs: Vec<(Point, Point)> = (0..200)
        .map(|_| (random_inside(&square, &mut rng), random_inside(&square, &mut rng)))
        .collect();
    let phi = phi_uniform_check(&square, &pairs, |t| t).unwrap();
    (
        qh_err <= QH_TOL && j_fails == 0 && phi.violations == 0,
        format!(
            "k((0,1),(0,2))={k:.4} vs log2 rel err {qh_err:.3} (tol {QH_TOL}); j>k+tol on {j_fails}/1000 pairs; phi(t)=t violations {}/{}",
            phi.violations, phi.pairs
        ),
    )
}

/// Gap scan written directly from the definition: for every centre and every
/// candidate radius (each sample distance in the window, plus the window's
/// upper end) evaluate `D_a(r)/r` with a binary search.
fn brute_force_up(e: &CompactSet) -> f64 {
    let mut diam = 0.0f64;
    for p in &e.points {
        for q in &e.points {
            diam = diam.max(p.dist(q));
        }
    }
    let (lo, hi) = (UP_SAFETY * e.resolution, 0.5 * diam);
    let mut best = f64::INFINITY;
    for a in &e.points {
        let mut d: Vec<f64> = e.points.iter().map(|x| x.dist(a)).filter(|&t| t > 0.0).collect();
        d.sort_by(f64::total_cmp);
        let candidates = d.iter().copied().filter(|&r| r > lo && r < hi).chain([hi]);
        for r in candidates {
            let below = d.partition_point(|&t| t < r);
            let big_d = if below == 0 { 0.0 } else { d[below - 1] };
            best = best.min(big_d / r);
        }
    }
    best
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sets = vec![cantor_middle_third(6), cantor_middle_third(8), cantor_middle_third(10)];
    for seed in 0..3 {
        sets.push(nested_ball_cantor(2, 0.6, 1.0, 7, seed).unwrap().1);
    }
    for _ in 0..3 {
        let pts = (0..300).map(|_| Point::xy(rng.gen(), rng.gen())).collect();
        sets.push(CompactSet::new(2, 1e-3, pts).unwrap());
    }
    let circle = (0..512)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / 512.0;
            Point::xy(t.cos(), t.sin())
        })
        .collect();
    sets.push(CompactSet::new(2, PI / 512.0, circle).unwrap());

    let mut worst = 0.0f64;
    let mut sim_exact = true;
    for e in &sets {
        let c = up_parameter_estimate(e).unwrap().c_hat;
        worst = worst.max((c - brute_force_up(e)).abs());
        let scaled = e.similarity(0.25, &[0.0, 0.0]);
        sim_exact &= up_parameter_estimate(&scaled).unwrap().c_hat == c;
    }
    let two = CompactSet::new(2, 1e-4, vec![Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)]).unwrap();
    let two_c = up_parameter_estimate(&two).unwrap().c_hat;
    let cantor = up_parameter_estimate(&cantor_middle_third(10)).unwrap().c_hat;
    let in_band = (CANTOR_BAND.0..=CANTOR_BAND.1).contains(&cantor);
    (
        worst <= ORACLE_TOL && sim_exact && two_c == 0.0 && in_band,
        format!(
            "{} sets, max |fast - brute| = {worst:.1e} (tol {ORACLE_TOL:e}); scale-1/4 invariance exact: {sim_exact}; two-point c_hat={two_c}; Cantor c_hat={cantor:.4} in [{}, {}]",
            sets.len(),
            CANTOR_BAND.0,
            CANTOR_BAND.1
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    let mut quad_fails = 0;
    for _ in 0..1000 {
        let a = rng.gen_range(1e-3..20.0);
        let p = rng.gen_range(1..=6u32);
        let lambda = rng.gen_range(1.01..5.0);
        let th = quad_threshold(a, p, lambda).unwrap();
        let t = th * (1.0 + rng.gen_range(0.0..2.0f64).powi(3));
        let lp = lambda.powi(p as i32);
        if t - a < lp * (1.0 + t).sqrt() * (1.0 - 1e-13) {
            quad_fails += 1;
        }
    }

    let mut sug_fails = 0;
    let mut grid = 0;
    for n in 2..=5usize {
        for ki in 0..25 {
            let k = 1.0 + 1e-3 * 1e5f64.powf(ki as f64 / 24.0);
            for xi in 1..=100 {
                let x = (xi as f64 / 100.0).powi(3);
                grid += 1;
                if sug_g(k, n, x).unwrap() > sug_g_bound(k, n) {
                    sug_fails += 1;
                }
                if x < 1.0 {
                    let lhs = (k / x).ln().powi(1 - n as i32);
                    if sug_log_ratio_lower(k, n, x).unwrap() > lhs {
                        sug_fails += 1;
                    }
                }
            }
        }
    }

    let mut annuli_fails = 0;
    let mut applied = 0;
    for _ in 0..1000 {
        let lambda = rng.gen_range(1.05..8.0f64);
        let floor = lambda * lambda + 2.0 * lambda + 2.0;
        let u = floor * 1e4f64.powf(rng.gen::<f64>());
        let sa = separating_annuli(u, 1.0, lambda).unwrap();
        let lp = lambda.powi(sa.p as i32);
        if !(lp + 2.0 < u && u <= lp * lambda + 2.0) {
            annuli_fails += 1;
        }
        if sa.lower_bound_applies {
            applied += 1;
            if sa.p_lower >= sa.p as f64 {
                annuli_fails += 1;
            }
        }
    }
    (
        quad_fails + sug_fails + annuli_fails == 0 && applied > 0,
        format!(
            "quadratic threshold {quad_fails}/1000 fails; g-bound and log-ratio bound {sug_fails} fails on {grid} grid points; separating annuli {annuli_fails} fails ({applied} in regime)"
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for (id, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = run();
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {id}: {verdict} {detail} [{:.1}s]", start.elapsed().as_secs_f64());
        if !ok {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
