use std::f64::consts::PI;

use kamforge::continuation::{picard_solve, taylor0_eval, taylor0_recursion, PicardConfig};
use kamforge::frequency::{dioph_real_margin, export_set_geometry, DiophantineClass, GeometryOptions};
use kamforge::kam::{solve_curve, SolverConfig};
use kamforge::operators::{apply, MultiplierKind};
use kamforge::{FourierSeries, Frequency};
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cosf() -> FourierSeries {
    FourierSeries::cosine(1, 0)
}

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// `f(x) = cos 2πx` applied to a complex argument.
fn cos2pi(z: Complex64) -> Complex64 {
    (z * 2.0 * PI).cos()
}

#[test]
fn golden_curve_is_invariant_under_the_map() {
    let eps = 0.05;
    let curve = solve_curve(&cosf(), &Frequency::from_real(golden()), c(eps, 0.0), &SolverConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..256 {
        let th = j as f64 / 256.0;
        let x = th + curve.u.eval(c(th, 0.0)).unwrap();
        let y = golden() + curve.v.eval(c(th, 0.0)).unwrap();
        let kick = cos2pi(x) * eps;
        let (x1, y1) = (x + y + kick, y + kick);
        let th1 = th + golden();
        let xe = th1 + curve.u.eval(c(th1, 0.0)).unwrap();
        let ye = golden() + curve.v.eval(c(th1, 0.0)).unwrap();
        worst = worst.max((x1 - xe).norm()).max((y1 - ye).norm());
    }
    assert!(worst < 1e-12, "map defect {worst:e}");
}

#[test]
fn complex_frequency_solution_solves_the_difference_equation() {
    let w = c(0.6, 0.08);
    let eps = c(0.05, 0.0);
    let curve = solve_curve(&cosf(), &Frequency::from_omega(w), eps, &SolverConfig::with_cutoff(64)).unwrap();
    let u = &curve.u;
    let mut worst: f64 = 0.0;
    for j in 0..64 {
        let th = c(j as f64 / 64.0, 0.0);
        let lhs = u.eval(th + w).unwrap() - u.eval(th).unwrap() * 2.0 + u.eval(th - w).unwrap();
        let rhs = cos2pi(th + u.eval(th).unwrap()) * eps;
        worst = worst.max((lhs - rhs).norm());
    }
    assert!(worst < 1e-11, "equation defect {worst:e}");
}

#[test]
fn cohomological_multiplier_matches_direct_formula() {
    for q in [c(0.3, 0.2), c(-0.7, 0.1), c(2.0, -1.0), c(0.0, 1.5)] {
        let f = Frequency::from_q(q);
        for k in [-7i64, -2, 1, 3, 9] {
            let direct = 1.0 / (q.powi(k as i32) - 1.0);
            let got = f.lambda(k).unwrap();
            assert!((got - direct).norm() <= 1e-14 * direct.norm().max(1.0), "q={q} k={k}");
        }
    }
}

#[test]
fn picard_and_taylor_agree_inside_the_disc() {
    let q = c(0.2, 0.25);
    let eps = c(0.04, 0.01);
    let cfg = PicardConfig {
        cutoff: 48,
        ..PicardConfig::default()
    };
    let (u, _) = picard_solve(&cosf(), &Frequency::from_q(q), eps, &cfg).unwrap();
    let data = taylor0_recursion(&cosf(), eps, 40).unwrap();
    let (t, rep) = taylor0_eval(&data, q).unwrap();
    assert!(rep.decaying);
    assert!((&u - &t).sup_norm() < 1e-10);
    // First order in ε: u ≈ εE_q f.
    let lin = apply(MultiplierKind::EQ, &cosf(), &Frequency::from_q(q)).unwrap().scale(eps);
    assert!((&u - &lin).sup_norm() < 10.0 * eps.norm_sqr());
}

#[test]
fn diophantine_margin_matches_brute_force() {
    let cls = DiophantineClass::new(6.0, 0.5, 300).unwrap();
    for x in [golden(), 0.4142135623730951, 0.3, 0.5 + 1e-3, 0.71, 0.123456] {
        let mut best = f64::INFINITY;
        for m in 1..=300u64 {
            let mf = m as f64;
            let n = (x * mf).round();
            best = best.min((x - n / mf).abs() * 6.0 * mf.powf(2.5));
        }
        let r = dioph_real_margin(x, &cls);
        assert!((r.margin - best).abs() <= 1e-9 * best.max(1e-9), "x={x}: {} vs {best}", r.margin);
    }
}

#[test]
fn gap_measure_matches_interval_union() {
    let m_max = 60u64;
    let cls = DiophantineClass::new(6.0, 0.5, m_max).unwrap();
    let g = export_set_geometry(&cls, &GeometryOptions::default());
    let mut iv = Vec::new();
    for m in 1..=m_max {
        let r = 1.0 / (6.0 * (m as f64).powf(2.5));
        for n in 0..=m {
            if gcd(n, m) == 1 {
                let x = n as f64 / m as f64;
                iv.push(((x - r).max(0.0), (x + r).min(1.0)));
            }
        }
    }
    iv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    let mut cur = iv[0];
    for &(a, b) in &iv[1..] {
        if a <= cur.1 {
            cur.1 = cur.1.max(b);
        } else {
            total += cur.1 - cur.0;
            cur = (a, b);
        }
    }
    total += cur.1 - cur.0;
    assert!((g.total_gap_measure - total).abs() < 1e-12, "{} vs {total}", g.total_gap_measure);
    assert!(g.total_gap_measure <= g.measure_bound);
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
