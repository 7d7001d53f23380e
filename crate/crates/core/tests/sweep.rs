use kamforge::frequency::c1hol_norm_estimate;
use kamforge::kam::SolverConfig;
use kamforge::sweep::*;
use kamforge::FourierSeries;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn small_grid() -> SweepGrid {
    SweepGrid {
        omega_re: Axis::new(0.57, 0.63, 3),
        omega_im: Axis::new(0.0, 0.08, 3),
        eps: vec![c(0.03, 0.0), c(0.05, 0.0)],
    }
}

fn jsonl(out: &SweepOutput) -> String {
    let mut buf = Vec::new();
    out.write_jsonl(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn output_is_independent_of_worker_count() {
    let f = FourierSeries::cosine(1, 0);
    let run = |workers| {
        let cfg = SweepConfig {
            solver: SolverConfig::with_cutoff(48),
            workers,
            store_curves: true,
            ..SweepConfig::default()
        };
        run_sweep(&f, &small_grid(), &cfg).unwrap()
    };
    let a = run(1);
    let b = run(8);
    assert_eq!(jsonl(&a), jsonl(&b));
    assert_eq!(serde_json::to_string(&a.family).unwrap(), serde_json::to_string(&b.family).unwrap());
    assert_eq!(a.records.len(), 18);
    for (k, line) in jsonl(&a).lines().enumerate() {
        let r: SweepRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r, a.records[k]);
    }
}

#[test]
fn family_derivative_matches_first_order_theory() {
    // For small ε, û_1 ≈ ε·½·q/(q−1)², so dû_1/dq ≈ −ε·½·(q+1)/(q−1)³.
    let eps = 1e-3;
    let grid = SweepGrid {
        omega_re: Axis::point(0.3),
        omega_im: Axis::point(0.1),
        eps: vec![c(eps, 0.0)],
    };
    let cfg = SweepConfig {
        solver: SolverConfig::with_cutoff(16),
        store_curves: true,
        ..SweepConfig::default()
    };
    let out = run_sweep(&FourierSeries::cosine(1, 0), &grid, &cfg).unwrap();
    let q = (c(0.0, 2.0 * std::f64::consts::PI) * c(0.3, 0.1)).exp();
    let expect = -(q + 1.0) / (q - 1.0).powi(3) * (0.5 * eps);
    let got = out.records[0].du_dq.as_ref().unwrap().coeff(1);
    assert!((got - expect).norm() < 1e-2 * expect.norm(), "{got} vs {expect}");
    assert_eq!(out.family.points.len(), 1);
}

#[test]
fn family_feeds_the_norm_estimate() {
    let grid = SweepGrid {
        omega_re: Axis::new(0.6, 0.64, 3),
        omega_im: Axis::new(0.03, 0.06, 2),
        eps: vec![c(0.05, 0.0)],
    };
    let cfg = SweepConfig {
        solver: SolverConfig::with_cutoff(48),
        ..SweepConfig::default()
    };
    let out = run_sweep(&FourierSeries::cosine(1, 0), &grid, &cfg).unwrap();
    assert_eq!(out.converged_count(), 6);
    let n = c1hol_norm_estimate(&out.family).unwrap();
    assert!(n.n0 > 0.0 && n.n0.is_finite());
    assert!(n.total().is_finite());
}

#[test]
fn failures_stay_inline_and_in_order() {
    let grid = SweepGrid {
        omega_re: Axis::new(0.5, 0.6, 2),
        omega_im: Axis::new(0.0, 0.05, 2),
        eps: vec![c(0.05, 0.0)],
    };
    let cfg = SweepConfig {
        solver: SolverConfig::with_cutoff(32),
        fd_step: 0.0,
        ..SweepConfig::default()
    };
    let out = run_sweep(&FourierSeries::cosine(1, 0), &grid, &cfg).unwrap();
    let status: Vec<bool> = out.records.iter().map(|r| r.converged()).collect();
    assert_eq!(status, vec![false, false, true, true]);
    match &out.records[0].outcome {
        PointOutcome::Failed { kind, .. } => assert_eq!(kind, "resonance"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(out.family.points.is_empty());
    assert!(!out.all_failed());
}
