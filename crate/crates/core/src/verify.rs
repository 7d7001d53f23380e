//! The acceptance criteria and property suites, as plain functions returning pass/fail records.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continuation::{
    conjugate_reflection_check, crosscheck, inverse_scattering, taylor0_recursion, CrosscheckConfig, Method,
    PicardConfig,
};
use crate::fourier::FourierSeries;
use crate::frequency::{
    check_exp_dist_bound, check_small_divisor_bound, export_set_geometry, in_km, DiophantineClass, Frequency,
    GeometryOptions,
};
use crate::kam::{
    dynamical_residual, factorization_defect, fsolves_defect, linearized_solve, mean_identity_residual,
    solve_curve, SolverConfig,
};
use crate::obstruction::{
    beta_gamma_oracle, delta_star, e_star, obstruction_order, projector, Exactness, RationalFreq,
    DEFAULT_THRESHOLD,
};
use crate::operators::{MultiplierCache, MultiplierKind};
use crate::sweep::{run_sweep, Axis, SweepConfig, SweepGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>3} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.seconds
        )
    }
}

fn timed(id: &str, name: &str, body: impl FnOnce() -> (bool, String)) -> CriterionResult {
    let t = Instant::now();
    let (passed, measured) = body();
    CriterionResult {
        id: id.to_string(),
        name: name.to_string(),
        passed,
        measured,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn golden() -> Frequency {
    Frequency::from_real((5f64.sqrt() - 1.0) / 2.0)
}

fn cosf() -> FourierSeries {
    FourierSeries::cosine(1, 1)
}

fn random_zero_mean(rng: &mut ChaCha8Rng, n: usize, size: f64) -> FourierSeries {
    let mut s = FourierSeries::zeros(n);
    for k in 1..=n as i64 {
        let decay = size / (k * k) as f64;
        for kk in [k, -k] {
            s.set_coeff(kk, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay);
        }
    }
    s
}

fn one_plus(s: &FourierSeries) -> FourierSeries {
    let mut a = s.clone();
    a.set_coeff(0, a.coeff(0) + ONE);
    a
}

fn random_km_freq(rng: &mut ChaCha8Rng, cls: &DiophantineClass, im_max: f64) -> Frequency {
    loop {
        let f = Frequency::from_omega(Complex64::new(rng.gen_range(0.0..1.0), rng.gen_range(-im_max..im_max)));
        if in_km(&f, cls) {
            return f;
        }
    }
}

fn fmt_err(e: crate::Error) -> (bool, String) {
    (false, format!("error: {e}"))
}

/// Golden-mean benchmark: Newton converges in at most 8 steps with a dynamical residual below 1e-10.
pub fn golden_benchmark() -> CriterionResult {
    timed("1", "golden-mean benchmark", || {
        let t = Instant::now();
        let curve = match solve_curve(&cosf(), &golden(), Complex64::new(0.05, 0.0), &SolverConfig::default()) {
            Ok(c) => c,
            Err(e) => return fmt_err(e),
        };
        let d = dynamical_residual(&curve, 1024).unwrap_or(f64::INFINITY);
        let secs = t.elapsed().as_secs_f64();
        let it = curve.report.iterations;
        (
            curve.report.converged && it <= 8 && d < 1e-10 && secs < 5.0,
            format!("{it} steps, dynamical residual {d:.3e}"),
        )
    })
}

/// Fitted order of convergence on the golden benchmark.
pub fn quadratic_convergence() -> CriterionResult {
    timed("2", "quadratic convergence", || {
        let curve = match solve_curve(&cosf(), &golden(), Complex64::new(0.05, 0.0), &SolverConfig::default()) {
            Ok(c) => c,
            Err(e) => return fmt_err(e),
        };
        let hist: Vec<String> = curve.report.residual_history.iter().map(|r| format!("{r:.2e}")).collect();
        match curve.report.quadratic_fit_slope {
            Some(s) => (
                (1.8..=2.2).contains(&s),
                format!("slope {s:.3} (need [1.8, 2.2]); residuals [{}]", hist.join(", ")),
            ),
            None => (false, "too few pre-floor residuals to fit".into()),
        }
    })
}

/// Newton, Picard and Taylor-at-0 agree where their domains overlap.
pub fn three_method_agreement() -> CriterionResult {
    timed("3", "three-method agreement", || {
        let t = Instant::now();
        let eps = Complex64::new(0.05, 0.0);
        let cfg = CrosscheckConfig {
            newton: SolverConfig::with_cutoff(64),
            picard: PicardConfig {
                cutoff: 64,
                ..PicardConfig::default()
            },
            ..CrosscheckConfig::default()
        };
        let r = crosscheck(&cosf(), &Frequency::from_q(Complex64::new(0.3, 0.0)), eps, &Method::ALL, &cfg);
        let pt = r.diff(Method::Picard, Method::Taylor0).unwrap_or(f64::INFINITY);
        let pn = r.diff(Method::Picard, Method::Newton).unwrap_or(f64::INFINITY);
        let cfg = CrosscheckConfig::default();
        let w = Frequency::from_omega(Complex64::new(0.5, 0.5));
        let r = crosscheck(&cosf(), &w, eps, &[Method::Newton, Method::Picard], &cfg);
        let np = r.diff(Method::Newton, Method::Picard).unwrap_or(f64::INFINITY);
        let secs = t.elapsed().as_secs_f64();
        (
            pt < 1e-8 && pn < 1e-10 && np < 1e-10 && secs < 10.0,
            format!(
                "q=0.3: |picard-taylor0| {pt:.2e}, |picard-newton| {pn:.2e}; ω=½+½i: |newton-picard| {np:.2e}"
            ),
        )
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Worst {
    factorization: f64,
    zero_mean: f64,
    fsolves: f64,
    operators: f64,
}

/// Exact identities of the linearized scheme and the difference operators, on 20+ random instances each.
pub fn identity_suites() -> CriterionResult {
    timed("4", "exact-identity suites", || {
        use MultiplierKind::*;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cls = DiophantineClass::new(6.0, 0.5, 500).expect("valid class");
        let mut w = Worst::default();
        let mut count = 0;
        for _ in 0..24 {
            count += 1;
            // Factorization identity: real parts anywhere, small imaginary parts so the
            // truncated products stay well conditioned.
            let freq = Frequency::from_omega(Complex64::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.02)));
            let a = one_plus(&random_zero_mean(&mut rng, 3, 0.05));
            let h = random_zero_mean(&mut rng, 6, 0.1);
            match factorization_defect(&a, &h, &freq, 48) {
                Ok(d) => w.factorization = w.factorization.max(d / (a.l1_norm() * h.l1_norm())),
                Err(e) => return fmt_err(e),
            }

            let freq = random_km_freq(&mut rng, &cls, 0.1);
            let f = &cosf() + &FourierSeries::sine(2, 2).scale(Complex64::new(rng.gen_range(-0.5..0.5), 0.0));
            let eps = Complex64::new(rng.gen_range(0.01..0.1), 0.0);
            let u = random_zero_mean(&mut rng, 32, 0.01);
            match mean_identity_residual(&u, &f, &freq, eps) {
                Ok(d) => w.zero_mean = w.zero_mean.max(d / (eps.norm() * f.l1_norm())),
                Err(e) => return fmt_err(e),
            }

            // Δ carries |q|^{±64} at this cutoff, so the check stays near the real axis.
            let near = random_km_freq(&mut rng, &cls, 0.02);
            let a = one_plus(&random_zero_mean(&mut rng, 4, 0.02)).resized(64);
            let e = random_zero_mean(&mut rng, 8, 0.05).resized(64);
            let res = linearized_solve(&a, &e, &near).and_then(|x| fsolves_defect(&a, &x, &e, &near));
            match res {
                Ok(d) => w.fsolves = w.fsolves.max(d / e.l1_norm()),
                Err(e) => return fmt_err(e),
            }

            let phi = random_zero_mean(&mut rng, 16, 0.5)
                + FourierSeries::constant(Complex64::new(rng.gen_range(-1.0..1.0), 0.0), 16);
            let cache = MultiplierCache::new(freq, 16);
            let ap = |k, p: &FourierSeries| cache.apply(k, p);
            let scale = phi.max_coeff();
            let mut centered = phi.clone();
            centered.set_coeff(0, ZERO);
            let checks = (|| -> crate::Result<f64> {
                let mut worst: f64 = 0.0;
                worst = worst.max((&ap(Nabla, &ap(Gamma, &phi)?)? - &centered).max_coeff() / scale);
                let lhs = ap(ShiftPlus, &ap(Gamma, &phi)?)?;
                let rhs = ap(GammaMinus, &phi)?;
                for k in -16..=16i64 {
                    let s = freq.log_modulus_pow(k).exp().max(1.0);
                    worst = worst.max((lhs.coeff(k) - rhs.coeff(k)).norm() / (scale * s));
                }
                let d = ap(Delta, &phi)?;
                let nn = ap(Nabla, &ap(NablaMinus, &phi)?)?;
                worst = worst.max((&d - &nn).max_coeff() / (scale * d.max_coeff().max(1.0)));
                let gg = ap(Gamma, &ap(GammaMinus, &phi)?)?;
                worst = worst.max((&gg - &ap(EQ, &phi)?).max_coeff() / scale);
                Ok(worst)
            })();
            match checks {
                Ok(d) => w.operators = w.operators.max(d),
                Err(e) => return fmt_err(e),
            }
        }
        (
            w.factorization < 1e-12 && w.zero_mean < 1e-11 && w.fsolves < 1e-11 && w.operators < 1e-13,
            format!(
                "{count} instances each: factorization {:.2e}, zero-mean {:.2e}, linearized defect {:.2e}, operator identities {:.2e}",
                w.factorization, w.zero_mean, w.fsolves, w.operators
            ),
        )
    })
}

/// Small-divisor majorant on K_M and the exponential distance bound in the band |Im z| ≤ ½.
pub fn small_divisor_bounds() -> CriterionResult {
    timed("5", "small-divisor bounds", || {
        let cls = DiophantineClass::new(6.0, 0.5, 2000).expect("valid class");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pairs = 0;
        let mut violations = 0;
        let mut worst: f64 = 0.0;
        // 50 frequencies × 200 modes.
        for i in 0..50 {
            let f = match i {
                0 => Frequency::zero(),
                1 => Frequency::infinity(),
                _ => random_km_freq(&mut rng, &cls, if i % 2 == 0 { 0.05 } else { 1.0 }),
            };
            pairs += 200;
            match check_small_divisor_bound(&f, &cls, 100) {
                Ok(r) => worst = worst.max(r.max_ratio),
                Err(_) => violations += 1,
            }
        }
        let mut dist_viol = 0;
        let mut dist_min = f64::INFINITY;
        for _ in 0..10_000 {
            let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-0.5..=0.5));
            match check_exp_dist_bound(z) {
                Ok(s) => dist_min = dist_min.min(s),
                Err(_) => dist_viol += 1,
            }
        }
        (
            violations == 0 && worst <= 1.0 && dist_viol == 0,
            format!(
                "{pairs} (q,k) pairs: {violations} violations, max |λ_k|/(√2M|k|^(1+τ)) = {worst:.3}; 10000 z: {dist_viol} violations, min slack {dist_min:.2e}"
            ),
        )
    })
}

/// Support and top-coefficient laws of the Taylor-at-0 coefficients, and inverse scattering.
pub fn taylor_structure() -> CriterionResult {
    timed("6", "Taylor-at-0 structure", || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut support_ok = true;
        let mut top: f64 = 0.0;
        let mut scatter: f64 = 0.0;
        for deg in 1..=5usize {
            let f = random_zero_mean(&mut rng, deg, 1.0).scale(Complex64::new(0.5, 0.0));
            let eps = Complex64::new(rng.gen_range(0.01..0.1), rng.gen_range(-0.02..0.02));
            let d = match taylor0_recursion(&f, eps, 40) {
                Ok(d) => d,
                Err(e) => return fmt_err(e),
            };
            for n in 1..=40usize {
                let un = d.order(n);
                if un.modes().any(|(k, c)| k.unsigned_abs() as usize > n && c != ZERO) {
                    support_ok = false;
                }
                for k in [n as i64, -(n as i64)] {
                    top = top.max((un.coeff(k) - eps * f.coeff(k)).norm());
                }
            }
            let rec = inverse_scattering(&d);
            for k in -(deg as i64)..=deg as i64 {
                scatter = scatter.max((rec.coeff(k) - eps * f.coeff(k)).norm());
            }
        }
        (
            support_ok && top < 1e-14 && scatter < 1e-12,
            format!(
                "40 orders, degrees 1..5: support law {}, top law {top:.2e}, inverse scattering {scatter:.2e}",
                if support_ok { "exact" } else { "violated" }
            ),
        )
    })
}

/// Obstruction order and β/γ oracle at rational frequencies for f = cos 2πθ.
pub fn obstruction_cases() -> CriterionResult {
    timed("7", "obstruction at rational frequencies", || {
        let t = Instant::now();
        let mut ok = true;
        let mut parts = Vec::new();
        for (p, m) in [(1, 2), (1, 3), (2, 5), (1, 7)] {
            let rf = RationalFreq::new(p, m).expect("coprime");
            let rep = obstruction_order(&cosf(), &rf, 10, DEFAULT_THRESHOLD, Exactness::Float);
            let n = rep.n_star;
            let betas_pos = n.is_some_and(|n| rep.betas[..n].iter().all(|&b| b > 0.0));
            let gap = match (rep.gamma_engine, rep.gamma_oracle) {
                (Some(a), Some(b)) => (a - b).norm() / b.norm(),
                _ => f64::INFINITY,
            };
            ok &= n == Some(m as usize) && betas_pos && gap < 1e-12;
            parts.push(format!(
                "{p}/{m}: n★={} β>0 {} gap {gap:.1e}",
                n.map_or("none".into(), |n| n.to_string()),
                betas_pos
            ));
        }
        let secs = t.elapsed().as_secs_f64();
        (ok && secs < 5.0, parts.join("; "))
    })
}

/// Total gap measure of the real Diophantine set against 2ζ(1+τ)/M, monotone in M.
pub fn set_geometry() -> CriterionResult {
    timed("8", "set geometry", || {
        let opts = GeometryOptions {
            boundary_points: 0,
            list_gaps: false,
            min_listed_width: 0.0,
        };
        let mut measures = Vec::new();
        let mut ok = true;
        for m in [6.0, 12.0] {
            let cls = DiophantineClass::new(m, 0.5, 10_000).expect("valid class");
            let g = export_set_geometry(&cls, &opts);
            ok &= g.total_gap_measure <= g.measure_bound;
            measures.push((m, g.total_gap_measure, g.measure_bound));
        }
        ok &= measures[1].1 < measures[0].1;
        let txt: Vec<String> = measures
            .iter()
            .map(|(m, t, b)| format!("M={m}: {t:.6} ≤ {b:.6}"))
            .collect();
        (ok, format!("{} (m_max 10^4)", txt.join(", ")))
    })
}

/// Conjugate reflection across the unit circle, and real curves at real frequencies.
pub fn symmetry() -> CriterionResult {
    timed("9", "symmetry", || {
        let w = Frequency::from_omega(Complex64::new(0.5, 0.5));
        let refl = match conjugate_reflection_check(&cosf(), &w, 0.05, &SolverConfig::default()) {
            Ok(d) => d,
            Err(e) => return fmt_err(e),
        };
        let curve = match solve_curve(&cosf(), &golden(), Complex64::new(0.05, 0.0), &SolverConfig::default()) {
            Ok(c) => c,
            Err(e) => return fmt_err(e),
        };
        let imag = curve
            .u
            .to_grid(1024)
            .iter()
            .chain(curve.v.to_grid(1024).iter())
            .fold(0.0f64, |a, z| a.max(z.im.abs()));
        (
            refl < 1e-10 && imag < 1e-12,
            format!("reflection defect {refl:.2e}; max |Im| on real θ {imag:.2e}"),
        )
    })
}

/// Solves carrying the classes M = 6 and M = 12 at a frequency admissible for both.
pub fn multi_m_consistency() -> CriterionResult {
    timed("10", "multi-M consistency", || {
        let freq = Frequency::from_omega(Complex64::new((5f64.sqrt() - 1.0) / 2.0, 0.02));
        let mut us = Vec::new();
        for m in [6.0, 12.0] {
            let cls = DiophantineClass::new(m, 0.5, 2000).expect("valid class");
            if !in_km(&freq, &cls) {
                return (false, format!("frequency not in K_M for M = {m}"));
            }
            let cfg = SolverConfig {
                class: Some(cls),
                ..SolverConfig::default()
            };
            match solve_curve(&cosf(), &freq, Complex64::new(0.05, 0.0), &cfg) {
                Ok(c) => us.push(c.u),
                Err(e) => return fmt_err(e),
            }
        }
        let d = (&us[0] - &us[1]).sup_norm();
        (d < 1e-12, format!("sup |u_6 − u_12| = {d:.2e}"))
    })
}

fn sweep_bytes(workers: usize) -> crate::Result<(Vec<u8>, Vec<u8>)> {
    let grid = SweepGrid {
        omega_re: Axis::new(0.55, 0.65, 4),
        omega_im: Axis::new(0.0, 0.1, 3),
        eps: vec![Complex64::new(0.05, 0.0)],
    };
    let cfg = SweepConfig {
        solver: SolverConfig::with_cutoff(64),
        workers,
        ..SweepConfig::default()
    };
    let out = run_sweep(&cosf(), &grid, &cfg)?;
    let mut lines = Vec::new();
    out.write_jsonl(&mut lines)?;
    let family = serde_json::to_vec(&out.family).map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
    Ok((lines, family))
}

/// Sweep output does not depend on the number of workers.
pub fn sweep_determinism() -> CriterionResult {
    timed("11", "sweep determinism", || {
        let mut outs = Vec::new();
        for w in [1, 4, 8] {
            match sweep_bytes(w) {
                Ok(o) => outs.push(o),
                Err(e) => return fmt_err(e),
            }
        }
        let same = outs.windows(2).all(|p| p[0] == p[1]);
        (
            same,
            format!(
                "workers 1/4/8: {} ({} + {} bytes)",
                if same { "byte-identical" } else { "differ" },
                outs[0].0.len(),
                outs[0].1.len()
            ),
        )
    })
}

pub fn acceptance() -> Vec<CriterionResult> {
    vec![
        golden_benchmark(),
        quadratic_convergence(),
        three_method_agreement(),
        identity_suites(),
        small_divisor_bounds(),
        taylor_structure(),
        obstruction_cases(),
        set_geometry(),
        symmetry(),
        multi_m_consistency(),
        sweep_determinism(),
    ]
}

/// Obstruction law for pure cosines `cos 2πKθ`, all coprime p/m with m ≤ 7.
pub fn obstruction_law() -> CriterionResult {
    timed("P1", "obstruction law, K ≤ 3, m ≤ 7", || {
        let mut cases = 0;
        let mut bad = Vec::new();
        for k in 1..=3u32 {
            let f = FourierSeries::cosine(k, 0);
            for m in 1..=7i64 {
                for p in 0..m {
                    let Ok(rf) = RationalFreq::new(p, m) else { continue };
                    cases += 1;
                    let rep = obstruction_order(&f, &rf, 8, DEFAULT_THRESHOLD, Exactness::Float);
                    let oracle = beta_gamma_oracle(k as i64, &rf, rep.predicted_n_star, Complex64::new(0.5, 0.0));
                    let positive = oracle.betas.iter().all(|&b| b > 0.0);
                    if rep.n_star != Some(rep.predicted_n_star) || !positive {
                        bad.push(format!("K={k} {p}/{m}"));
                    }
                }
            }
        }
        (bad.is_empty(), format!("{cases} cases, failures: [{}]", bad.join(", ")))
    })
}

/// `Δ★∘E + Π₀ = id` and `Π₀∘Δ★ = 0` on random series.
pub fn partial_inverse() -> CriterionResult {
    timed("P2", "partial inverse at rational frequencies", || {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut worst: f64 = 0.0;
        for m in 1..=9i64 {
            let rf = RationalFreq::new(1, m).expect("coprime");
            for _ in 0..5 {
                let phi = random_zero_mean(&mut rng, 20, 1.0);
                let back = &delta_star(&e_star(&phi, &rf), &rf) + &projector(&phi, &rf, 0);
                worst = worst.max((&back - &phi).max_coeff() / phi.max_coeff());
                worst = worst.max(projector(&delta_star(&phi, &rf), &rf, 0).max_coeff());
            }
        }
        (worst < 1e-14, format!("worst defect {worst:.2e}"))
    })
}

/// A single-point sweep reproduces a direct solve.
pub fn sweep_matches_solve() -> CriterionResult {
    timed("P3", "single-point sweep equals solve", || {
        let w = Complex64::new(0.6, 0.05);
        let grid = SweepGrid {
            omega_re: Axis::point(w.re),
            omega_im: Axis::point(w.im),
            eps: vec![Complex64::new(0.05, 0.0)],
        };
        let cfg = SweepConfig {
            solver: SolverConfig::with_cutoff(64),
            store_curves: true,
            fd_step: 0.0,
            ..SweepConfig::default()
        };
        let out = match run_sweep(&cosf(), &grid, &cfg) {
            Ok(o) => o,
            Err(e) => return fmt_err(e),
        };
        let direct = match solve_curve(&cosf(), &Frequency::from_omega(w), Complex64::new(0.05, 0.0), &cfg.solver) {
            Ok(c) => c,
            Err(e) => return fmt_err(e),
        };
        let same = out.records[0].u.as_ref() == Some(&direct.u);
        (same, format!("coefficients {}", if same { "identical" } else { "differ" }))
    })
}

/// Radial approach to a root of unity: Picard iteration counts near q = r e^{2πi/3}.
pub fn radial_diagnostic() -> CriterionResult {
    timed("P4", "radial approach to e^(2πi/3) (diagnostic)", || {
        let rf = RationalFreq::new(1, 3).expect("coprime");
        let cfg = PicardConfig {
            cutoff: 64,
            ..PicardConfig::default()
        };
        let samples = crate::obstruction::radial_approach(
            &cosf(),
            &rf,
            Complex64::new(0.1, 0.0),
            &[0.5, 0.7, 0.8, 0.9, 0.95],
            &cfg,
        );
        let txt: Vec<String> = samples
            .iter()
            .map(|s| match s.iterations {
                Some(n) => format!("r={}: {n}", s.radius),
                None => format!("r={}: failed", s.radius),
            })
            .collect();
        (true, txt.join(", "))
    })
}

pub fn properties() -> Vec<CriterionResult> {
    vec![obstruction_law(), partial_inverse(), sweep_matches_solve(), radial_diagnostic()]
}

/// `"acceptance"`, `"properties"`, `"all"`, or a single criterion id.
pub fn run_suite(name: &str) -> Option<Vec<CriterionResult>> {
    let single: fn() -> CriterionResult = match name {
        "acceptance" => return Some(acceptance()),
        "properties" => return Some(properties()),
        "all" => {
            let mut v = acceptance();
            v.extend(properties());
            return Some(v);
        }
        "1" => golden_benchmark,
        "2" => quadratic_convergence,
        "3" => three_method_agreement,
        "4" => identity_suites,
        "5" => small_divisor_bounds,
        "6" => taylor_structure,
        "7" => obstruction_cases,
        "8" => set_geometry,
        "9" => symmetry,
        "10" => multi_m_consistency,
        "11" => sweep_determinism,
        "P1" | "p1" => obstruction_law,
        "P2" | "p2" => partial_inverse,
        "P3" | "p3" => sweep_matches_solve,
        "P4" | "p4" => radial_diagnostic,
        _ => return None,
    };
    Some(vec![single()])
}
