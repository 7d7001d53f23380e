//! Solutions off the unit circle: the fixed point `u = εE_q(f∘(id + u))`, its
//! Taylor expansion at `q = 0`, and cross-checks against the Newton solver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, DEFAULT_CUTOFF, DEFAULT_EXP_CAP};
use crate::frequency::Frequency;
use crate::kam::{self, SolveReport, SolverConfig};
use crate::operators::{e_n, MultiplierCache, MultiplierKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default cap on the number of Taylor orders.
pub const MAX_TAYLOR_ORDERS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardConfig {
    /// Target for the sup-norm of successive differences.
    pub tol: f64,
    pub max_iters: usize,
    pub cutoff: usize,
    /// Required distance `||q| - 1|` from the unit circle.
    pub margin: f64,
    /// Relaxation factor in `(0, 1]`.
    pub relaxation: f64,
    pub exp_cap: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iters: 500,
            cutoff: DEFAULT_CUTOFF,
            margin: 0.05,
            relaxation: 1.0,
            exp_cap: DEFAULT_EXP_CAP,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 || self.cutoff == 0 {
            return Err(Error::InvalidParameter(
                "tol, max_iters and cutoff must be positive".into(),
            ));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::InvalidParameter("margin must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Distance `||q| - 1|`, computed through `log |q|` so it is exact at the poles.
pub fn circle_distance(freq: &Frequency) -> f64 {
    let s = freq.log_scale();
    if s.is_infinite() {
        return f64::INFINITY;
    }
    ((-s).exp() - 1.0).abs()
}

/// Fixed-point iteration `u ← (1-λ)u + λ εE_q(f∘(id + u))` from `u = 0`.
pub fn picard_solve(
    f: &FourierSeries,
    freq: &Frequency,
    eps: Complex64,
    config: &PicardConfig,
) -> Result<(FourierSeries, SolveReport)> {
    config.validate()?;
    let dist = circle_distance(freq);
    if !(dist >= config.margin) {
        return Err(Error::Precondition(format!(
            "| |q| - 1 | = {dist:.3e} is below the fixed-point margin {}",
            config.margin
        )));
    }
    let n = config.cutoff;
    let cache = MultiplierCache::with_cap(*freq, n, config.exp_cap);
    let (f_n, f_tail) = f.truncated(n);
    let mut warnings = Vec::new();
    if f_tail > 0.0 {
        warnings.push(format!("f truncated to cutoff {n}, dropping coefficients up to {f_tail:e}"));
    }
    let lam = Complex64::new(config.relaxation, 0.0);
    let mut u = FourierSeries::zeros(n);
    let mut history = Vec::new();
    let mut tail: f64 = 0.0;
    let mut iterations = 0;
    loop {
        let (comp, rep) = f_n.compose_id_plus_capped(&u, config.exp_cap)?;
        tail = tail.max(rep.aliasing_tail);
        let target = cache.apply(MultiplierKind::EQ, &comp.resized(n))?.scale(eps);
        let next = &u.scale(Complex64::new(1.0, 0.0) - lam) + &target.scale(lam);
        let diff = (&next - &u).sup_norm();
        u = next;
        iterations += 1;
        history.push(diff);
        if !diff.is_finite() {
            return Err(Error::Divergence {
                method: "picard",
                from: history.first().copied().unwrap_or(0.0),
                to: diff,
                max_lambda: f64::NAN,
                history,
            });
        }
        if diff <= config.tol {
            break;
        }
        if iterations >= config.max_iters {
            return Err(Error::NoConvergence {
                method: "picard",
                iterations,
                last: diff,
                history,
            });
        }
    }
    let (comp, _) = f_n.compose_id_plus_capped(&u, config.exp_cap)?;
    Ok((
        u,
        SolveReport {
            quadratic_fit_slope: None,
            residual_history: history,
            beta: eps * comp.mean(),
            aliasing_tail: tail,
            converged: true,
            iterations,
            effective_cutoff: n,
            max_lambda: 0.0,
            strip_norms: Vec::new(),
            warnings,
        },
    ))
}

/// Coefficients `u_n` of `u(q) = Σ_{n≥1} q^n u_n` at `q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTaylorData {
    /// `orders[n-1] = u_n`.
    pub orders: Vec<FourierSeries>,
    pub eps: Complex64,
    pub f_ref: FourierSeries,
}

impl QTaylorData {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// `u_n` for `n ≥ 1`.
    pub fn order(&self, n: usize) -> &FourierSeries {
        &self.orders[n - 1]
    }
}

/// Runs the order-by-order recursion
/// `u_n = ε Σ_{n₀=1}^{n} E^{(n₀)} w_{n-n₀}`, where `w_s` is the `q^s` coefficient
/// of `f∘(id + u)`: `w_0 = f`, `w_s = Σ_{r=1}^{s} f^{(r)}/r! · [q^s](u^r)`.
/// Products are direct convolutions, so structural zeros stay exact.
pub fn taylor0_recursion(f: &FourierSeries, eps: Complex64, orders: usize) -> Result<QTaylorData> {
    taylor0_recursion_capped(f, eps, orders, MAX_TAYLOR_ORDERS)
}

pub fn taylor0_recursion_capped(
    f: &FourierSeries,
    eps: Complex64,
    orders: usize,
    cap: usize,
) -> Result<QTaylorData> {
    if orders > cap {
        return Err(Error::InvalidParameter(format!(
            "{orders} Taylor orders requested, cap is {cap}"
        )));
    }
    // derivs[r] = f^{(r)}/r!
    let mut derivs = vec![f.clone()];
    for r in 1..orders {
        derivs.push(f.derivative(r as u32).scale(Complex64::new(1.0 / factorial(r), 0.0)));
    }
    let mut u: Vec<FourierSeries> = Vec::with_capacity(orders);
    // powers[r-1][s-1] = [q^s](u^r), filled as u grows.
    let mut powers: Vec<Vec<FourierSeries>> = Vec::new();
    let mut w: Vec<FourierSeries> = vec![f.clone()];
    for n in 1..=orders {
        let mut un = FourierSeries::zeros(n);
        for n0 in 1..=n {
            un += &e_n(&w[n - n0], n0).resized(n);
        }
        let un = un.scale(eps);
        u.push(un);

        // Extend the power table to s = n, then form w_n.
        let s = n;
        for r in 1..=s {
            let p = if r == 1 {
                u[s - 1].clone()
            } else {
                let mut acc = FourierSeries::zeros(0);
                for j in 1..=(s + 1 - r) {
                    let prev = &powers[r - 2][s - j - 1];
                    if prev.is_zero() || u[j - 1].is_zero() {
                        continue;
                    }
                    acc += &u[j - 1].product_exact(prev);
                }
                acc
            };
            if powers.len() < r {
                powers.push(vec![FourierSeries::zeros(0); s - 1]);
            }
            powers[r - 1].push(p);
        }
        if n < orders {
            let mut ws = FourierSeries::zeros(0);
            for r in 1..=s {
                let p = &powers[r - 1][s - 1];
                if p.is_zero() {
                    continue;
                }
                ws += &derivs[r].product_exact(p);
            }
            w.push(ws);
        }
    }
    Ok(QTaylorData {
        orders: u,
        eps,
        f_ref: f.clone(),
    })
}

fn factorial(r: usize) -> f64 {
    (1..=r).map(|k| k as f64).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorEvalReport {
    /// `sup |q^n u_n|` for each order.
    pub term_norms: Vec<f64>,
    pub last_term: f64,
    /// `max ‖u_n‖^{1/n}` over the second half of the orders.
    pub root_estimate: f64,
    /// Whether the trailing term norms decay geometrically.
    pub decaying: bool,
    pub warnings: Vec<String>,
}

/// Partial sum `Σ q^n u_n`.
pub fn taylor0_eval(data: &QTaylorData, q: Complex64) -> Result<(FourierSeries, TaylorEvalReport)> {
    if !(q.norm() < 1.0) {
        return Err(Error::Precondition(format!("Taylor evaluation needs |q| < 1, got {}", q.norm())));
    }
    let n = data.len();
    let mut sum = FourierSeries::zeros(n);
    let mut qn = Complex64::new(1.0, 0.0);
    let mut term_norms = Vec::with_capacity(n);
    let mut root: f64 = 0.0;
    for (i, un) in data.orders.iter().enumerate() {
        qn *= q;
        let term = un.scale(qn);
        term_norms.push(term.sup_norm());
        sum += &term.resized(n);
        let order = i + 1;
        if 2 * order > n {
            let norm = un.sup_norm();
            if norm > 0.0 {
                root = root.max(norm.powf(1.0 / order as f64));
            }
        }
    }
    let last_term = term_norms.last().copied().unwrap_or(0.0);
    let decaying = decays_geometrically(&term_norms);
    let mut warnings = Vec::new();
    if !decaying {
        warnings.push("trailing Taylor terms do not decay geometrically; partial sum may be unreliable".into());
    }
    Ok((
        sum,
        TaylorEvalReport {
            term_norms,
            last_term,
            root_estimate: root,
            decaying,
            warnings,
        },
    ))
}

fn decays_geometrically(norms: &[f64]) -> bool {
    let tail: Vec<f64> = norms.iter().rev().take(6).copied().collect();
    if tail.iter().all(|&t| t < 1e-300) {
        return true;
    }
    // Compare the last few terms with the ones three orders earlier.
    tail.len() < 6 || tail[..3].iter().zip(&tail[3..]).all(|(late, early)| *late <= *early || *late < 1e-300)
}

/// Series whose `k`-th coefficient is `coeff(u_{|k|}, k)`; equals `εf` on the recovered range.
pub fn inverse_scattering(data: &QTaylorData) -> FourierSeries {
    let n = data.len();
    let mut out = FourierSeries::zeros(n);
    for k in 1..=n as i64 {
        let un = data.order(k as usize);
        out.set_coeff(k, un.coeff(k));
        out.set_coeff(-k, un.coeff(-k));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Picard,
    Taylor0,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Newton, Method::Picard, Method::Taylor0];

    pub fn name(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::Picard => "picard",
            Method::Taylor0 => "taylor0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrosscheckConfig {
    pub newton: SolverConfig,
    pub picard: PicardConfig,
    pub taylor_orders: usize,
    /// Grid size for the Newton dynamical residual.
    pub grid_n: usize,
}

impl Default for CrosscheckConfig {
    fn default() -> Self {
        Self {
            newton: SolverConfig::default(),
            picard: PicardConfig::default(),
            taylor_orders: 40,
            grid_n: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum MethodOutcome {
    Ok {
        iterations: usize,
        /// Dynamical residual (Newton), `|β|` (Picard) or last-term size (Taylor).
        diagnostic: f64,
    },
    Skipped {
        reason: String,
    },
    Failed {
        kind: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub outcome: MethodOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiff {
    pub a: Method,
    pub b: Method,
    pub sup_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub freq: Frequency,
    pub eps: Complex64,
    pub methods: Vec<MethodResult>,
    pub pairs: Vec<PairDiff>,
}

impl CrosscheckReport {
    pub fn diff(&self, a: Method, b: Method) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
            .map(|p| p.sup_diff)
    }
}

fn run_method(
    m: Method,
    f: &FourierSeries,
    freq: &Frequency,
    eps: Complex64,
    cfg: &CrosscheckConfig,
) -> (MethodOutcome, Option<FourierSeries>) {
    let failed = |e: Error| MethodOutcome::Failed {
        kind: e.kind().into(),
        message: e.to_string(),
    };
    match m {
        Method::Newton => match kam::solve_curve(f, freq, eps, &cfg.newton) {
            Ok(curve) => {
                let diag = kam::dynamical_residual(&curve, cfg.grid_n).unwrap_or(f64::NAN);
                (
                    MethodOutcome::Ok {
                        iterations: curve.report.iterations,
                        diagnostic: diag,
                    },
                    Some(curve.u),
                )
            }
            Err(e) => (failed(e), None),
        },
        Method::Picard => {
            if circle_distance(freq) < cfg.picard.margin {
                return (
                    MethodOutcome::Skipped {
                        reason: format!(
                            "fixed-point iteration needs | |q| - 1 | ≥ {}",
                            cfg.picard.margin
                        ),
                    },
                    None,
                );
            }
            match picard_solve(f, freq, eps, &cfg.picard) {
                Ok((u, rep)) => (
                    MethodOutcome::Ok {
                        iterations: rep.iterations,
                        diagnostic: rep.beta.norm(),
                    },
                    Some(u),
                ),
                Err(e) => (failed(e), None),
            }
        }
        Method::Taylor0 => {
            let q = match (freq.chart(), freq.q()) {
                (crate::frequency::Chart::Inner, Some(q)) if q.norm() < 1.0 => q,
                _ => {
                    return (
                        MethodOutcome::Skipped {
                            reason: "Taylor expansion at q = 0 needs |q| < 1".into(),
                        },
                        None,
                    )
                }
            };
            let run = taylor0_recursion(f, eps, cfg.taylor_orders).and_then(|d| taylor0_eval(&d, q));
            match run {
                Ok((u, rep)) => (
                    MethodOutcome::Ok {
                        iterations: cfg.taylor_orders,
                        diagnostic: rep.last_term,
                    },
                    Some(u),
                ),
                Err(e) => (failed(e), None),
            }
        }
    }
}

/// Runs the requested methods at the same `(q, ε)` and reports pairwise sup-norm
/// differences of the mean-free parts of their solutions.
pub fn crosscheck(
    f: &FourierSeries,
    freq: &Frequency,
    eps: Complex64,
    methods: &[Method],
    config: &CrosscheckConfig,
) -> CrosscheckReport {
    use rayon::prelude::*;
    let mut methods: Vec<Method> = methods.to_vec();
    methods.sort();
    methods.dedup();
    let runs: Vec<(Method, MethodOutcome, Option<FourierSeries>)> = methods
        .par_iter()
        .map(|&m| {
            let (o, u) = run_method(m, f, freq, eps, config);
            (m, o, u)
        })
        .collect();
    let mut pairs = Vec::new();
    for (i, (a, _, ua)) in runs.iter().enumerate() {
        for (b, _, ub) in &runs[i + 1..] {
            if let (Some(ua), Some(ub)) = (ua, ub) {
                let mut d = ua - ub;
                d.set_coeff(0, ZERO);
                pairs.push(PairDiff {
                    a: *a,
                    b: *b,
                    sup_diff: d.sup_norm(),
                });
            }
        }
    }
    CrosscheckReport {
        freq: *freq,
        eps,
        methods: runs
            .into_iter()
            .map(|(method, outcome, _)| MethodResult { method, outcome })
            .collect(),
        pairs,
    }
}

/// Solves at `q` and at `1/q̄` and returns `max_k |conj(û_k(q)) - û_{-k}(1/q̄)|`.
pub fn conjugate_reflection_check(
    f: &FourierSeries,
    freq: &Frequency,
    eps: f64,
    config: &SolverConfig,
) -> Result<f64> {
    let sym = (&f.conj_reflect() - f).max_coeff();
    if sym > 1e-15 * (1.0 + f.max_coeff()) {
        return Err(Error::Precondition(format!(
            "f is not real-symmetric (defect {sym:e})"
        )));
    }
    let eps = Complex64::new(eps, 0.0);
    if eps == ZERO {
        return Ok(0.0);
    }
    let a = kam::solve_curve(f, freq, eps, config)?;
    let b = kam::solve_curve(f, &freq.reflected(), eps, config)?;
    let n = a.u.cutoff().max(b.u.cutoff()) as i64;
    let mut worst: f64 = 0.0;
    for k in -n..=n {
        worst = worst.max((a.u.coeff(k).conj() - b.u.coeff(-k)).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cosf() -> FourierSeries {
        FourierSeries::cosine(1, 1)
    }

    fn small_cfg() -> PicardConfig {
        PicardConfig {
            cutoff: 64,
            ..PicardConfig::default()
        }
    }

    #[test]
    fn picard_trivial_and_precondition() {
        let f = Frequency::from_q(c(0.3, 0.0));
        let (u, rep) = picard_solve(&cosf(), &f, ZERO, &small_cfg()).unwrap();
        assert!(u.is_zero());
        assert_eq!(rep.iterations, 1);
        let g = Frequency::from_real(0.618);
        assert!(matches!(picard_solve(&cosf(), &g, c(0.05, 0.0), &small_cfg()), Err(Error::Precondition(_))));
        let (u, _) = picard_solve(&cosf(), &Frequency::zero(), c(0.05, 0.0), &small_cfg()).unwrap();
        assert!(u.is_zero());
    }

    #[test]
    fn picard_at_q_03() {
        let f = Frequency::from_q(c(0.3, 0.0));
        assert!((f.omega().im - 0.19162).abs() < 1e-4);
        let (u, rep) = picard_solve(&cosf(), &f, c(0.05, 0.0), &small_cfg()).unwrap();
        assert!(rep.beta.norm() < 1e-12);
        assert_eq!(u.mean(), ZERO);
    }

    #[test]
    fn picard_first_order_scaling() {
        // u - εE_q f = O(ε²): halving ε divides the defect by about four.
        let f = Frequency::from_q(c(0.3, 0.0));
        let defect = |eps: f64| {
            let (u, _) = picard_solve(&cosf(), &f, c(eps, 0.0), &small_cfg()).unwrap();
            let lin = crate::operators::apply(MultiplierKind::EQ, &cosf(), &f).unwrap().scale(c(eps, 0.0));
            (&u - &lin).sup_norm()
        };
        let ratio = defect(0.01) / defect(0.005);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    #[test]
    fn taylor_examples() {
        let eps = c(0.05, 0.0);
        let d = taylor0_recursion(&cosf(), eps, 10).unwrap();
        let u1 = d.order(1);
        assert_eq!(u1.coeff(1), c(0.025, 0.0));
        assert_eq!(u1.coeff(-1), c(0.025, 0.0));

        let f = &cosf() + &FourierSeries::cosine(3, 3).scale(c(0.3, 0.0));
        let d = taylor0_recursion(&f, eps, 12).unwrap();
        assert!((d.order(3).coeff(3) - 0.15 * eps).norm() < 1e-14);
        for n in 1..=12 {
            let un = d.order(n);
            assert!(un.modes().all(|(k, c)| k.unsigned_abs() as usize <= n || c == ZERO));
        }
        assert!(taylor0_recursion(&f, eps, 61).is_err());
    }

    #[test]
    fn taylor_eval_examples() {
        let d = taylor0_recursion(&cosf(), c(0.05, 0.0), 40).unwrap();
        let (s, _) = taylor0_eval(&d, ZERO).unwrap();
        assert!(s.is_zero());
        let q = c(0.3, 0.0);
        let (s, rep) = taylor0_eval(&d, q).unwrap();
        assert!(rep.decaying);
        assert!(rep.last_term < 1e-15);
        let (p, _) = picard_solve(&cosf(), &Frequency::from_q(q), c(0.05, 0.0), &small_cfg()).unwrap();
        assert!((&s - &p).sup_norm() < 1e-8);
        assert!(taylor0_eval(&d, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn inverse_scattering_recovers_f() {
        let eps = c(0.05, 0.0);
        let d = taylor0_recursion(&cosf(), eps, 4).unwrap();
        assert_eq!(inverse_scattering(&d).coeff(1), c(0.025, 0.0));

        let f = FourierSeries::from_modes(
            &[(1, c(0.5, 0.1)), (-1, c(0.5, -0.1)), (2, c(0.0, 0.2)), (-2, c(0.0, -0.2)), (5, c(0.05, 0.0)), (-5, c(0.05, 0.0))],
            5,
        );
        let d = taylor0_recursion(&f, eps, 8).unwrap();
        let rec = inverse_scattering(&d);
        for k in -5..=5i64 {
            assert!((rec.coeff(k) - eps * f.coeff(k)).norm() < 1e-12);
        }
        let z = taylor0_recursion(&FourierSeries::zeros(2), eps, 5).unwrap();
        assert!(inverse_scattering(&z).is_zero());
    }

    #[test]
    fn crosscheck_three_way() {
        let freq = Frequency::from_q(c(0.3, 0.0));
        let cfg = CrosscheckConfig {
            newton: SolverConfig::with_cutoff(64),
            picard: small_cfg(),
            ..CrosscheckConfig::default()
        };
        let r = crosscheck(&cosf(), &freq, c(0.05, 0.0), &Method::ALL, &cfg);
        assert!(r.diff(Method::Picard, Method::Taylor0).unwrap() < 1e-8);
        assert!(r.diff(Method::Picard, Method::Newton).unwrap() < 1e-10);

        let g = Frequency::from_real((5f64.sqrt() - 1.0) / 2.0);
        let r = crosscheck(&cosf(), &g, c(0.05, 0.0), &Method::ALL, &cfg);
        assert!(r.pairs.is_empty());
        assert!(r.methods.iter().any(|m| m.method == Method::Picard && matches!(m.outcome, MethodOutcome::Skipped { .. })));
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<CrosscheckReport>(&json).unwrap(), r);
    }

    #[test]
    fn reflection_examples() {
        let cfg = SolverConfig::with_cutoff(64);
        let w = Frequency::from_omega(c(0.5, 0.5));
        assert!(conjugate_reflection_check(&cosf(), &w, 0.05, &cfg).unwrap() < 1e-10);
        assert_eq!(conjugate_reflection_check(&cosf(), &w, 0.0, &cfg).unwrap(), 0.0);
        let bad = FourierSeries::basis(1, 1);
        assert!(conjugate_reflection_check(&bad, &w, 0.05, &cfg).is_err());
    }

    #[test]
    fn taylor_json_round_trip() {
        let d = taylor0_recursion(&cosf(), c(0.05, 0.0), 6).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<QTaylorData>(&json).unwrap(), d);
    }
}
