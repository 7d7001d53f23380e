//! Levi–Moser modified Newton scheme for invariant curves of the standard family
//! `T_ε(x, y) = (x + y + εf(x), y + εf(x))`.
//!
//! A curve `γ(θ) = (θ + u(θ), ω + v(θ))` with `v = u - u(· - ω)` is invariant
//! exactly when `Δu = εf∘(id + u)`.
//!
//! Off the unit circle the shifted series `u(· ± ω)` carry multipliers `q^{±k}`
//! that are exponentially large on one side. Each Newton correction is therefore
//! computed three times (at `θ`, `θ + ω` and `θ - ω`, all with bounded
//! operators) and every mode is taken from the copy whose multiplier back to `θ`
//! is at most one in modulus. This keeps each coefficient of `u` accurate
//! relative to its own size, so the shifts never amplify rounding noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, DEFAULT_CUTOFF, DEFAULT_EXP_CAP, DEFAULT_INVERT_FLOOR};
use crate::frequency::{in_km, DiophantineClass, Frequency};
use crate::operators::{MultiplierCache, MultiplierKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Residuals below this are treated as rounding floor when fitting the convergence order.
pub const RESIDUAL_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Target for the sup-norm of the error functional.
    pub tol: f64,
    pub max_iters: usize,
    /// Fourier cutoff `N`.
    pub cutoff: usize,
    /// Outer strip width, used for diagnostics only.
    pub r0: f64,
    /// Final strip width, used for diagnostics only.
    pub r: f64,
    /// Largest admissible `|log|` of any exponential.
    pub exp_cap: f64,
    /// Frequencies with `max |λ_k| > max_small_divisor` over the cutoff are rejected.
    pub max_small_divisor: f64,
    /// Abort when the residual grows by more than this factor in one step.
    pub divergence_factor: f64,
    pub invert_floor: f64,
    /// Number of intermediate `ε` values to warm-start through (0 = start from `u = 0`).
    pub warm_start_steps: usize,
    /// Class used for the admissibility warning.
    pub class: Option<DiophantineClass>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 30,
            cutoff: DEFAULT_CUTOFF,
            r0: 0.1,
            r: 0.05,
            exp_cap: DEFAULT_EXP_CAP,
            max_small_divisor: 1e10,
            divergence_factor: 10.0,
            invert_floor: DEFAULT_INVERT_FLOOR,
            warm_start_steps: 0,
            class: None,
        }
    }
}

impl SolverConfig {
    pub fn with_cutoff(cutoff: usize) -> Self {
        Self {
            cutoff,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if !(0.0 < self.r && self.r < self.r0) {
            return Err(Error::InvalidParameter(format!(
                "strip widths must satisfy 0 < R < R0, got R = {}, R0 = {}",
                self.r, self.r0
            )));
        }
        if self.cutoff == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter("cutoff and max_iters must be positive".into()));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidParameter("divergence_factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub residual_before: f64,
    /// Residual of the returned iterate.
    pub residual_after: f64,
    /// Sup-norm of the correction `h`.
    pub step_norm: f64,
    /// Largest coefficient discarded by truncations and grid transforms.
    pub aliasing_tail: f64,
    /// Grid minimum of `|A A⁺|`.
    pub min_aa_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub residual_history: Vec<f64>,
    /// Least-squares slope of `log r_{n+1}` against `log r_n` over pre-floor steps.
    pub quadratic_fit_slope: Option<f64>,
    /// Mean defect `ε⟨f∘(id+u)⟩`.
    pub beta: Complex64,
    pub aliasing_tail: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Cutoff actually used (clamped so that `|q|^{±N}` stays within the exponent cap).
    pub effective_cutoff: usize,
    pub max_lambda: f64,
    /// `Σ|û_k| e^{2πR_n|k|}` at the scheduled widths `R_n = R + 2^{-n-1}(R0 - R)`.
    pub strip_norms: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    fn trivial(n: usize) -> Self {
        Self {
            residual_history: vec![0.0],
            quadratic_fit_slope: None,
            beta: ZERO,
            aliasing_tail: 0.0,
            converged: true,
            iterations: 0,
            effective_cutoff: n,
            max_lambda: 0.0,
            strip_norms: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCurve {
    pub freq: Frequency,
    pub eps: Complex64,
    pub f: FourierSeries,
    pub u: FourierSeries,
    pub v: FourierSeries,
    pub report: SolveReport,
    pub dynamical_residual: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub x: Complex64,
    pub y: Complex64,
}

impl InvariantCurve {
    /// `γ(θ_j)` on `n` equispaced real angles.
    pub fn points(&self, n: usize) -> Result<Vec<CurvePoint>> {
        let omega = self.freq.omega();
        let omega = if self.freq.is_pole() { ZERO } else { omega };
        (0..n)
            .map(|j| {
                let t = j as f64 / n as f64;
                let th = Complex64::new(t, 0.0);
                Ok(CurvePoint {
                    theta: t,
                    x: th + self.u.eval(th)?,
                    y: omega + self.v.eval(th)?,
                })
            })
            .collect()
    }
}

/// Largest cutoff for which `|q|^{±N}` stays well inside the exponent cap.
pub fn effective_cutoff(freq: &Frequency, cutoff: usize, cap: f64) -> usize {
    let s = freq.log_scale().abs();
    if s == 0.0 || !s.is_finite() {
        return cutoff;
    }
    let limit = (0.9 * cap / s).floor().max(1.0);
    if limit >= cutoff as f64 {
        cutoff
    } else {
        limit as usize
    }
}

/// Least-squares slope of `log r_{n+1}` against `log r_n`, over consecutive pairs
/// with both residuals above `floor`. Needs at least two pairs.
pub fn quadratic_fit_slope(history: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = history
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn one_plus(d: &FourierSeries) -> FourierSeries {
    let mut a = d.clone();
    a.set_coeff(0, a.coeff(0) + ONE);
    a
}

/// Product truncated back to `n`, folding the discarded tail into `tail`.
fn mul(a: &FourierSeries, b: &FourierSeries, n: usize, tail: &mut f64) -> FourierSeries {
    let (p, t) = a.product_truncated(b, n);
    *tail = tail.max(t);
    p
}

/// Working state for one frequency, cutoff and `ε`.
struct Engine<'a> {
    cache: MultiplierCache,
    f: &'a FourierSeries,
    eps: Complex64,
    n: usize,
    cap: f64,
    invert_floor: f64,
    circle: bool,
}

struct Evaluated {
    e: FourierSeries,
    residual: f64,
    tail: f64,
}

impl<'a> Engine<'a> {
    fn new(f: &'a FourierSeries, freq: &Frequency, eps: Complex64, n: usize, cap: f64, floor: f64) -> Self {
        Self {
            cache: MultiplierCache::with_cap(*freq, n, cap),
            f,
            eps,
            n,
            cap,
            invert_floor: floor,
            circle: freq.on_unit_circle(),
        }
    }

    fn apply(&self, kind: MultiplierKind, s: &FourierSeries) -> Result<FourierSeries> {
        self.cache.apply(kind, s)
    }

    fn error(&self, u: &FourierSeries) -> Result<Evaluated> {
        let (comp, rep) = self.f.compose_id_plus_capped(u, self.cap)?;
        let (comp, t) = comp.truncated(self.n);
        let du = self.apply(MultiplierKind::Delta, u)?;
        let e = (comp.scale(self.eps) - du).resized(self.n);
        let residual = e.sup_norm();
        Ok(Evaluated {
            e,
            residual,
            tail: rep.aliasing_tail.max(t),
        })
    }

    fn invert(&self, s: &FourierSeries, tail: &mut f64) -> Result<FourierSeries> {
        let (inv, rep) = s.invert_pointwise_with(self.invert_floor)?;
        *tail = tail.max(rep.aliasing_tail);
        Ok(inv)
    }

    /// The correction `h = A w` for the current iterate.
    fn correction(&self, u: &FourierSeries, e: &FourierSeries, tail: &mut f64) -> Result<(FourierSeries, f64)> {
        use MultiplierKind::*;
        let n = self.n;
        let a = one_plus(&u.derivative(1));
        let up = self.apply(ShiftPlus, u)?;
        let ap = one_plus(&up.derivative(1));

        let ae = mul(&a, e, n, tail);
        let psi = self.apply(GammaMinus, &ae)?;
        let aap = mul(&a, &ap, n, tail);
        let min_aa = aap.to_grid(crate::fourier::grid_size_for(n)).iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let alpha = self.invert(&aap, tail)?;
        let mean_alpha = alpha.mean();
        if mean_alpha.norm() < 1e-12 {
            return Err(Error::NearSingular {
                min_modulus: mean_alpha.norm(),
                floor: 1e-12,
            });
        }
        let mu0 = -mul(&alpha, &psi, n, tail).mean() / mean_alpha;
        let chi = mul(&alpha, &psi, n, tail) + alpha.scale(mu0);
        let w = self.apply(Gamma, &chi)?;
        let h = mul(&a, &w, n, tail);
        if self.circle {
            return Ok((h, min_aa));
        }

        let um = self.apply(ShiftMinus, u)?;
        let am = one_plus(&um.derivative(1));
        let psim = self.apply(Gamma, &ae)?;
        let alpham = self.invert(&mul(&am, &a, n, tail), tail)?;
        let chim = mul(&alpham, &psim, n, tail) + alpham.scale(mu0);
        let wp = self.apply(GammaMinus, &chi)?;
        let wm = self.apply(Gamma, &chim)?;
        let hp = mul(&ap, &wp, n, tail);
        let hm = mul(&am, &wm, n, tail);

        let freq = *self.cache.freq();
        let mut out = h;
        for k in -(n as i64)..=n as i64 {
            let lm = freq.log_modulus_pow(k);
            if lm < 0.0 {
                out.set_coeff(k, freq.q_pow(k, self.cap)? * hm.coeff(k));
            } else if lm > 0.0 {
                out.set_coeff(k, freq.q_pow(-k, self.cap)? * hp.coeff(k));
            }
        }
        Ok((out, min_aa))
    }

    fn check_derivative(&self, u: &FourierSeries) -> Result<()> {
        let du = u.derivative(1);
        let sup = du.sup_norm();
        if !(sup < 1.0) {
            return Err(Error::Precondition(format!(
                "sup |∂u| = {sup:.3e} must be below 1 for A = 1 + ∂u to be invertible"
            )));
        }
        Ok(())
    }
}

/// `𝓔(u) = -Δu + εf∘(id + u)` at the joint cutoff of `u` and `f`.
pub fn error_functional(u: &FourierSeries, f: &FourierSeries, freq: &Frequency, eps: Complex64) -> Result<FourierSeries> {
    let n = u.cutoff().max(f.cutoff());
    let u = u.resized(n);
    let eng = Engine::new(f, freq, eps, n, DEFAULT_EXP_CAP, DEFAULT_INVERT_FLOOR);
    Ok(eng.error(&u)?.e)
}

/// Solves `AΔ(Aw) - (Aw)ΔA = AE - ⟨AE⟩` for `w` with `⟨w⟩ = 0`, at the joint cutoff.
pub fn linearized_solve(a: &FourierSeries, e: &FourierSeries, freq: &Frequency) -> Result<FourierSeries> {
    use MultiplierKind::*;
    let n = a.cutoff().max(e.cutoff());
    let cache = MultiplierCache::new(*freq, n);
    let mut tail = 0.0;
    let ap = cache.apply(ShiftPlus, &a.resized(n))?;
    let ae = mul(a, e, n, &mut tail);
    let psi = cache.apply(GammaMinus, &ae)?;
    let alpha = mul(a, &ap, n, &mut tail).invert_pointwise()?;
    let mean_alpha = alpha.mean();
    if mean_alpha.norm() < 1e-12 {
        return Err(Error::NearSingular {
            min_modulus: mean_alpha.norm(),
            floor: 1e-12,
        });
    }
    let ap_psi = mul(&alpha, &psi, n, &mut tail);
    let mu0 = -ap_psi.mean() / mean_alpha;
    let chi = ap_psi + alpha.scale(mu0);
    cache.apply(Gamma, &chi)
}

/// Sup-norm of `AΔ(Aw) - (Aw)ΔA - (AE - ⟨AE⟩)`, with untruncated products.
pub fn fsolves_defect(a: &FourierSeries, w: &FourierSeries, e: &FourierSeries, freq: &Frequency) -> Result<f64> {
    let h = a.product_exact(w);
    let mut ae = a.product_exact(e);
    ae.set_coeff(0, ZERO);
    let d = a.product_exact(&crate::operators::apply(MultiplierKind::Delta, &h, freq)?)
        - h.product_exact(&crate::operators::apply(MultiplierKind::Delta, a, freq)?);
    Ok((d - ae).sup_norm())
}

/// Sup-norm of `AΔh - hΔA - ∇⁻(AA⁺∇(h/A))`, with products truncated at `work_cutoff`.
pub fn factorization_defect(
    a: &FourierSeries,
    h: &FourierSeries,
    freq: &Frequency,
    work_cutoff: usize,
) -> Result<f64> {
    use MultiplierKind::*;
    let n = work_cutoff;
    let cache = MultiplierCache::new(*freq, 2 * n);
    let mut tail = 0.0;
    let a = a.resized(n);
    let h = h.resized(n);
    let lhs = mul(&a, &cache.apply(Delta, &h)?, n, &mut tail) - mul(&h, &cache.apply(Delta, &a)?, n, &mut tail);
    let h_over_a = mul(&h, &a.invert_pointwise()?, n, &mut tail);
    let ap = cache.apply(ShiftPlus, &a)?;
    let inner = mul(&mul(&a, &ap, n, &mut tail), &cache.apply(Nabla, &h_over_a)?, n, &mut tail);
    let rhs = cache.apply(NablaMinus, &inner)?;
    Ok((lhs - rhs).sup_norm())
}

/// `|⟨(1 + ∂u) 𝓔(u)⟩|`, which vanishes for every `u` when `⟨f⟩ = 0`.
pub fn mean_identity_residual(u: &FourierSeries, f: &FourierSeries, freq: &Frequency, eps: Complex64) -> Result<f64> {
    let e = error_functional(u, f, freq, eps)?;
    let a = one_plus(&u.derivative(1));
    Ok(a.product(&e).mean().norm())
}

/// One Levi–Moser step from `u`, at the cutoff of `u` (and `f`).
pub fn newton_step(
    u: &FourierSeries,
    f: &FourierSeries,
    freq: &Frequency,
    eps: Complex64,
) -> Result<(FourierSeries, StepReport)> {
    let n = u.cutoff().max(f.cutoff());
    let eng = Engine::new(f, freq, eps, n, DEFAULT_EXP_CAP, DEFAULT_INVERT_FLOOR);
    let u = u.resized(n);
    let before = eng.error(&u)?;
    let (next, mut rep) = step(&eng, &u, &before)?;
    let after = eng.error(&next)?;
    rep.residual_after = after.residual;
    rep.aliasing_tail = rep.aliasing_tail.max(after.tail);
    if after.residual > 10.0 * before.residual && before.residual > 0.0 {
        return Err(Error::Divergence {
            method: "newton",
            from: before.residual,
            to: after.residual,
            max_lambda: freq.max_abs_lambda(n).map(|x| x.0).unwrap_or(f64::INFINITY),
            history: vec![before.residual, after.residual],
        });
    }
    Ok((next, rep))
}

fn step(eng: &Engine<'_>, u: &FourierSeries, ev: &Evaluated) -> Result<(FourierSeries, StepReport)> {
    eng.check_derivative(u)?;
    let mut tail = ev.tail;
    let (h, min_aa) = eng.correction(u, &ev.e, &mut tail)?;
    let next = u + &h;
    Ok((
        next,
        StepReport {
            residual_before: ev.residual,
            residual_after: f64::NAN,
            step_norm: h.sup_norm(),
            aliasing_tail: tail,
            min_aa_plus: min_aa,
        },
    ))
}

/// Zero-mean normalization `ũ(θ) = u(θ - û₀) - û₀`.
pub fn normalize(u: &FourierSeries, cap: f64) -> Result<FourierSeries> {
    let m = u.mean();
    if m == ZERO {
        return Ok(u.clone());
    }
    let shift = FourierSeries::constant(-m, 0);
    let (mut s, _) = u.compose_id_plus_capped(&shift, cap)?;
    s.set_coeff(0, s.coeff(0) - m);
    // The composed mean is û₀ up to rounding; pin it.
    s.set_coeff(0, ZERO);
    Ok(s)
}

/// Newton solve for the invariant curve with rotation number `freq`.
pub fn solve_curve(f: &FourierSeries, freq: &Frequency, eps: Complex64, config: &SolverConfig) -> Result<InvariantCurve> {
    config.validate()?;
    let n = effective_cutoff(freq, config.cutoff, config.exp_cap);
    let mut warnings = Vec::new();
    if n < config.cutoff {
        warnings.push(format!(
            "cutoff clamped from {} to {} to keep |q|^(±N) within the exponent cap",
            config.cutoff, n
        ));
    }
    if let Some(cls) = &config.class {
        if !in_km(freq, cls) {
            warnings.push(format!(
                "frequency ω = {} lies outside K_M for M = {}, τ = {}",
                freq.omega(),
                cls.m(),
                cls.tau()
            ));
        }
    }
    let (f_n, f_tail) = f.truncated(n);
    if f_tail > 0.0 {
        warnings.push(format!("f truncated to cutoff {n}, dropping coefficients up to {f_tail:e}"));
    }
    let curve = |u: FourierSeries, report: SolveReport| -> Result<InvariantCurve> {
        let v = MultiplierCache::with_cap(*freq, n, config.exp_cap).apply(MultiplierKind::NablaMinus, &u)?;
        Ok(InvariantCurve {
            freq: *freq,
            eps,
            f: f_n.clone(),
            u,
            v,
            report,
            dynamical_residual: None,
        })
    };
    if eps == ZERO || f_n.is_zero() {
        let mut r = SolveReport::trivial(n);
        r.warnings = warnings;
        return curve(FourierSeries::zeros(n), r);
    }
    if freq.is_pole() {
        return Err(Error::Precondition(
            "Newton needs a finite nonzero q; use the fixed-point solver at q = 0 or ∞".into(),
        ));
    }
    let (max_lambda, worst) = freq.max_abs_lambda(n).map_err(|e| match e {
        Error::Resonance { k, .. } => Error::SmallDivisor {
            k,
            max_lambda: f64::INFINITY,
            limit: config.max_small_divisor,
        },
        e => e,
    })?;
    if max_lambda > config.max_small_divisor {
        return Err(Error::SmallDivisor {
            k: worst,
            max_lambda,
            limit: config.max_small_divisor,
        });
    }

    let mut u = FourierSeries::zeros(n);
    for j in 1..=config.warm_start_steps {
        let e_j = eps * (j as f64 / (config.warm_start_steps + 1) as f64);
        u = iterate(&f_n, freq, e_j, config, n, u, &mut Vec::new())?.0;
    }
    let (u, mut report) = iterate(&f_n, freq, eps, config, n, u, &mut warnings)?;
    report.max_lambda = max_lambda;
    report.warnings = warnings;
    let u = normalize(&u, config.exp_cap)?;
    let (comp, _) = f_n.compose_id_plus_capped(&u, config.exp_cap)?;
    report.beta = eps * comp.mean();
    curve(u, report)
}

fn iterate(
    f: &FourierSeries,
    freq: &Frequency,
    eps: Complex64,
    config: &SolverConfig,
    n: usize,
    mut u: FourierSeries,
    warnings: &mut Vec<String>,
) -> Result<(FourierSeries, SolveReport)> {
    let eng = Engine::new(f, freq, eps, n, config.exp_cap, config.invert_floor);
    let mut history = Vec::new();
    let mut strip_norms = Vec::new();
    let mut tail: f64 = 0.0;
    let mut ev = eng.error(&u)?;
    let mut iterations = 0;
    loop {
        history.push(ev.residual);
        tail = tail.max(ev.tail);
        let rn = config.r + (config.r0 - config.r) * 0.5f64.powi(iterations as i32 + 1);
        strip_norms.push(u.strip_norm_bound_capped(rn, config.exp_cap).ok());
        if ev.residual <= config.tol {
            break;
        }
        if iterations >= config.max_iters {
            return Err(Error::NoConvergence {
                method: "newton",
                iterations,
                last: ev.residual,
                history,
            });
        }
        let (next, rep) = step(&eng, &u, &ev)?;
        tail = tail.max(rep.aliasing_tail);
        let next_ev = eng.error(&next)?;
        iterations += 1;
        if !next_ev.residual.is_finite() || next_ev.residual > config.divergence_factor * ev.residual {
            history.push(next_ev.residual);
            return Err(Error::Divergence {
                method: "newton",
                from: ev.residual,
                to: next_ev.residual,
                max_lambda: freq.max_abs_lambda(n).map(|x| x.0).unwrap_or(f64::INFINITY),
                history,
            });
        }
        u = next;
        ev = next_ev;
    }
    if tail > 1e-10 {
        warnings.push(format!("aliasing tail {tail:e} exceeds 1e-10; consider a larger cutoff"));
    }
    Ok((
        u,
        SolveReport {
            quadratic_fit_slope: quadratic_fit_slope(&history, RESIDUAL_FLOOR),
            residual_history: history,
            beta: ZERO,
            aliasing_tail: tail,
            converged: true,
            iterations,
            effective_cutoff: n,
            max_lambda: 0.0,
            strip_norms,
            warnings: Vec::new(),
        },
    ))
}

/// `max_j |γ(θ_j + ω) - T_ε(γ(θ_j))|` over `grid_n` equispaced real angles, with the
/// angle component compared modulo 1.
pub fn dynamical_residual(curve: &InvariantCurve, grid_n: usize) -> Result<f64> {
    dynamical_residual_capped(curve, grid_n, DEFAULT_EXP_CAP)
}

pub fn dynamical_residual_capped(curve: &InvariantCurve, grid_n: usize, cap: f64) -> Result<f64> {
    if curve.freq.is_pole() {
        return Err(Error::Precondition("no curve dynamics at q = 0 or ∞".into()));
    }
    let cache = MultiplierCache::with_cap(curve.freq, curve.u.cutoff(), cap);
    // u(θ + ω) and v(θ + ω), evaluated at real θ through their multiplier forms.
    let up = cache.apply(MultiplierKind::ShiftPlus, &curve.u)?;
    let vp = &up - &curve.u;
    let grid = grid_n.max(2 * curve.u.cutoff() + 1);
    let sample = |s: &FourierSeries| -> Vec<Complex64> {
        let all = s.resized(curve.u.cutoff()).to_grid(grid);
        if grid == grid_n {
            all
        } else {
            (0..grid_n)
                .map(|j| s.eval(Complex64::new(j as f64 / grid_n as f64, 0.0)).unwrap_or(all[0]))
                .collect()
        }
    };
    let (u, v, up, vp) = (sample(&curve.u), sample(&curve.v), sample(&up), sample(&vp));
    let mut worst: f64 = 0.0;
    for j in 0..grid_n {
        let theta = j as f64 / grid_n as f64;
        let x = Complex64::new(theta, 0.0) + u[j];
        let kick = curve.eps * curve.f.eval_capped(x, cap)?;
        // x₁ - (θ + ω + u⁺) and y₁ - (ω + v⁺), with θ + ω cancelled symbolically.
        let mut dx = u[j] + v[j] + kick - up[j];
        dx.re -= dx.re.round();
        let dy = v[j] + kick - vp[j];
        worst = worst.max(dx.norm()).max(dy.norm());
    }
    Ok(worst)
}

/// Sixteen-point Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_16() -> [(f64, f64); 16] {
    let n = 16;
    let mut out = [(0.0, 0.0); 16];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = ((1.0 - x) / 2.0, w / 2.0);
    }
    out
}

/// Grid sup of `𝓔(u + h) - (h/A)∂𝓔(u) - Q(u, h)`, where
/// `Q(u, h) = (∫₀¹ εf''∘(id + u + th)(1 - t) dt) h²`.
pub fn step_residual_defect(
    u: &FourierSeries,
    h: &FourierSeries,
    f: &FourierSeries,
    freq: &Frequency,
    eps: Complex64,
) -> Result<f64> {
    let n = u.cutoff().max(h.cutoff()).max(f.cutoff());
    let (u, h) = (u.resized(n), h.resized(n));
    let e0 = error_functional(&u, f, freq, eps)?;
    let e1 = error_functional(&(&u + &h), f, freq, eps)?;
    let de0 = e0.derivative(1);
    let a = one_plus(&u.derivative(1));
    let f2 = f.derivative(2);
    let grid = crate::fourier::grid_size_for(n);
    let g = |s: &FourierSeries| s.resized(n).to_grid(grid);
    let (ug, hg, ag, e1g, de0g) = (g(&u), g(&h), g(&a), g(&e1), g(&de0));
    let nodes = gauss_legendre_16();
    let mut worst: f64 = 0.0;
    for j in 0..grid {
        let x = Complex64::new(j as f64 / grid as f64, 0.0) + ug[j];
        let mut integral = ZERO;
        for &(t, w) in &nodes {
            integral += f2.eval(x + hg[j] * t)? * (w * (1.0 - t));
        }
        let q = eps * integral * hg[j] * hg[j];
        let d = e1g[j] - hg[j] / ag[j] * de0g[j] - q;
        worst = worst.max(d.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::apply;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
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
            s.set_coeff(k, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay);
            s.set_coeff(-k, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay);
        }
        s
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            r: 0.2,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn error_functional_examples() {
        let g = golden();
        let f = cosf();
        let e = error_functional(&FourierSeries::zeros(4), &f, &g, c(0.05, 0.0)).unwrap();
        assert!((&e - &f.scale(c(0.05, 0.0))).max_coeff() < 1e-17);
        let e = error_functional(&FourierSeries::zeros(4), &f, &g, ZERO).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn linearized_solve_examples() {
        let g = golden();
        let f = FourierSeries::cosine(1, 8) + FourierSeries::sine(3, 8).scale(c(0.2, 0.0));
        let one = FourierSeries::constant(ONE, 8);
        let w = linearized_solve(&one, &f, &g).unwrap();
        let eq = apply(MultiplierKind::EQ, &f, &g).unwrap();
        assert!((&w - &eq).max_coeff() < 1e-14);
        let k = FourierSeries::constant(c(0.7, 0.0), 8);
        assert!(linearized_solve(&one, &k, &g).unwrap().max_coeff() < 1e-16);
    }

    #[test]
    fn linearized_solve_defect_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = golden();
        for _ in 0..5 {
            let a = one_plus(&random_zero_mean(&mut rng, 4, 0.02)).resized(64);
            let e = random_zero_mean(&mut rng, 8, 0.05).resized(64);
            let w = linearized_solve(&a, &e, &g).unwrap();
            assert!(w.mean().norm() < 1e-17);
            let d = fsolves_defect(&a, &w, &e, &g).unwrap();
            assert!(d < 1e-11, "defect {d}");
        }
    }

    #[test]
    fn first_step_is_first_order_correction() {
        let g = golden();
        let f = cosf().resized(16);
        let eps = c(0.05, 0.0);
        let (u1, rep) = newton_step(&FourierSeries::zeros(16), &f, &g, eps).unwrap();
        let expect = apply(MultiplierKind::EQ, &f, &g).unwrap().scale(eps);
        assert!((&u1 - &expect).max_coeff() < 1e-16);
        assert!(rep.residual_after < rep.residual_before);
    }

    #[test]
    fn mean_identity_examples() {
        let g = golden();
        let f = cosf();
        let eps = c(0.05, 0.0);
        assert!(mean_identity_residual(&FourierSeries::zeros(1), &f, &g, eps).unwrap() < 1e-17);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let u = random_zero_mean(&mut rng, 32, 0.01);
            assert!(mean_identity_residual(&u, &f, &g, eps).unwrap() < 1e-11);
        }
        let shifted = &f + &FourierSeries::constant(c(0.3, 0.0), 1);
        let r = mean_identity_residual(&FourierSeries::zeros(1), &shifted, &g, eps).unwrap();
        assert!((r - 0.015).abs() < 1e-15);
    }

    #[test]
    fn factorization_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..5 {
            let freq = Frequency::from_omega(c(rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.02)));
            let a = one_plus(&random_zero_mean(&mut rng, 3, 0.05));
            let h = random_zero_mean(&mut rng, 6, 0.1);
            let d = factorization_defect(&a, &h, &freq, 48).unwrap();
            assert!(d < 1e-12, "defect {d}");
        }
    }

    #[test]
    fn golden_benchmark_converges_quadratically() {
        let curve = solve_curve(&cosf(), &golden(), c(0.05, 0.0), &SolverConfig::default()).unwrap();
        let r = &curve.report;
        assert!(r.converged && r.iterations <= 8, "{:?}", r.residual_history);
        assert!(*r.residual_history.last().unwrap() < 1e-12);
        assert!(curve.u.mean().norm() <= 1e-14);
        // Superlinear; the constant grows as the error moves to higher modes.
        let slope = r.quadratic_fit_slope.unwrap();
        assert!(slope > 1.5, "slope {slope} {:?}", r.residual_history);
        for w in r.residual_history.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(r.beta.norm() < 1e-12);
        let d = dynamical_residual(&curve, 1024).unwrap();
        assert!(d < 1e-10, "dynamical residual {d}");
        // Real-analytic data at real ω give a real curve.
        let grid = curve.u.to_grid(1024);
        assert!(grid.iter().all(|z| z.im.abs() < 1e-12));
        let v = apply(MultiplierKind::NablaMinus, &curve.u, &curve.freq).unwrap();
        assert!((&v - &curve.v).max_coeff() < 1e-13);
    }

    #[test]
    fn converged_solution_is_fixed_point() {
        let cfg = SolverConfig::with_cutoff(64);
        let curve = solve_curve(&cosf(), &golden(), c(0.05, 0.0), &cfg).unwrap();
        let f = cosf().resized(64);
        let (next, _) = newton_step(&curve.u, &f, &golden(), c(0.05, 0.0)).unwrap();
        assert!((&next - &curve.u).sup_norm() < 1e-12);
    }

    #[test]
    fn step_residual_identity() {
        let g = golden();
        let f = cosf().resized(32);
        let eps = c(0.05, 0.0);
        let mut u = FourierSeries::zeros(32);
        for _ in 0..3 {
            let (next, _) = newton_step(&u, &f, &g, eps).unwrap();
            let h = &next - &u;
            let scale = f.sup_norm() * eps.norm();
            let d = step_residual_defect(&u, &h, &f, &g, eps).unwrap();
            assert!(d < 1e-10 * scale, "defect {d}");
            u = next;
        }
    }

    #[test]
    fn trivial_and_failing_solves() {
        let curve = solve_curve(&cosf(), &golden(), ZERO, &SolverConfig::default()).unwrap();
        assert!(curve.u.is_zero() && curve.v.is_zero());
        assert_eq!(dynamical_residual(&curve, 64).unwrap(), 0.0);

        let err = solve_curve(&cosf(), &Frequency::from_real(0.5), c(0.05, 0.0), &SolverConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "resonance");
    }

    #[test]
    fn detector_sensitivity() {
        let cfg = SolverConfig::with_cutoff(64);
        let mut curve = solve_curve(&cosf(), &golden(), c(0.05, 0.0), &cfg).unwrap();
        curve.u = &curve.u + &FourierSeries::basis(1, 64).scale(c(1e-3, 0.0));
        curve.v = apply(MultiplierKind::NablaMinus, &curve.u, &curve.freq).unwrap();
        assert!(dynamical_residual(&curve, 256).unwrap() > 1e-4);
    }

    #[test]
    fn complex_frequency_solve() {
        let freq = Frequency::from_omega(c(0.5, 0.5));
        let curve = solve_curve(&cosf(), &freq, c(0.05, 0.0), &SolverConfig::default()).unwrap();
        assert!(curve.report.converged);
        assert!(dynamical_residual(&curve, 512).unwrap() < 1e-10);
        assert!(curve.report.beta.norm() < 1e-11);
    }

    #[test]
    fn normalization_shifts_mean_away() {
        let u = FourierSeries::from_modes(&[(0, c(0.01, 0.0)), (1, c(0.02, 0.0)), (-1, c(0.02, 0.0))], 4);
        let n = normalize(&u, 700.0).unwrap();
        assert_eq!(n.mean(), ZERO);
        let t = c(0.3, 0.0);
        let expect = u.eval(t - 0.01).unwrap() - 0.01;
        assert!((n.eval(t).unwrap() - expect).norm() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre_16();
        let s: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-15);
        let i: f64 = nodes.iter().map(|(t, w)| w * t.powi(31)).sum();
        assert!((i - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn slope_fit() {
        let h = [0.05, 4.5e-3, 3.6e-5, 2.4e-9, 1e-16];
        let s = quadratic_fit_slope(&h, RESIDUAL_FLOOR).unwrap();
        assert!((s - 2.0).abs() < 0.05);
        assert!(quadratic_fit_slope(&[1.0, 1e-17], RESIDUAL_FLOOR).is_none());
    }

    #[test]
    fn curve_json_round_trip() {
        let cfg = SolverConfig::with_cutoff(16);
        let curve = solve_curve(&cosf(), &golden(), c(0.02, 0.0), &cfg).unwrap();
        let s = serde_json::to_string(&curve).unwrap();
        let back: InvariantCurve = serde_json::from_str(&s).unwrap();
        assert_eq!(back, curve);
    }
}
