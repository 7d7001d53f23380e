//! Formal solutions in ε at a rational frequency p/m and the order at which they break down.
//!
//! At ω★ = p/m the second difference Δ★ multiplies mode k by `D_{k mod m}`, which vanishes on
//! the multiples of m. The engine expands u = Σ εⁿ u_n with u_n = E g_n and stops at the first
//! order whose right-hand side has a component on those modes.

pub mod dd;

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::Neg;

use num_complex::{Complex, Complex64};
use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::continuation::{picard_solve, PicardConfig};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::frequency::Frequency;

pub use dd::DD;

pub const DEFAULT_THRESHOLD: f64 = 1e-10;

/// A rational frequency `p/m` in lowest terms, with the eigenvalues of Δ★ and of its partial inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RationalRepr", into = "RationalRepr")]
pub struct RationalFreq {
    p: i64,
    m: i64,
    d: Vec<f64>,
    lambda: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    p: i64,
    m: i64,
}

impl TryFrom<RationalRepr> for RationalFreq {
    type Error = Error;
    fn try_from(r: RationalRepr) -> Result<Self> {
        RationalFreq::new(r.p, r.m)
    }
}

impl From<RationalFreq> for RationalRepr {
    fn from(r: RationalFreq) -> Self {
        RationalRepr { p: r.p, m: r.m }
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl RationalFreq {
    pub fn new(p: i64, m: i64) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter(format!("m = {m} must be positive")));
        }
        if gcd(p, m) != 1 {
            return Err(Error::InvalidParameter(format!("{p}/{m} is not in lowest terms")));
        }
        let mut d = Vec::with_capacity(m as usize);
        let mut lambda = Vec::with_capacity(m as usize);
        for j in 0..m {
            let s = <f64 as Real>::sin_pi_rational(j * p, m);
            let s2 = 4.0 * s * s;
            d.push(-s2);
            lambda.push(if j == 0 { 0.0 } else { -1.0 / s2 });
        }
        d[0] = 0.0;
        Ok(Self { p, m, d, lambda })
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn omega(&self) -> f64 {
        self.p as f64 / self.m as f64
    }

    /// `D_j = −4 sin²(jπp/m)`.
    pub fn d(&self, j: usize) -> f64 {
        self.d[j]
    }

    /// `λ_j = −1/(4 sin²(jπp/m))`, with `λ_0 = 0`.
    pub fn lambda(&self, j: usize) -> f64 {
        self.lambda[j]
    }

    pub fn class_of(&self, k: i64) -> usize {
        k.rem_euclid(self.m) as usize
    }

    /// `λ_[k]`: zero on `mℤ`, `λ_{k mod m}` otherwise.
    pub fn lambda_bracket(&self, k: i64) -> f64 {
        self.lambda[self.class_of(k)]
    }

    /// Smallest `n ≥ 1` with `nK ∈ mℤ`.
    pub fn predicted_n_star(&self, top_mode: i64) -> usize {
        (self.m / gcd(top_mode, self.m)) as usize
    }
}

pub fn delta_star(phi: &FourierSeries, rf: &RationalFreq) -> FourierSeries {
    phi.map_modes(|k, c| c * rf.d[rf.class_of(k)])
}

/// Π_j: keeps the modes `k ≡ j (mod m)`.
pub fn projector(phi: &FourierSeries, rf: &RationalFreq, j: usize) -> FourierSeries {
    assert!((j as i64) < rf.m, "projector index {j} out of range for m = {}", rf.m);
    phi.map_modes(|k, c| if rf.class_of(k) == j { c } else { Complex64::new(0.0, 0.0) })
}

pub fn e_star(phi: &FourierSeries, rf: &RationalFreq) -> FourierSeries {
    phi.map_modes(|k, c| c * rf.lambda_bracket(k))
}

/// Scalar field for the coefficient arithmetic of the engine.
pub trait Real: Num + Copy + Neg<Output = Self> + PartialOrd + Debug + Send + Sync {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn pi() -> Self;
    fn sin_pi_rational(num: i64, den: i64) -> Self;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn sin_pi_rational(num: i64, den: i64) -> Self {
        let mut r = num.rem_euclid(2 * den);
        let mut sign = 1.0;
        if r >= den {
            r -= den;
            sign = -1.0;
        }
        if 2 * r > den {
            r = den - r;
        }
        sign * (std::f64::consts::PI * r as f64 / den as f64).sin()
    }
}

impl Real for DD {
    fn from_f64(x: f64) -> Self {
        DD::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        DD::to_f64(self)
    }
    fn pi() -> Self {
        DD::PI
    }
    fn sin_pi_rational(num: i64, den: i64) -> Self {
        DD::sin_pi_rational(num, den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    #[default]
    Float,
    /// Double-double coefficients.
    Extended,
}

/// `Σ_{n≥1} εⁿ u_n` with trigonometric-polynomial coefficients; `orders[0]` is `u_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolyEpsSeries {
    pub orders: Vec<FourierSeries>,
    pub exactness: Exactness,
}

impl TrigPolyEpsSeries {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Coefficient of `εⁿ`, `n ≥ 1`.
    pub fn order(&self, n: usize) -> Option<&FourierSeries> {
        n.checked_sub(1).and_then(|i| self.orders.get(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub n: usize,
    /// `𝓕_{nK}(g_n)`.
    pub top_coeff: Complex64,
    /// ℓ¹ norm of `Π₀ g_n`.
    pub projection_norm: f64,
    /// A priori bound on the coefficient magnitudes entering `g_n`.
    pub scale: f64,
    pub obstructed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub rf: RationalFreq,
    /// K, the top mode of the (possibly reflected) forcing.
    pub top_mode: i64,
    /// A = 𝓕_K(f).
    pub amplitude: Complex64,
    /// Whether f was replaced by `−f(−θ)` to move its top mode to `+K`.
    pub reflected: bool,
    pub exactness: Exactness,
    pub threshold: f64,
    pub max_order: usize,
    pub predicted_n_star: usize,
    pub n_star: Option<usize>,
    /// `Π₀ g_{n★}`.
    pub obstruction_witness: Option<FourierSeries>,
    pub gamma_engine: Option<Complex64>,
    pub gamma_oracle: Option<Complex64>,
    /// Largest relative gap between engine and oracle top coefficients over the computed orders.
    pub relative_gap: f64,
    pub orders: Vec<OrderRecord>,
    pub betas: Vec<f64>,
    pub gammas: Vec<Complex64>,
    /// `u_1, …, u_{n−1}` for the orders solved before the obstruction.
    pub solution: TrigPolyEpsSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTables {
    pub top_mode: i64,
    pub amplitude: Complex64,
    pub betas: Vec<f64>,
    pub gammas: Vec<Complex64>,
}

type Sparse<T> = BTreeMap<i64, Complex<T>>;

fn sparse_from<T: Real>(f: &FourierSeries) -> Sparse<T> {
    f.modes()
        .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
        .map(|(k, c)| (k, Complex::new(T::from_f64(c.re), T::from_f64(c.im))))
        .collect()
}

fn sparse_to_series<T: Real>(s: &Sparse<T>) -> FourierSeries {
    let modes: Vec<(i64, Complex64)> = s
        .iter()
        .map(|(&k, c)| (k, Complex64::new(c.re.to_f64(), c.im.to_f64())))
        .collect();
    FourierSeries::from_modes(&modes, 0)
}

fn to_c64<T: Real>(c: Complex<T>) -> Complex64 {
    Complex64::new(c.re.to_f64(), c.im.to_f64())
}

fn sparse_l1<T: Real>(s: &Sparse<T>) -> f64 {
    s.values().fold(0.0, |acc, c| acc + to_c64(*c).norm())
}

fn sparse_mul<T: Real>(a: &Sparse<T>, b: &Sparse<T>) -> Sparse<T> {
    let mut out: Sparse<T> = BTreeMap::new();
    for (&k1, &x) in a {
        for (&k2, &y) in b {
            let e = out.entry(k1 + k2).or_insert_with(|| Complex::new(T::zero(), T::zero()));
            *e = *e + x * y;
        }
    }
    out
}

fn sparse_add_assign<T: Real>(a: &mut Sparse<T>, b: &Sparse<T>) {
    for (&k, &y) in b {
        let e = a.entry(k).or_insert_with(|| Complex::new(T::zero(), T::zero()));
        *e = *e + y;
    }
}

/// Top mode K and whether the forcing must be reflected to have `𝓕_K ≠ 0`.
fn top_mode(f: &FourierSeries) -> Option<(i64, bool)> {
    let k = f
        .modes()
        .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
        .map(|(k, _)| k.abs())
        .max()?;
    let c = f.coeff(k);
    Some((k, c.re == 0.0 && c.im == 0.0))
}

/// `θ ↦ −f(−θ)`: coefficients `f̃_k = −f̂_{−k}`.
fn reflect_forcing(f: &FourierSeries) -> FourierSeries {
    -&f.reflect()
}

struct EngineOutput {
    records: Vec<OrderRecord>,
    witness: Option<FourierSeries>,
    solution: Vec<FourierSeries>,
}

/// Runs the order-by-order recursion up to `max_order`. With `stop` set, halts at the first
/// obstructed order; otherwise continues with `u_n = E g_n`, discarding `Π₀ g_n`.
fn run_engine<T: Real>(
    f: &FourierSeries,
    rf: &RationalFreq,
    top: i64,
    max_order: usize,
    threshold: f64,
    stop: bool,
) -> EngineOutput {
    let m = rf.m;
    let lam: Vec<T> = (0..m)
        .map(|j| {
            if j == 0 {
                T::zero()
            } else {
                let s = T::sin_pi_rational(j * rf.p, m);
                -(T::one() / (T::from_f64(4.0) * s * s))
            }
        })
        .collect();
    let lam_max = rf.lambda.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let two_pi = T::from_f64(2.0) * T::pi();

    let f_sparse: Sparse<T> = sparse_from(f);
    // fd[r] = f⁽ʳ⁾/r!
    let mut fd: Vec<Sparse<T>> = vec![f_sparse.clone()];
    let mut fact = T::one();
    for r in 1..max_order.max(1) {
        fact = fact * T::from_f64(r as f64);
        let d: Sparse<T> = f_sparse
            .iter()
            .map(|(&k, &c)| {
                let ik = Complex::new(T::zero(), two_pi * T::from_f64(k as f64));
                let mut w = c;
                for _ in 0..r {
                    w = w * ik;
                }
                (k, Complex::new(w.re / fact, w.im / fact))
            })
            .collect();
        fd.push(d);
    }
    let fd_l1: Vec<f64> = fd.iter().map(sparse_l1).collect();

    // p[r][s − r] = [εˢ] uʳ, with the scalar bounds ps alongside.
    let mut p: Vec<Vec<Sparse<T>>> = vec![Vec::new(); max_order.max(1)];
    let mut ps: Vec<Vec<f64>> = vec![Vec::new(); max_order.max(1)];
    let mut u: Vec<Sparse<T>> = Vec::new();
    let mut us: Vec<f64> = Vec::new();

    let mut records = Vec::new();
    let mut witness = None;
    let mut solution = Vec::new();

    for n in 1..=max_order {
        let (g, scale) = if n == 1 {
            (f_sparse.clone(), fd_l1[0])
        } else {
            let s = n - 1;
            p[1].push(u[s - 1].clone());
            ps[1].push(us[s - 1]);
            for r in 2..=s {
                let mut acc: Sparse<T> = BTreeMap::new();
                let mut acc_s = 0.0;
                for j in 1..=(s + 1 - r) {
                    let prev = s - j;
                    acc_s += us[j - 1] * ps[r - 1][prev - (r - 1)];
                    let term = sparse_mul(&u[j - 1], &p[r - 1][prev - (r - 1)]);
                    sparse_add_assign(&mut acc, &term);
                }
                p[r].push(acc);
                ps[r].push(acc_s);
            }
            let mut g: Sparse<T> = BTreeMap::new();
            let mut scale = 0.0;
            for r in 1..=s {
                let term = sparse_mul(&fd[r], &p[r][s - r]);
                sparse_add_assign(&mut g, &term);
                scale += fd_l1[r] * ps[r][s - r];
            }
            (g, scale)
        };

        let proj: Sparse<T> = g
            .iter()
            .filter(|(&k, _)| k.rem_euclid(m) == 0)
            .map(|(&k, &c)| (k, c))
            .collect();
        let projection_norm = sparse_l1(&proj);
        let obstructed = projection_norm > threshold * scale;
        let top_coeff = g
            .get(&(n as i64 * top))
            .map(|&c| to_c64(c))
            .unwrap_or_default();
        records.push(OrderRecord {
            n,
            top_coeff,
            projection_norm,
            scale,
            obstructed,
        });
        if obstructed && witness.is_none() {
            witness = Some(sparse_to_series(&proj));
            if stop {
                break;
            }
        }

        let un: Sparse<T> = g
            .iter()
            .filter(|(&k, _)| k.rem_euclid(m) != 0)
            .map(|(&k, &c)| {
                let l = lam[k.rem_euclid(m) as usize];
                (k, Complex::new(c.re * l, c.im * l))
            })
            .collect();
        us.push(lam_max * scale);
        if witness.is_none() {
            solution.push(sparse_to_series(&un));
        }
        u.push(un);
    }

    EngineOutput {
        records,
        witness,
        solution,
    }
}

fn oracle_generic<T: Real>(k: i64, rf: &RationalFreq, up_to: usize, a: Complex64) -> OracleTables {
    let m = rf.m;
    let lam_bracket = |kk: i64| -> T {
        let j = kk.rem_euclid(m);
        if j == 0 {
            T::zero()
        } else {
            let s = T::sin_pi_rational(j * rf.p, m);
            -(T::one() / (T::from_f64(4.0) * s * s))
        }
    };
    // β_n = [x^{n−1}](exp C − 1), C(x) = Σ_j c_j x^j, c_j = −λ_[jK] β_j.
    let mut betas: Vec<T> = Vec::with_capacity(up_to);
    let mut c: Vec<T> = vec![T::zero()];
    let mut e: Vec<T> = vec![T::one()];
    for n in 1..=up_to {
        let beta = if n == 1 {
            T::one()
        } else {
            let kk = n - 1;
            let mut acc = T::zero();
            for j in 1..=kk {
                acc = acc + T::from_f64(j as f64) * c[j] * e[kk - j];
            }
            let ek = acc / T::from_f64(kk as f64);
            e.push(ek);
            ek
        };
        betas.push(beta);
        c.push(-lam_bracket(n as i64 * k) * beta);
    }

    let amp = Complex::new(T::from_f64(a.re), T::from_f64(a.im));
    let step = Complex::new(T::zero(), -(T::from_f64(2.0) * T::pi() * T::from_f64(k as f64)));
    let mut pow_step = Complex::new(T::one(), T::zero());
    let mut pow_a = amp;
    let mut gammas = Vec::with_capacity(up_to);
    for beta in &betas {
        let g = pow_step * pow_a;
        gammas.push(to_c64(Complex::new(g.re * *beta, g.im * *beta)));
        pow_step = pow_step * step;
        pow_a = pow_a * amp;
    }
    OracleTables {
        top_mode: k,
        amplitude: a,
        betas: betas.into_iter().map(|b| b.to_f64()).collect(),
        gammas,
    }
}

/// Closed-form top coefficients `γ_n = (−2πiK)^{n−1} Aⁿ β_n`, evaluated in double-double.
pub fn beta_gamma_oracle(k: i64, rf: &RationalFreq, up_to: usize, a: Complex64) -> OracleTables {
    oracle_generic::<DD>(k, rf, up_to, a)
}

fn relative_gap(records: &[OrderRecord], gammas: &[Complex64], up_to: usize) -> f64 {
    records
        .iter()
        .take(up_to)
        .zip(gammas)
        .filter(|(_, g)| g.norm() > 0.0)
        .map(|(r, g)| (r.top_coeff - g).norm() / g.norm())
        .fold(0.0, f64::max)
}

fn prepared(f: &FourierSeries) -> Option<(FourierSeries, i64, bool)> {
    let (k, reflect) = top_mode(f)?;
    let g = if reflect { reflect_forcing(f) } else { f.clone() };
    Some((g, k, reflect))
}

pub fn obstruction_order(
    f: &FourierSeries,
    rf: &RationalFreq,
    max_order: usize,
    threshold: f64,
    exactness: Exactness,
) -> ObstructionReport {
    let empty = TrigPolyEpsSeries {
        orders: Vec::new(),
        exactness,
    };
    let Some((g, k, reflected)) = prepared(f) else {
        return ObstructionReport {
            rf: rf.clone(),
            top_mode: 0,
            amplitude: Complex64::default(),
            reflected: false,
            exactness,
            threshold,
            max_order,
            predicted_n_star: 0,
            n_star: None,
            obstruction_witness: None,
            gamma_engine: None,
            gamma_oracle: None,
            relative_gap: 0.0,
            orders: Vec::new(),
            betas: Vec::new(),
            gammas: Vec::new(),
            solution: empty,
        };
    };
    let out = match exactness {
        Exactness::Float => run_engine::<f64>(&g, rf, k, max_order, threshold, true),
        Exactness::Extended => run_engine::<DD>(&g, rf, k, max_order, threshold, true),
    };
    let a = g.coeff(k);
    let computed = out.records.len();
    let oracle = beta_gamma_oracle(k, rf, computed, a);
    let n_star = out.records.iter().find(|r| r.obstructed).map(|r| r.n);
    let gamma_engine = n_star.map(|n| out.records[n - 1].top_coeff);
    let gamma_oracle = n_star.map(|n| oracle.gammas[n - 1]);
    ObstructionReport {
        rf: rf.clone(),
        top_mode: k,
        amplitude: a,
        reflected,
        exactness,
        threshold,
        max_order,
        predicted_n_star: rf.predicted_n_star(k),
        n_star,
        obstruction_witness: out.witness,
        gamma_engine,
        gamma_oracle,
        relative_gap: relative_gap(&out.records, &oracle.gammas, computed),
        orders: out.records,
        betas: oracle.betas,
        gammas: oracle.gammas,
        solution: TrigPolyEpsSeries {
            orders: out.solution,
            exactness,
        },
    }
}

/// `max_n |𝓕_{nK}(g_n) − γ_n| / |γ_n|` for `n ≤ up_to`, running the engine past any obstruction.
pub fn oracle_consistency(f: &FourierSeries, rf: &RationalFreq, up_to: usize) -> f64 {
    oracle_consistency_with(f, rf, up_to, Exactness::Extended)
}

pub fn oracle_consistency_with(
    f: &FourierSeries,
    rf: &RationalFreq,
    up_to: usize,
    exactness: Exactness,
) -> f64 {
    let Some((g, k, _)) = prepared(f) else {
        return 0.0;
    };
    let out = match exactness {
        Exactness::Float => run_engine::<f64>(&g, rf, k, up_to, DEFAULT_THRESHOLD, false),
        Exactness::Extended => run_engine::<DD>(&g, rf, k, up_to, DEFAULT_THRESHOLD, false),
    };
    let oracle = beta_gamma_oracle(k, rf, up_to, g.coeff(k));
    relative_gap(&out.records, &oracle.gammas, up_to)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSample {
    pub radius: f64,
    pub q: Complex64,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

/// Picard solves at `q = r·e^{2πip/m}` for increasing radii `r < 1`.
pub fn radial_approach(
    f: &FourierSeries,
    rf: &RationalFreq,
    eps: Complex64,
    radii: &[f64],
    config: &PicardConfig,
) -> Vec<RadialSample> {
    let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rf.omega());
    radii
        .iter()
        .map(|&radius| {
            let q = phase * radius;
            match picard_solve(f, &Frequency::from_q(q), eps, config) {
                Ok((_, report)) => RadialSample {
                    radius,
                    q,
                    iterations: Some(report.iterations),
                    error: None,
                },
                Err(e) => RadialSample {
                    radius,
                    q,
                    iterations: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}
