//! Rotation numbers on the Riemann sphere and the Diophantine sets built on them.
//!
//! A [`Frequency`] keeps `ω` together with `q = e^{2πiω}` expressed in whichever
//! chart (`q` or `ξ = 1/q`) has modulus at most one, so `|q|` itself never has to
//! be formed when it would overflow.
//!
//! [`DiophantineClass`] fixes `(M, τ)` and a denominator truncation `m_max`; all
//! membership questions are answered relative to that truncation.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resonance threshold for `|q^k - 1|`.
pub const RESONANCE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// `|q| ≤ 1`, coordinate `q`.
    Inner,
    /// `|q| > 1`, coordinate `ξ = 1/q`.
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "FrequencyRepr", try_from = "FrequencyRepr")]
pub struct Frequency {
    /// `ω`, real part reduced to `[0, 1)`. At `q = 0` / `q = ∞` the imaginary part is `±∞`.
    omega: Complex64,
    chart: Chart,
    /// `q` in the inner chart, `ξ = 1/q` in the outer one; modulus ≤ 1.
    coord: Complex64,
    /// `2π Im ω`, so that `|q| = e^{-log_scale}`.
    log_scale: f64,
}

/// JSON form: `ω` (null at the poles), the chart and its coordinate.
#[derive(Serialize, Deserialize)]
struct FrequencyRepr {
    omega: Option<Complex64>,
    chart: Chart,
    coord: Complex64,
}

impl From<Frequency> for FrequencyRepr {
    fn from(f: Frequency) -> Self {
        Self {
            omega: (!f.is_pole()).then_some(f.omega),
            chart: f.chart,
            coord: f.coord,
        }
    }
}

impl TryFrom<FrequencyRepr> for Frequency {
    type Error = String;

    fn try_from(r: FrequencyRepr) -> std::result::Result<Self, String> {
        match r.omega {
            None => Ok(match r.chart {
                Chart::Inner => Frequency::zero(),
                Chart::Outer => Frequency::infinity(),
            }),
            Some(omega) => {
                let mut f = Frequency::from_omega(omega);
                if f.chart != r.chart || (f.coord - r.coord).norm() > 1e-12 {
                    return Err(format!("coordinate {} does not match ω = {omega}", r.coord));
                }
                f.coord = r.coord;
                Ok(f)
            }
        }
    }
}

impl Frequency {
    pub fn from_omega(omega: Complex64) -> Self {
        let omega = Complex64::new(omega.re.rem_euclid(1.0), omega.im);
        let log_scale = 2.0 * PI * omega.im;
        let phase = 2.0 * PI * omega.re;
        let (chart, coord) = if omega.im >= 0.0 {
            (Chart::Inner, Complex64::from_polar((-log_scale).exp(), phase))
        } else {
            (Chart::Outer, Complex64::from_polar(log_scale.exp(), -phase))
        };
        Self {
            omega,
            chart,
            coord,
            log_scale,
        }
    }

    pub fn from_real(omega: f64) -> Self {
        Self::from_omega(Complex64::new(omega, 0.0))
    }

    /// Frequency with multiplier `q`; `q = 0` gives the point `ω = +i∞`.
    pub fn from_q(q: Complex64) -> Self {
        if q == Complex64::new(0.0, 0.0) {
            return Self::zero();
        }
        // ω = log(q) / (2πi)
        let omega = Complex64::new(q.arg() / (2.0 * PI), -q.norm().ln() / (2.0 * PI));
        let mut f = Self::from_omega(omega);
        if f.chart == Chart::Inner {
            f.coord = q;
        }
        f
    }

    /// Frequency with outer-chart coordinate `ξ = 1/q`; `ξ = 0` gives `q = ∞`.
    pub fn from_xi(xi: Complex64) -> Self {
        if xi == Complex64::new(0.0, 0.0) {
            return Self::infinity();
        }
        let omega = Complex64::new(-xi.arg() / (2.0 * PI), xi.norm().ln() / (2.0 * PI));
        let mut f = Self::from_omega(omega);
        if f.chart == Chart::Outer {
            f.coord = xi;
        }
        f
    }

    /// `q = 0`.
    pub fn zero() -> Self {
        Self {
            omega: Complex64::new(0.0, f64::INFINITY),
            chart: Chart::Inner,
            coord: Complex64::new(0.0, 0.0),
            log_scale: f64::INFINITY,
        }
    }

    /// `q = ∞`.
    pub fn infinity() -> Self {
        Self {
            omega: Complex64::new(0.0, f64::NEG_INFINITY),
            chart: Chart::Outer,
            coord: Complex64::new(0.0, 0.0),
            log_scale: f64::NEG_INFINITY,
        }
    }

    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Chart coordinate (`q` or `ξ`), modulus at most one.
    pub fn coord(&self) -> Complex64 {
        self.coord
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// True for the two points `q = 0` and `q = ∞`.
    pub fn is_pole(&self) -> bool {
        self.log_scale.is_infinite()
    }

    pub fn on_unit_circle(&self) -> bool {
        self.omega.im == 0.0
    }

    /// `|q|`; infinite at `q = ∞` or when it overflows.
    pub fn q_modulus(&self) -> f64 {
        (-self.log_scale).exp()
    }

    /// `q` itself, or `None` when it is infinite or not representable.
    pub fn q(&self) -> Option<Complex64> {
        match self.chart {
            Chart::Inner => Some(self.coord),
            Chart::Outer => {
                if self.coord == Complex64::new(0.0, 0.0) {
                    None
                } else {
                    let q = self.coord.inv();
                    q.is_finite().then_some(q)
                }
            }
        }
    }

    /// The reflected point `1/q̄`, i.e. `ω ↦ ω̄`.
    pub fn reflected(&self) -> Self {
        if self.is_pole() {
            return if self.chart == Chart::Inner {
                Self::infinity()
            } else {
                Self::zero()
            };
        }
        Self::from_omega(self.omega.conj())
    }

    /// `log |q^k|`.
    pub fn log_modulus_pow(&self, k: i64) -> f64 {
        if k == 0 {
            0.0
        } else {
            -(k as f64) * self.log_scale
        }
    }

    /// Phase of `q^k` reduced to `[0, 2π)`.
    fn phase_pow(&self, k: i64) -> f64 {
        2.0 * PI * (k as f64 * self.omega.re).rem_euclid(1.0)
    }

    /// `q^k`; errors when `log|q^k|` exceeds `cap`. Underflow to zero is allowed.
    pub fn q_pow(&self, k: i64, cap: f64) -> Result<Complex64> {
        if k == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let lm = self.log_modulus_pow(k);
        if lm > cap {
            return Err(Error::OverflowRisk {
                exponent: lm,
                cap,
                context: "power of q",
            });
        }
        if lm == f64::NEG_INFINITY {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(Complex64::from_polar(lm.exp(), self.phase_pow(k)))
    }

    /// `λ_k(q) = 1/(q^k - 1)`, evaluated through the small power of `q` so it
    /// never overflows: when `|q^k| > 1`, `λ_k = q^{-k}/(1 - q^{-k})`.
    pub fn lambda(&self, k: i64) -> Result<Complex64> {
        if k == 0 {
            return Err(Error::Resonance { k: 0, modulus: 0.0 });
        }
        let lm = self.log_modulus_pow(k);
        let (small, flipped) = if lm <= 0.0 {
            (self.small_pow(lm, self.phase_pow(k)), false)
        } else {
            (self.small_pow(-lm, -self.phase_pow(k)), true)
        };
        let d = small - 1.0;
        if d.norm() < RESONANCE_FLOOR {
            return Err(Error::Resonance {
                k,
                modulus: d.norm(),
            });
        }
        Ok(if flipped { -small / d } else { d.inv() })
    }

    fn small_pow(&self, log_mod: f64, phase: f64) -> Complex64 {
        if log_mod == f64::NEG_INFINITY {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(log_mod.exp(), phase)
        }
    }

    /// Largest `|λ_k|` over `0 < |k| ≤ k_max`, with the mode attaining it.
    pub fn max_abs_lambda(&self, k_max: usize) -> Result<(f64, i64)> {
        let mut best = (0.0, 1);
        for k in 1..=k_max as i64 {
            for kk in [k, -k] {
                let l = self.lambda(kk)?.norm();
                if l > best.0 {
                    best = (l, kk);
                }
            }
        }
        Ok(best)
    }
}

/// Riemann zeta on the real axis `s > 1`, via Euler–Maclaurin.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1, got {s}");
    let n = 64usize;
    let mut sum = 0.0;
    for k in 1..n {
        sum += (k as f64).powf(-s);
    }
    let nf = n as f64;
    // Tail from n: integral + half term + Bernoulli corrections.
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    let mut fall = s; // s(s+1)...(s+2j-2)
    let mut pw = nf.powf(-s - 1.0);
    let bernoulli = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let mut fact = 2.0; // (2j)!
    for (j, b) in bernoulli.iter().enumerate() {
        sum += b / fact * fall * pw;
        let j = j as f64 + 1.0;
        fall *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
        pw /= nf * nf;
        fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
    }
    sum
}

/// Parameters `(M, τ)` of `A_M^ℝ`, with denominators truncated at `m_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineClass {
    #[serde(rename = "M")]
    m: f64,
    tau: f64,
    m_max: u64,
    sigma: f64,
}

impl DiophantineClass {
    pub fn new(m: f64, tau: f64, m_max: u64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let floor = 2.0 * zeta(1.0 + tau);
        if !(m > floor) {
            return Err(Error::InvalidParameter(format!(
                "M = {m} must exceed 2ζ(1+τ) = {floor:.6}"
            )));
        }
        if m_max < 2 {
            return Err(Error::InvalidParameter(format!("m_max must be ≥ 2, got {m_max}")));
        }
        Ok(Self {
            m,
            tau,
            m_max,
            sigma: 4.0 + 2.0 * tau,
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn m_max(&self) -> u64 {
        self.m_max
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `2ζ(1+τ)/M`, the bound on the total gap measure.
    pub fn gap_measure_bound(&self) -> f64 {
        2.0 * zeta(1.0 + self.tau) / self.m
    }

    /// Radius `1/(M m^{2+τ})` of the excluded interval around `n/m`.
    pub fn radius(&self, denom: u64) -> f64 {
        1.0 / (self.m * (denom as f64).powf(2.0 + self.tau))
    }

    pub fn with_m_max(&self, m_max: u64) -> Result<Self> {
        Self::new(self.m, self.tau, m_max)
    }
}

impl Default for DiophantineClass {
    /// `M = 6, τ = 0.5, m_max = 2000`.
    fn default() -> Self {
        Self::new(6.0, 0.5, 2000).expect("default class is admissible")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    /// `min |x - n/m| M m^{2+τ}` over the scanned denominators; membership ⇔ margin ≥ 1.
    pub margin: f64,
    /// `(n, m)` attaining the minimum.
    pub worst: (i64, u64),
    /// Denominators larger than this were not examined.
    pub truncated_at: u64,
}

impl MarginReport {
    pub fn is_member(&self) -> bool {
        self.margin >= 1.0
    }
}

/// Diophantine margin of a real number. Only continued-fraction convergents
/// with denominator ≤ `m_max` are examined: for `q_k ≤ m < q_{k+1}` the best
/// approximation property gives `m^{1+τ}|mx - n| ≥ q_k^{1+τ}|q_k x - p_k|`.
pub fn dioph_real_margin(x: f64, class: &DiophantineClass) -> MarginReport {
    let y = x.rem_euclid(1.0);
    let mut report = MarginReport {
        margin: f64::INFINITY,
        worst: (0, 1),
        truncated_at: class.m_max,
    };
    let consider = |n: i64, m: u64, report: &mut MarginReport| {
        let d = (y - n as f64 / m as f64).abs();
        let margin = d * class.m * (m as f64).powf(2.0 + class.tau);
        if margin < report.margin {
            report.margin = margin;
            report.worst = (n, m);
        }
    };
    // Nearest integer, then convergents of y.
    consider(y.round() as i64, 1, &mut report);
    let (mut p_prev, mut q_prev): (i64, i64) = (1, 0);
    let (mut p, mut q): (i64, i64) = (0, 1);
    let mut rest = y;
    for _ in 0..64 {
        if rest.abs() < 1e-15 {
            break;
        }
        let inv = 1.0 / rest;
        let a = inv.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i64;
        rest = inv - a as f64;
        let p_next = a * p + p_prev;
        let q_next = a * q + q_prev;
        if q_next as u64 > class.m_max {
            break;
        }
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
        consider(p, q as u64, &mut report);
        if report.margin == 0.0 {
            break;
        }
    }
    // A float that is exactly a ratio with small denominator terminates the expansion.
    report
}

/// Closure of the merged excluded interval containing `x`, if any.
fn gap_component(x: f64, class: &DiophantineClass) -> Option<(f64, f64)> {
    let covering = |y: f64| -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in 1..=class.m_max {
            let mf = m as f64;
            let n = (y * mf).round();
            let c = n / mf;
            let r = class.radius(m);
            if (y - c).abs() < r {
                lo = lo.min(c - r);
                hi = hi.max(c + r);
            }
        }
        (lo <= hi).then_some((lo, hi))
    };
    let (mut lo, mut hi) = covering(x)?;
    // Chains of overlapping intervals: an interval extending the component
    // past an endpoint must contain that endpoint.
    while let Some((_, h)) = covering(hi) {
        if h <= hi {
            break;
        }
        hi = h;
    }
    while let Some((l, _)) = covering(lo) {
        if l >= lo {
            break;
        }
        lo = l;
    }
    Some((lo, hi))
}

/// Distance from `x` to the truncated set `A_M^ℝ` (complement of the merged gaps).
pub fn dist_to_amr(x: f64, class: &DiophantineClass) -> f64 {
    let y = x.rem_euclid(1.0);
    match gap_component(y, class) {
        None => 0.0,
        Some((lo, hi)) => (y - lo).min(hi - y).max(0.0),
    }
}

/// `ω ∈ A_M^ℂ` ⇔ `dist(Re ω, A_M^ℝ) ≤ |Im ω|`.
pub fn in_amc(omega: Complex64, class: &DiophantineClass) -> bool {
    if omega.im.is_infinite() {
        return true;
    }
    dist_to_amr(omega.re, class) <= omega.im.abs()
}

/// `K_M = E(A_M^ℂ) ∪ {0, ∞}`.
pub fn in_km(f: &Frequency, class: &DiophantineClass) -> bool {
    f.is_pole() || in_amc(f.omega(), class)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallDivisorReport {
    /// `max |λ_k| / (√2 M |k|^{1+τ})`.
    pub max_ratio: f64,
    pub worst_k: i64,
}

/// Checks `|λ_k(q)| ≤ √2 M |k|^{1+τ}` for `0 < |k| ≤ k_max`.
pub fn check_small_divisor_bound(
    f: &Frequency,
    class: &DiophantineClass,
    k_max: usize,
) -> Result<SmallDivisorReport> {
    let mut report = SmallDivisorReport {
        max_ratio: 0.0,
        worst_k: 1,
    };
    for k in 1..=k_max as i64 {
        let bound = SQRT_2 * class.m * (k as f64).powf(1.0 + class.tau);
        for kk in [k, -k] {
            let ratio = match f.lambda(kk) {
                Ok(l) => l.norm() / bound,
                Err(_) => f64::INFINITY,
            };
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst_k = kk;
            }
            if !(ratio <= 1.0) {
                return Err(Error::BoundViolation(format!(
                    "|λ_{kk}(q)| exceeds √2·M·|k|^(1+τ) by ratio {ratio:e} at ω = {}",
                    f.omega()
                )));
            }
        }
    }
    Ok(report)
}

/// `dist(z, Z)` for complex `z`.
pub fn dist_to_integers(z: Complex64) -> f64 {
    let dx = z.re - z.re.round();
    dx.hypot(z.im)
}

/// Checks `|e^{2πiz} - 1| ≥ dist(z, Z)` for `|Im z| ≤ ½`; returns the slack.
pub fn check_exp_dist_bound(z: Complex64) -> Result<f64> {
    if z.im.abs() > 0.5 {
        return Err(Error::Precondition(format!("|Im z| = {} exceeds 1/2", z.im.abs())));
    }
    let lhs = ((Complex64::i() * 2.0 * PI * z).exp() - 1.0).norm();
    let rhs = dist_to_integers(z);
    let slack = lhs - rhs;
    // Both sides vanish at integers; allow rounding there.
    if slack < -1e-15 * (1.0 + rhs) {
        return Err(Error::BoundViolation(format!(
            "|e^(2πiz) - 1| = {lhs:e} < dist(z, Z) = {rhs:e} at z = {z}"
        )));
    }
    Ok(slack)
}

/// Checks `dist(z, Z) ≥ dist(x, Z)/√2` whenever `|Im z| ≥ |x - Re z|`.
pub fn check_real_comparison(z: Complex64, x: f64) -> Result<f64> {
    if z.im.abs() < (x - z.re).abs() {
        return Err(Error::Precondition(format!(
            "|Im z| = {} is below |x - Re z| = {}",
            z.im.abs(),
            (x - z.re).abs()
        )));
    }
    let lhs = dist_to_integers(z);
    let rhs = dist_to_integers(Complex64::new(x, 0.0)) / SQRT_2;
    let slack = lhs - rhs;
    if slack < -1e-15 {
        return Err(Error::BoundViolation(format!(
            "dist(z, Z) = {lhs:e} < dist(x, Z)/√2 = {rhs:e}"
        )));
    }
    Ok(slack)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Number of real grid points for the sawtooth boundary.
    pub boundary_points: usize,
    /// Keep the merged gap list (otherwise only the total measure is computed).
    pub list_gaps: bool,
    /// Gaps narrower than this are counted in the measure but not listed.
    pub min_listed_width: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            boundary_points: 1000,
            list_gaps: true,
            min_listed_width: 0.0,
        }
    }
}

/// Geometry of `[0,1) \ A_M^ℝ` and of the boundary of `A_M^ℂ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetGeometry {
    #[serde(rename = "M")]
    pub m: f64,
    pub tau: f64,
    pub m_max: u64,
    /// Merged open gaps within `[0, 1]`, sorted.
    pub gaps: Vec<[f64; 2]>,
    pub gap_count: usize,
    /// Merged gaps counted but not listed.
    pub omitted_gaps: usize,
    pub total_gap_measure: f64,
    pub measure_bound: f64,
    /// Points `Re ω + i·dist(Re ω, A_M^ℝ)` on the upper boundary of `A_M^ℂ`.
    pub boundary_samples: Vec<[f64; 2]>,
    /// Images of the boundary samples under `ω ↦ e^{2πiω}` (inner part of `K_M`).
    pub boundary_q_inner: Vec<[f64; 2]>,
    /// Images of the conjugate samples (outer part of `K_M`).
    pub boundary_q_outer: Vec<[f64; 2]>,
}

/// Sorted stream of merged gaps over the Farey sequence of order `m_max`.
struct GapMerger {
    stack: std::collections::VecDeque<(f64, f64)>,
    total: f64,
    comp: f64,
    count: usize,
    omitted: usize,
    listed: Vec<[f64; 2]>,
    opts: GeometryOptions,
}

impl GapMerger {
    fn flush_front(&mut self) {
        if let Some((lo, hi)) = self.stack.pop_front() {
            let w = hi - lo;
            // Kahan-compensated sum.
            let y = w - self.comp;
            let t = self.total + y;
            self.comp = (t - self.total) - y;
            self.total = t;
            self.count += 1;
            if self.opts.list_gaps && w >= self.opts.min_listed_width {
                self.listed.push([lo, hi]);
            } else {
                self.omitted += 1;
            }
        }
    }

    fn push(&mut self, mut lo: f64, mut hi: f64) {
        while let Some(&(blo, bhi)) = self.stack.back() {
            if lo < bhi {
                lo = lo.min(blo);
                hi = hi.max(bhi);
                self.stack.pop_back();
            } else {
                break;
            }
        }
        self.stack.push_back((lo, hi));
    }
}

/// Builds the gap list, total measure and boundary samples of the class.
pub fn export_set_geometry(class: &DiophantineClass, opts: &GeometryOptions) -> SetGeometry {
    let m_max = class.m_max;
    let radii: Vec<f64> = (0..=m_max).map(|m| if m == 0 { 0.0 } else { class.radius(m) }).collect();

    // Small denominators can reach far to the left; precompute their lower
    // endpoints in center order with suffix minima.
    let small = m_max.min(64);
    let mut small_fracs: Vec<(f64, f64)> = Vec::new();
    for m in 1..=small {
        for n in 0..=m {
            if gcd(n, m) == 1 {
                let c = n as f64 / m as f64;
                small_fracs.push((c, (c - radii[m as usize]).max(0.0)));
            }
        }
    }
    small_fracs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut suffix_min = vec![f64::INFINITY; small_fracs.len() + 1];
    for i in (0..small_fracs.len()).rev() {
        suffix_min[i] = suffix_min[i + 1].min(small_fracs[i].1);
    }
    let big_reach = if small < m_max { radii[small as usize + 1] } else { 0.0 };

    let mut merger = GapMerger {
        stack: Default::default(),
        total: 0.0,
        comp: 0.0,
        count: 0,
        omitted: 0,
        listed: Vec::new(),
        opts: *opts,
    };

    // Farey sequence of order m_max: a/b, c/d consecutive.
    let (mut a, mut b, mut c, mut d) = (0u64, 1u64, 1u64, m_max);
    let mut small_idx = 0usize;
    let mut step = 0u64;
    loop {
        let center = a as f64 / b as f64;
        let r = radii[b as usize];
        merger.push((center - r).max(0.0), (center + r).min(1.0));
        while small_idx < small_fracs.len() && small_fracs[small_idx].0 <= center {
            small_idx += 1;
        }
        step += 1;
        if step % 1024 == 0 {
            let safe = (center - big_reach).min(suffix_min[small_idx]);
            while merger.stack.len() > 1 && merger.stack.front().is_some_and(|g| g.1 <= safe) {
                merger.flush_front();
            }
        }
        if a == 1 && b == 1 {
            break;
        }
        let k = (m_max + b) / d;
        let (na, nb) = (c, d);
        let (nc, nd) = (k * c - a, k * d - b);
        a = na;
        b = nb;
        c = nc;
        d = nd;
    }
    while !merger.stack.is_empty() {
        merger.flush_front();
    }

    let mut samples = Vec::new();
    let mut q_in = Vec::new();
    let mut q_out = Vec::new();
    let np = opts.boundary_points.max(2);
    for i in 0..np {
        let x = i as f64 / (np - 1) as f64;
        let h = dist_to_amr(x, class);
        samples.push([x, h]);
        let q = Frequency::from_omega(Complex64::new(x, h));
        let qi = q.coord();
        q_in.push([qi.re, qi.im]);
        let qo = Complex64::from_polar((2.0 * PI * h).exp(), 2.0 * PI * x);
        q_out.push([qo.re, qo.im]);
    }

    SetGeometry {
        m: class.m,
        tau: class.tau,
        m_max,
        gaps: merger.listed,
        gap_count: merger.count,
        omitted_gaps: merger.omitted,
        total_gap_measure: merger.total,
        measure_bound: class.gap_measure_bound(),
        boundary_samples: samples,
        boundary_q_inner: q_in,
        boundary_q_outer: q_out,
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// One sample of a Banach-space valued family over `K_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySample {
    pub freq: Frequency,
    /// Coefficient vector of `φ(q)`.
    pub value: Vec<Complex64>,
    /// Coefficient vector of the claimed derivative `dφ/dq`.
    pub deriv: Vec<Complex64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampledFamily {
    pub points: Vec<FamilySample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1HolNorms {
    pub n0: f64,
    pub n1: f64,
    pub n2: f64,
}

impl C1HolNorms {
    pub fn total(&self) -> f64 {
        self.n0 + self.n1 + self.n2
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).sum()
}

/// Finite-sample estimate of the `C¹_hol` norm: `n0 = max|φ|`,
/// `n1 = max(max|φ'|, max|δφ|)`, `n2 = max|Ω_{φ,φ'}|`, evaluated per chart and
/// combined by max. Vector norms are `ℓ¹` over coefficients. A finite sample
/// only gives a lower estimate of the sup over `K_M`.
pub fn c1hol_norm_estimate(s: &SampledFamily) -> Result<C1HolNorms> {
    if s.points.len() < 2 {
        return Err(Error::Precondition("need at least two sample points".into()));
    }
    let mut out = C1HolNorms {
        n0: 0.0,
        n1: 0.0,
        n2: 0.0,
    };
    for chart in [Chart::Inner, Chart::Outer] {
        // Coordinate and derivative in this chart. For the outer chart,
        // dφ/dξ = -q² dφ/dq = -φ'(q)/ξ².
        let pts: Vec<(Complex64, &[Complex64], Vec<Complex64>)> = s
            .points
            .iter()
            .filter(|p| p.freq.chart() == chart)
            .map(|p| {
                let z = p.freq.coord();
                let d = match chart {
                    Chart::Inner => p.deriv.clone(),
                    Chart::Outer => {
                        let w = -(z * z).inv();
                        p.deriv.iter().map(|c| c * w).collect()
                    }
                };
                (z, p.value.as_slice(), d)
            })
            .collect();
        for (_, v, d) in &pts {
            out.n0 = out.n0.max(vec_norm(v));
            out.n1 = out.n1.max(vec_norm(d));
        }
        for (i, (z, v, d)) in pts.iter().enumerate() {
            for (j, (z2, v2, _)) in pts.iter().enumerate() {
                if i == j || z == z2 {
                    continue;
                }
                let delta: Vec<Complex64> = v2.iter().zip(v.iter()).map(|(a, b)| a - b).collect();
                out.n1 = out.n1.max(vec_norm(&delta));
                let h = (z2 - z).inv();
                let omega: Vec<Complex64> = delta.iter().zip(d).map(|(dv, dd)| dv * h - dd).collect();
                out.n2 = out.n2.max(vec_norm(&omega));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn class() -> DiophantineClass {
        DiophantineClass::new(6.0, 0.5, 10_000).unwrap()
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-12);
        assert!((zeta(1.5) - 2.612_375_348_685_488).abs() < 1e-12);
        assert!((2.0 * zeta(1.5) / 6.0 - 0.8707).abs() < 1e-4);
    }

    #[test]
    fn class_validation() {
        assert!(DiophantineClass::new(5.0, 0.5, 100).is_err());
        assert!(DiophantineClass::new(6.0, 0.0, 100).is_err());
        assert!(DiophantineClass::new(6.0, 0.5, 1).is_err());
        assert_eq!(DiophantineClass::default().sigma(), 5.0);
    }

    #[test]
    fn from_omega_examples() {
        let f = Frequency::from_omega(c(0.0, 0.0));
        assert_eq!(f.chart(), Chart::Inner);
        assert!((f.q().unwrap() - c(1.0, 0.0)).norm() < 1e-15);

        let f = Frequency::from_omega(c(0.0, 2f64.ln() / (2.0 * PI)));
        assert!((f.q().unwrap() - c(0.5, 0.0)).norm() < 1e-15);

        let omega = c(0.0, -0.3);
        let f = Frequency::from_omega(omega);
        assert_eq!(f.chart(), Chart::Outer);
        let direct = (Complex64::i() * 2.0 * PI * omega).exp();
        assert!((f.q_modulus() - direct.norm()).abs() < 1e-12);
        assert!((f.q_modulus() - 6.5861).abs() < 1e-4);
        assert!((f.coord() - direct.inv()).norm() < 1e-15);
        assert!((f.coord().norm() - 0.15183).abs() < 1e-5);
    }

    #[test]
    fn from_q_and_xi_round_trip() {
        let q = c(0.2, -0.1);
        let f = Frequency::from_q(q);
        assert_eq!(f.coord(), q);
        let direct = (Complex64::i() * 2.0 * PI * f.omega()).exp();
        assert!((direct - q).norm() < 1e-15);
        let g = Frequency::from_xi(q);
        assert_eq!(g.chart(), Chart::Outer);
        assert!((g.q().unwrap() - q.inv()).norm() < 1e-12);
        assert!(Frequency::from_q(c(0.0, 0.0)).is_pole());
    }

    #[test]
    fn frequency_json_round_trip() {
        for f in [
            Frequency::zero(),
            Frequency::infinity(),
            Frequency::from_q(c(0.3, 0.0)),
            Frequency::from_xi(c(0.1, -0.2)),
            Frequency::from_real(golden()),
        ] {
            let s = serde_json::to_string(&f).unwrap();
            let back: Frequency = serde_json::from_str(&s).unwrap();
            assert_eq!(back.coord(), f.coord());
            assert_eq!(back.chart(), f.chart());
            assert!(f.is_pole() || back == f, "{s}");
        }
    }

    #[test]
    fn lambda_examples() {
        let z = Frequency::zero();
        assert_eq!(z.lambda(1).unwrap(), c(-1.0, 0.0));
        assert_eq!(z.lambda(-1).unwrap(), c(0.0, 0.0));
        let inf = Frequency::infinity();
        assert_eq!(inf.lambda(1).unwrap(), c(0.0, 0.0));
        assert_eq!(inf.lambda(-2).unwrap(), c(-1.0, 0.0));

        let g = Frequency::from_real(golden());
        let l = g.lambda(1).unwrap();
        assert!((l.re + 0.5).abs() < 1e-15);
        // Oracle: direct complex evaluation.
        let q = (Complex64::i() * 2.0 * PI * golden()).exp();
        let direct = (q - 1.0).inv();
        assert!((l - direct).norm() < 1e-14);
        assert!((l.im - direct.im).abs() < 1e-14);
        assert!((l.im.abs() - 0.19440).abs() < 1e-4);

        assert!(matches!(Frequency::from_real(0.0).lambda(3), Err(Error::Resonance { .. })));
    }

    #[test]
    fn lambda_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let omega = c(rng.gen_range(0.0..1.0), rng.gen_range(-0.4..0.4));
            let f = Frequency::from_omega(omega);
            for k in [1i64, -1, 2, -3, 7, -11, 40] {
                if f.log_modulus_pow(k).abs() > 600.0 {
                    continue;
                }
                let l = f.lambda(k).unwrap();
                let qk = f.q_pow(k, 700.0).unwrap();
                let prod = l * (qk - 1.0);
                assert!((prod - 1.0).norm() < 1e-13, "{omega} {k} {prod}");
                // λ_k(1/ξ) = -1 - λ_k(ξ): the reciprocal point is ω ↦ -ω.
                let r = Frequency::from_omega(-omega);
                let lr = r.lambda(k).unwrap();
                assert!((l - (-1.0 - lr)).norm() < 1e-14 * (1.0 + l.norm()));
            }
        }
    }

    #[test]
    fn margin_examples() {
        let cls = class();
        let r = dioph_real_margin(0.5, &cls);
        assert_eq!(r.margin, 0.0);
        assert_eq!(r.worst, (1, 2));
        assert!(!r.is_member());

        let r = dioph_real_margin(golden(), &cls);
        assert!(r.is_member(), "{r:?}");
        assert_eq!(r.truncated_at, 10_000);

        let r = dioph_real_margin(0.5 + 1e-4, &DiophantineClass::new(6.0, 0.5, 10_000).unwrap());
        assert!(r.margin < 1.0);
    }

    #[test]
    fn golden_convergents_satisfy_hurwitz_bound() {
        // Oracle: Fibonacci convergents F_{k-1}/F_k; |ω - p/q| ≥ 1/(√5 q²) ≥ 1/(6 q^{2.5}).
        let g = golden();
        let (mut a, mut b) = (1u64, 1u64);
        while b <= 10_000 {
            let d = (g - a as f64 / b as f64).abs();
            let qf = b as f64;
            assert!(d >= 1.0 / (6.0 * qf.powf(2.5)));
            let t = a + b;
            a = b;
            b = t;
        }
    }

    #[test]
    fn distance_examples() {
        let cls = class();
        assert_eq!(dist_to_amr(golden(), &cls), 0.0);
        let d = dist_to_amr(0.5, &cls);
        let r2 = 1.0 / (6.0 * 2f64.powf(2.5));
        assert!((r2 - 0.0295).abs() < 1e-4);
        assert!(d >= r2 && d < r2 + 1e-3, "d = {d}");
        let d0 = dist_to_amr(0.0, &cls);
        assert!(d0 >= 1.0 / 6.0 && d0 < 1.0 / 6.0 + 0.01, "d0 = {d0}");
    }

    #[test]
    fn membership_examples() {
        let cls = class();
        assert!(in_km(&Frequency::zero(), &cls));
        assert!(in_km(&Frequency::infinity(), &cls));
        assert!(in_amc(c(0.5, 0.5), &cls));
        assert!(!in_amc(c(0.5, 0.001), &cls));
    }

    #[test]
    fn small_divisor_bound_examples() {
        let cls = class();
        let r = check_small_divisor_bound(&Frequency::zero(), &cls, 50).unwrap();
        assert!(r.max_ratio <= 1.0 / (SQRT_2 * 6.0) + 1e-15);
        let r = check_small_divisor_bound(&Frequency::from_real(golden()), &cls, 100).unwrap();
        assert!(r.max_ratio < 1.0);
        let err = check_small_divisor_bound(&Frequency::from_real(0.5), &cls, 2).unwrap_err();
        assert!(matches!(err, Error::BoundViolation(_)));
    }

    #[test]
    fn exp_dist_examples() {
        assert!(check_exp_dist_bound(c(0.0, 0.0)).unwrap() >= 0.0);
        let s = check_exp_dist_bound(c(0.5, 0.0)).unwrap();
        assert!((s - 1.5).abs() < 1e-12);
        assert!(check_exp_dist_bound(c(0.0, 0.6)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-0.5..=0.5));
            check_exp_dist_bound(z).unwrap();
        }
    }

    #[test]
    fn geometry_measure_and_monotonicity() {
        let opts = GeometryOptions {
            boundary_points: 50,
            list_gaps: true,
            min_listed_width: 0.0,
        };
        let mut prev = f64::INFINITY;
        for m in [6.0, 12.0, 24.0] {
            let cls = DiophantineClass::new(m, 0.5, 300).unwrap();
            let g = export_set_geometry(&cls, &opts);
            assert!(g.total_gap_measure <= cls.gap_measure_bound());
            assert!(g.total_gap_measure < prev);
            prev = g.total_gap_measure;
            // Listed gaps are sorted and disjoint, and sum to the total.
            for w in g.gaps.windows(2) {
                assert!(w[0][1] <= w[1][0]);
            }
            let sum: f64 = g.gaps.iter().map(|g| g[1] - g[0]).sum();
            assert!((sum - g.total_gap_measure).abs() < 1e-12);
            // Gap at 0 has radius 1/M before merging.
            assert_eq!(g.gaps[0][0], 0.0);
            assert!(g.gaps[0][1] >= 1.0 / m);
        }
    }

    #[test]
    fn geometry_matches_brute_force_merge() {
        // Oracle: collect every interval, sort by left end, merge.
        let cls = DiophantineClass::new(6.0, 0.5, 200).unwrap();
        let mut iv = Vec::new();
        for m in 1..=200u64 {
            for n in 0..=m {
                if gcd(n, m) == 1 {
                    let c = n as f64 / m as f64;
                    let r = cls.radius(m);
                    iv.push(((c - r).max(0.0), (c + r).min(1.0)));
                }
            }
        }
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in iv {
            match merged.last_mut() {
                Some(last) if lo < last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        let total: f64 = merged.iter().map(|(a, b)| b - a).sum();
        let g = export_set_geometry(&cls, &GeometryOptions::default());
        assert_eq!(g.gap_count, merged.len());
        assert!((g.total_gap_measure - total).abs() < 1e-13);
    }

    #[test]
    fn boundary_samples_lie_on_sawtooth() {
        let cls = DiophantineClass::new(6.0, 0.5, 100).unwrap();
        let g = export_set_geometry(
            &cls,
            &GeometryOptions {
                boundary_points: 101,
                list_gaps: false,
                min_listed_width: 0.0,
            },
        );
        assert!(g.gaps.is_empty());
        assert_eq!(g.boundary_samples.len(), 101);
        for s in &g.boundary_samples {
            assert!(in_amc(c(s[0], s[1]), &cls));
            assert!(s[1] == 0.0 || !in_amc(c(s[0], s[1] * 0.99), &cls));
        }
        let json = serde_json::to_string(&g).unwrap();
        let back: SetGeometry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn c1hol_examples() {
        let pts = |vals: &dyn Fn(Complex64) -> (Complex64, Complex64)| SampledFamily {
            points: [c(0.1, 0.0), c(0.0, 0.3), c(-0.2, 0.1)]
                .iter()
                .map(|&q| {
                    let (v, d) = vals(q);
                    FamilySample {
                        freq: Frequency::from_q(q),
                        value: vec![v],
                        deriv: vec![d],
                    }
                })
                .collect(),
        };
        let k = c(2.0, -1.0);
        let n = c1hol_norm_estimate(&pts(&|_| (k, c(0.0, 0.0)))).unwrap();
        assert!((n.n0 - k.norm()).abs() < 1e-15 && n.n1 == 0.0 && n.n2 == 0.0);
        let n = c1hol_norm_estimate(&pts(&|q| (q, c(1.0, 0.0)))).unwrap();
        assert!(n.n2 < 1e-15);
        let one = SampledFamily {
            points: vec![FamilySample {
                freq: Frequency::zero(),
                value: vec![],
                deriv: vec![],
            }],
        };
        assert!(c1hol_norm_estimate(&one).is_err());
    }

    #[test]
    fn c1hol_lambda_one_below_paper_bound() {
        let cls = DiophantineClass::new(6.0, 0.5, 2000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut points = Vec::new();
        while points.len() < 200 {
            let omega = c(rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.4));
            if !in_amc(omega, &cls) {
                continue;
            }
            let f = Frequency::from_omega(omega);
            let q = f.coord();
            let l = f.lambda(1).unwrap();
            let d = -(q - 1.0).powi(2).inv();
            points.push(FamilySample {
                freq: f,
                value: vec![l],
                deriv: vec![d],
            });
        }
        let n = c1hol_norm_estimate(&SampledFamily { points }).unwrap();
        assert!(n.total() <= 7.0 * 36.0, "{n:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn margin_symmetries(x in 0.0f64..1.0) {
                let cls = DiophantineClass::new(6.0, 0.5, 2000).unwrap();
                let a = dioph_real_margin(x, &cls).margin;
                let b = dioph_real_margin(x + 1.0, &cls).margin;
                let r = dioph_real_margin(-x, &cls).margin;
                prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a));
                prop_assert!((a - r).abs() <= 1e-6 * (1.0 + a));
            }

            #[test]
            fn amc_symmetries(x in 0.0f64..1.0, y in -0.2f64..0.2) {
                let cls = DiophantineClass::new(6.0, 0.5, 500).unwrap();
                let w = c(x, y);
                let a = in_amc(w, &cls);
                prop_assert_eq!(a, in_amc(w.conj(), &cls));
                // -ω: distance is symmetric up to rounding of the endpoints.
                let d = dist_to_amr(x, &cls);
                let dm = dist_to_amr(-x, &cls);
                prop_assert!((d - dm).abs() < 1e-12);
            }

            #[test]
            fn real_comparison_holds(re in -1.0f64..1.0, im in -1.0f64..1.0, t in -1.0f64..1.0) {
                let z = c(re, im);
                let x = re + t * im.abs();
                check_real_comparison(z, x).unwrap();
            }
        }
    }
}
