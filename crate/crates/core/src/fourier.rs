//! Truncated two-sided Fourier series on the circle `R/Z`.
//!
//! A [`FourierSeries`] with cutoff `N` stores the coefficients of
//! `e_k(θ) = exp(2πikθ)` for `k = -N..=N`. Nonlinear operations (composition,
//! pointwise inversion) go through an equispaced grid of at least four times
//! the joint cutoff and report the modulus of whatever they discard.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_CUTOFF: usize = 256;
pub const DEFAULT_HARD_CAP: usize = 4096;
pub const DEFAULT_EXP_CAP: f64 = 700.0;
pub const DEFAULT_INVERT_FLOOR: f64 = 1e-8;
/// Minimum ratio between grid size and joint cutoff for nonlinear operations.
pub const GRID_FACTOR: usize = 4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Grid size used for nonlinear operations on series of the given joint cutoff.
pub fn grid_size_for(cutoff: usize) -> usize {
    (GRID_FACTOR * cutoff.max(1)).next_power_of_two()
}

/// Truncated Fourier series `Σ_{|k|≤N} c_k e_k`.
#[derive(Clone, PartialEq)]
pub struct FourierSeries {
    n: usize,
    coeffs: Vec<Complex64>,
}

/// Side information from a grid-based nonlinear operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    /// Largest modulus among the grid modes discarded by the final truncation.
    pub aliasing_tail: f64,
    pub grid_size: usize,
}

impl fmt::Debug for FourierSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nz: Vec<_> = self
            .modes()
            .filter(|(_, c)| *c != ZERO)
            .map(|(k, c)| format!("{k}: {c}"))
            .collect();
        write!(f, "FourierSeries(N={}; {})", self.n, nz.join(", "))
    }
}

impl FourierSeries {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![ZERO; 2 * n + 1],
        }
    }

    /// Builds a series from coefficients ordered `k = -N..=N`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "coefficient array must have odd length 2N+1, got {}",
                coeffs.len()
            )));
        }
        let n = coeffs.len() / 2;
        Ok(Self { n, coeffs })
    }

    pub fn constant(c: Complex64, n: usize) -> Self {
        let mut s = Self::zeros(n);
        s.coeffs[n] = c;
        s
    }

    /// The basis function `e_k`, stored with cutoff `max(|k|, n)`.
    pub fn basis(k: i64, n: usize) -> Self {
        let n = n.max(k.unsigned_abs() as usize);
        let mut s = Self::zeros(n);
        s.set_coeff(k, ONE);
        s
    }

    /// Series from `(k, c_k)` pairs; the cutoff is the largest `|k|` (at least `n`).
    pub fn from_modes(modes: &[(i64, Complex64)], n: usize) -> Self {
        let n = modes
            .iter()
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
            .max(n);
        let mut s = Self::zeros(n);
        for &(k, c) in modes {
            let i = s.index(k);
            s.coeffs[i] += c;
        }
        s
    }

    /// `cos(2πKθ)`: coefficients ½ at `k = ±K`.
    pub fn cosine(k: u32, n: usize) -> Self {
        let k = k as i64;
        Self::from_modes(&[(k, 0.5.into()), (-k, 0.5.into())], n)
    }

    /// `sin(2πKθ)`: coefficients `∓i/2` at `k = ±K`.
    pub fn sine(k: u32, n: usize) -> Self {
        let k = k as i64;
        Self::from_modes(
            &[(k, Complex64::new(0.0, -0.5)), (-k, Complex64::new(0.0, 0.5))],
            n,
        )
    }

    /// Samples `g` on a grid of `grid` points and keeps modes up to `n`.
    pub fn from_fn(n: usize, grid: usize, g: impl Fn(f64) -> Complex64) -> (Self, CompositionReport) {
        let grid = grid.max(2 * n + 1);
        let vals: Vec<Complex64> = (0..grid).map(|j| g(j as f64 / grid as f64)).collect();
        Self::from_grid(&vals, n)
    }

    #[inline]
    fn index(&self, k: i64) -> usize {
        (k + self.n as i64) as usize
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `φ̂_k`, zero beyond the cutoff.
    pub fn coeff(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.n {
            ZERO
        } else {
            self.coeffs[self.index(k)]
        }
    }

    /// Sets `φ̂_k`, extending the cutoff if needed.
    pub fn set_coeff(&mut self, k: i64, c: Complex64) {
        if k.unsigned_abs() as usize > self.n {
            *self = self.resized(k.unsigned_abs() as usize);
        }
        let i = self.index(k);
        self.coeffs[i] = c;
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[self.n]
    }

    /// Iterator over `(k, φ̂_k)` for `k = -N..=N`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.n as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - n, c))
    }

    /// Largest `|k|` with a nonzero coefficient (0 for constants and zero).
    pub fn degree(&self) -> usize {
        self.modes()
            .filter(|(_, c)| *c != ZERO)
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// True when every non-constant coefficient is exactly zero.
    pub fn is_constant(&self) -> bool {
        self.modes().all(|(k, c)| k == 0 || c == ZERO)
    }

    /// Copy with cutoff `n`; modes beyond `n` are dropped without reporting.
    /// Use [`FourierSeries::truncated`] when the tail matters.
    pub fn resized(&self, n: usize) -> Self {
        let mut s = Self::zeros(n);
        let m = n.min(self.n) as i64;
        for k in -m..=m {
            let i = s.index(k);
            s.coeffs[i] = self.coeff(k);
        }
        s
    }

    /// Truncates to cutoff `n`, returning the largest discarded modulus.
    pub fn truncated(&self, n: usize) -> (Self, f64) {
        let tail = self
            .modes()
            .filter(|(k, _)| k.unsigned_abs() as usize > n)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        (self.resized(n), tail)
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// Mode-wise multiplication by `m(k)`.
    pub fn map_modes(&self, mut m: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let n = self.n as i64;
        Self {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| m(i as i64 - n, c))
                .collect(),
        }
    }

    /// Complex conjugate of the function on real θ: `c_k ↦ conj(c_{-k})`.
    pub fn conj_reflect(&self) -> Self {
        let mut s = Self::zeros(self.n);
        for (k, c) in self.modes() {
            let i = s.index(-k);
            s.coeffs[i] = c.conj();
        }
        s
    }

    /// `θ ↦ φ(-θ)`: `c_k ↦ c_{-k}`.
    pub fn reflect(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Self { n: self.n, coeffs }
    }

    /// `Σ_k φ̂_k e^{2πikθ}` at a complex point.
    pub fn eval(&self, theta: Complex64) -> Result<Complex64> {
        self.eval_capped(theta, DEFAULT_EXP_CAP)
    }

    pub fn eval_capped(&self, theta: Complex64, cap: f64) -> Result<Complex64> {
        let deg = self.degree() as f64;
        let exponent = 2.0 * PI * deg * theta.im.abs();
        if exponent > cap {
            return Err(Error::OverflowRisk {
                exponent,
                cap,
                context: "Fourier evaluation",
            });
        }
        let z = Complex64::new(0.0, 2.0 * PI * theta.re.rem_euclid(1.0)).exp()
            * (-2.0 * PI * theta.im).exp();
        Ok(horner(&self.coeffs, self.n, z))
    }

    /// `∂^p_θ φ`: coefficient at `k` becomes `(2πik)^p φ̂_k`.
    pub fn derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        self.map_modes(|k, c| {
            if k == 0 {
                ZERO
            } else {
                c * Complex64::new(0.0, 2.0 * PI * k as f64).powu(order)
            }
        })
    }

    /// Product by FFT convolution. The cutoff of the result is the sum of the
    /// operands' cutoffs, so nothing is dropped.
    pub fn product(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let len = (2 * n + 1).next_power_of_two();
        let a = self.to_grid(len);
        let b = other.to_grid(len);
        let vals: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let (s, _) = Self::from_grid(&vals, n);
        s
    }

    /// Product truncated to cutoff `n`, with the largest discarded modulus.
    pub fn product_truncated(&self, other: &Self, n: usize) -> (Self, f64) {
        self.product(other).truncated(n)
    }

    /// Product that extends the cutoff up to `hard_cap` and truncates beyond it.
    pub fn product_capped(&self, other: &Self, hard_cap: usize) -> (Self, f64) {
        let p = self.product(other);
        if p.n <= hard_cap {
            (p, 0.0)
        } else {
            p.truncated(hard_cap)
        }
    }

    /// Direct `O(N²)` convolution, free of FFT rounding. Exact zeros stay zero.
    pub fn product_exact(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let mut out = vec![ZERO; 2 * n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if *b == ZERO {
                    continue;
                }
                out[i + j] += a * b;
            }
        }
        Self { n, coeffs: out }
    }

    /// Values `φ(j/len)` for `j = 0..len`. Requires `len ≥ 2N+1`.
    pub fn to_grid(&self, len: usize) -> Vec<Complex64> {
        assert!(len > 2 * self.n, "grid of {len} points cannot hold cutoff {}", self.n);
        let mut buf = vec![ZERO; len];
        for (k, c) in self.modes() {
            buf[k.rem_euclid(len as i64) as usize] = c;
        }
        plan(len, true).process(&mut buf);
        buf
    }

    /// Inverse of [`FourierSeries::to_grid`], keeping modes up to `n`; the report
    /// carries the largest modulus among the remaining grid modes.
    pub fn from_grid(vals: &[Complex64], n: usize) -> (Self, CompositionReport) {
        let len = vals.len();
        let mut buf = vals.to_vec();
        plan(len, false).process(&mut buf);
        let scale = 1.0 / len as f64;
        let keep = n.min((len - 1) / 2) as i64;
        let mut s = Self::zeros(n);
        for k in -keep..=keep {
            let i = s.index(k);
            s.coeffs[i] = buf[k.rem_euclid(len as i64) as usize] * scale;
        }
        let mut tail: f64 = 0.0;
        for (j, c) in buf.iter().enumerate() {
            let k = if j <= len / 2 { j as i64 } else { j as i64 - len as i64 };
            if k.abs() > keep {
                tail = tail.max(c.norm() * scale);
            }
        }
        (
            s,
            CompositionReport {
                aliasing_tail: tail,
                grid_size: len,
            },
        )
    }

    /// Sup of `|φ|` over the anti-aliased grid for this cutoff.
    pub fn sup_norm(&self) -> f64 {
        self.to_grid(grid_size_for(self.n.max(1)))
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// `Σ |φ̂_k|`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Σ_k |φ̂_k| e^{2πr|k|}`, an upper bound for `sup |φ|` on the strip `|Im θ| < r`.
    pub fn strip_norm_bound(&self, r: f64) -> Result<f64> {
        self.strip_norm_bound_capped(r, DEFAULT_EXP_CAP)
    }

    pub fn strip_norm_bound_capped(&self, r: f64, cap: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::InvalidParameter(format!("strip width {r} is negative")));
        }
        let exponent = 2.0 * PI * r * self.degree() as f64;
        if exponent > cap {
            return Err(Error::OverflowRisk {
                exponent,
                cap,
                context: "strip norm bound",
            });
        }
        Ok(self
            .modes()
            .map(|(k, c)| c.norm() * (2.0 * PI * r * k.abs() as f64).exp())
            .sum())
    }

    /// `θ ↦ f(θ + u(θ))`, sampled on an anti-aliased grid and transformed back to
    /// the joint cutoff of `f` and `u`.
    pub fn compose_id_plus(&self, u: &Self) -> Result<(Self, CompositionReport)> {
        self.compose_id_plus_capped(u, DEFAULT_EXP_CAP)
    }

    pub fn compose_id_plus_capped(&self, u: &Self, cap: f64) -> Result<(Self, CompositionReport)> {
        let n = self.n.max(u.n);
        let grid = grid_size_for(n);
        if u.is_zero() {
            return Ok((
                self.resized(n),
                CompositionReport {
                    aliasing_tail: 0.0,
                    grid_size: grid,
                },
            ));
        }
        if u.is_constant() {
            // Pure shift: exact phase multiplication.
            let c = u.mean();
            let exponent = 2.0 * PI * self.degree() as f64 * c.im.abs();
            if exponent > cap {
                return Err(Error::OverflowRisk {
                    exponent,
                    cap,
                    context: "composition with a constant shift",
                });
            }
            let shifted = self
                .resized(n)
                .map_modes(|k, a| a * (Complex64::new(0.0, 2.0 * PI * k as f64) * c).exp());
            return Ok((
                shifted,
                CompositionReport {
                    aliasing_tail: 0.0,
                    grid_size: grid,
                },
            ));
        }
        let uvals = u.to_grid(grid);
        let deg = self.degree() as f64;
        let max_im = uvals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let exponent = 2.0 * PI * deg * max_im;
        if exponent > cap {
            return Err(Error::OverflowRisk {
                exponent,
                cap,
                context: "composition f∘(id+u)",
            });
        }
        let vals: Vec<Complex64> = uvals
            .iter()
            .enumerate()
            .map(|(j, uj)| {
                let x = j as f64 / grid as f64 + uj;
                let z = Complex64::new(0.0, 2.0 * PI * x.re.rem_euclid(1.0)).exp()
                    * (-2.0 * PI * x.im).exp();
                horner(&self.coeffs, self.n, z)
            })
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::OverflowRisk {
                exponent: f64::INFINITY,
                cap,
                context: "composition produced non-finite values",
            });
        }
        Ok(Self::from_grid(&vals, n))
    }

    /// Series of `1/A`, at the cutoff of `A`.
    pub fn invert_pointwise(&self) -> Result<Self> {
        self.invert_pointwise_with(DEFAULT_INVERT_FLOOR).map(|(s, _)| s)
    }

    pub fn invert_pointwise_with(&self, floor: f64) -> Result<(Self, CompositionReport)> {
        let grid = grid_size_for(self.n.max(1));
        let vals = self.to_grid(grid);
        let min_modulus = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(min_modulus > floor) {
            return Err(Error::NearSingular { min_modulus, floor });
        }
        let inv: Vec<Complex64> = vals.iter().map(|v| v.inv()).collect();
        Ok(Self::from_grid(&inv, self.n))
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let n = self.n.max(other.n) as i64;
        let coeffs = (-n..=n).map(|k| op(self.coeff(k), other.coeff(k))).collect();
        Self {
            n: n as usize,
            coeffs,
        }
    }
}

/// `Σ_k c_k z^k` for `k = -N..=N`, with separate Horner passes for each sign.
fn horner(coeffs: &[Complex64], n: usize, z: Complex64) -> Complex64 {
    if n == 0 {
        return coeffs[0];
    }
    let mut pos = ZERO;
    for c in coeffs[n + 1..].iter().rev() {
        pos = (pos + c) * z;
    }
    let zi = z.inv();
    let mut neg = ZERO;
    for c in coeffs[..n].iter() {
        neg = (neg + c) * zi;
    }
    coeffs[n] + pos + neg
}

impl Add for &FourierSeries {
    type Output = FourierSeries;
    fn add(self, rhs: &FourierSeries) -> FourierSeries {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &FourierSeries {
    type Output = FourierSeries;
    fn sub(self, rhs: &FourierSeries) -> FourierSeries {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Add for FourierSeries {
    type Output = FourierSeries;
    fn add(self, rhs: FourierSeries) -> FourierSeries {
        &self + &rhs
    }
}

impl Sub for FourierSeries {
    type Output = FourierSeries;
    fn sub(self, rhs: FourierSeries) -> FourierSeries {
        &self - &rhs
    }
}

impl AddAssign<&FourierSeries> for FourierSeries {
    fn add_assign(&mut self, rhs: &FourierSeries) {
        if rhs.n > self.n {
            *self = self.resized(rhs.n);
        }
        for (k, c) in rhs.modes() {
            let i = self.index(k);
            self.coeffs[i] += c;
        }
    }
}

impl SubAssign<&FourierSeries> for FourierSeries {
    fn sub_assign(&mut self, rhs: &FourierSeries) {
        if rhs.n > self.n {
            *self = self.resized(rhs.n);
        }
        for (k, c) in rhs.modes() {
            let i = self.index(k);
            self.coeffs[i] -= c;
        }
    }
}

impl Neg for &FourierSeries {
    type Output = FourierSeries;
    fn neg(self) -> FourierSeries {
        self.scale(-ONE)
    }
}

impl Mul<Complex64> for &FourierSeries {
    type Output = FourierSeries;
    fn mul(self, rhs: Complex64) -> FourierSeries {
        self.scale(rhs)
    }
}

#[derive(Serialize, Deserialize)]
struct SeriesRepr {
    #[serde(rename = "N")]
    n: usize,
    coeffs: Vec<[f64; 2]>,
}

impl Serialize for FourierSeries {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesRepr {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FourierSeries {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = SeriesRepr::deserialize(de)?;
        if repr.coeffs.len() != 2 * repr.n + 1 {
            return Err(serde::de::Error::custom(format!(
                "expected {} coefficients for N = {}, found {}",
                2 * repr.n + 1,
                repr.n,
                repr.coeffs.len()
            )));
        }
        Ok(Self {
            n: repr.n,
            coeffs: repr
                .coeffs
                .into_iter()
                .map(|[re, im]| Complex64::new(re, im))
                .collect(),
        })
    }
}
