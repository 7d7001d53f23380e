//! Fourier multipliers at a fixed frequency: shifts, differences, and the
//! small-divisor inverses built from `λ_k(q) = 1/(q^k - 1)`.
//!
//! Products such as `q^k λ_k` are never formed from their factors; the bounded
//! closed forms (`q^k λ_k = -λ_{-k}` and friends) are used instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, DEFAULT_EXP_CAP};
use crate::frequency::Frequency;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    /// `q^k`: `φ ↦ φ(· + ω)`.
    ShiftPlus,
    /// `q^{-k}`: `φ ↦ φ(· - ω)`.
    ShiftMinus,
    /// `q^k - 1`.
    Nabla,
    /// `1 - q^{-k}`.
    NablaMinus,
    /// `q^k - 2 + q^{-k}`.
    Delta,
    /// `λ_k(q)`.
    Gamma,
    /// `-λ_{-k}(q)`.
    GammaMinus,
    /// `1/(q^k - 2 + q^{-k}) = -λ_k λ_{-k}`.
    EQ,
}

impl MultiplierKind {
    pub const ALL: [MultiplierKind; 8] = [
        MultiplierKind::ShiftPlus,
        MultiplierKind::ShiftMinus,
        MultiplierKind::Nabla,
        MultiplierKind::NablaMinus,
        MultiplierKind::Delta,
        MultiplierKind::Gamma,
        MultiplierKind::GammaMinus,
        MultiplierKind::EQ,
    ];

    /// Whether the multiplier is bounded in `k` off the unit circle.
    pub fn is_inverse(self) -> bool {
        matches!(self, MultiplierKind::Gamma | MultiplierKind::GammaMinus | MultiplierKind::EQ)
    }
}

/// Per-mode data for one `k > 0`.
#[derive(Debug, Clone, Copy)]
struct ModeEntry {
    /// `λ_k`, `λ_{-k}`, or the resonance error.
    lambda_plus: std::result::Result<Complex64, f64>,
    lambda_minus: std::result::Result<Complex64, f64>,
    /// `q^k`, `q^{-k}` when their log-modulus is within the cap.
    pow_plus: Option<Complex64>,
    pow_minus: Option<Complex64>,
}

/// Multipliers of every kind for `|k| ≤ cutoff`, computed once per frequency.
#[derive(Debug, Clone)]
pub struct MultiplierCache {
    freq: Frequency,
    cap: f64,
    entries: Vec<ModeEntry>,
}

impl MultiplierCache {
    pub fn new(freq: Frequency, cutoff: usize) -> Self {
        Self::with_cap(freq, cutoff, DEFAULT_EXP_CAP)
    }

    pub fn with_cap(freq: Frequency, cutoff: usize, cap: f64) -> Self {
        let entries = (0..=cutoff as i64).map(|k| Self::entry(&freq, k, cap)).collect();
        Self { freq, cap, entries }
    }

    fn entry(freq: &Frequency, k: i64, cap: f64) -> ModeEntry {
        let lam = |k: i64| {
            if k == 0 {
                return Ok(ZERO);
            }
            freq.lambda(k).map_err(|e| match e {
                Error::Resonance { modulus, .. } => modulus,
                _ => 0.0,
            })
        };
        ModeEntry {
            lambda_plus: lam(k),
            lambda_minus: lam(-k),
            pow_plus: freq.q_pow(k, cap).ok(),
            pow_minus: freq.q_pow(-k, cap).ok(),
        }
    }

    pub fn freq(&self) -> &Frequency {
        &self.freq
    }

    pub fn cutoff(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    fn entry_for(&self, k: i64) -> ModeEntry {
        match self.entries.get(k.unsigned_abs() as usize) {
            Some(e) => *e,
            None => Self::entry(&self.freq, k.abs(), self.cap),
        }
    }

    fn lambda(&self, k: i64) -> Result<Complex64> {
        let e = self.entry_for(k);
        let l = if k >= 0 { e.lambda_plus } else { e.lambda_minus };
        l.map_err(|modulus| Error::Resonance { k, modulus })
    }

    fn pow(&self, k: i64) -> Result<Complex64> {
        let e = self.entry_for(k);
        let p = if k >= 0 { e.pow_plus } else { e.pow_minus };
        p.ok_or(Error::OverflowRisk {
            exponent: self.freq.log_modulus_pow(k),
            cap: self.cap,
            context: "Fourier multiplier",
        })
    }

    /// The multiplier of `kind` at mode `k`.
    pub fn multiplier(&self, kind: MultiplierKind, k: i64) -> Result<Complex64> {
        use MultiplierKind::*;
        if k == 0 {
            return Ok(match kind {
                ShiftPlus | ShiftMinus => ONE,
                _ => ZERO,
            });
        }
        Ok(match kind {
            ShiftPlus => self.pow(k)?,
            ShiftMinus => self.pow(-k)?,
            Nabla => self.pow(k)? - 1.0,
            NablaMinus => 1.0 - self.pow(-k)?,
            Delta => self.pow(k)? - 2.0 + self.pow(-k)?,
            Gamma => self.lambda(k)?,
            GammaMinus => -self.lambda(-k)?,
            EQ => -self.lambda(k)? * self.lambda(-k)?,
        })
    }

    /// Mode-wise multiplication. Modes with zero coefficient are skipped, so
    /// resonant or overflowing multipliers only fail where they would act.
    pub fn apply(&self, kind: MultiplierKind, phi: &FourierSeries) -> Result<FourierSeries> {
        let mut out = phi.clone();
        let n = phi.cutoff() as i64;
        for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
            if *c == ZERO {
                continue;
            }
            *c *= self.multiplier(kind, i as i64 - n)?;
        }
        Ok(out)
    }
}

/// Applies a multiplier without keeping a cache.
pub fn apply(kind: MultiplierKind, phi: &FourierSeries, freq: &Frequency) -> Result<FourierSeries> {
    MultiplierCache::new(*freq, phi.cutoff()).apply(kind, phi)
}

/// `E^{(n)}`: the coefficient of `q^n` in `E_q = Σ_{n≥1} q^n E^{(n)}`. Sums
/// `d (φ̂_m e_m + φ̂_{-m} e_{-m})` over factorizations `n = m d`.
pub fn e_n(phi: &FourierSeries, n: usize) -> FourierSeries {
    assert!(n >= 1, "E^(n) is defined for n ≥ 1");
    let mut out = FourierSeries::zeros(phi.cutoff().min(n));
    for m in 1..=n.min(phi.cutoff()) {
        if n % m != 0 {
            continue;
        }
        let d = (n / m) as f64;
        let m = m as i64;
        out.set_coeff(m, phi.coeff(m) * d);
        out.set_coeff(-m, phi.coeff(-m) * d);
    }
    out
}
