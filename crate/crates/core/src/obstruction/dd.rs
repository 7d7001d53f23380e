//! Double-double reals: unevaluated sums `hi + lo` with about 32 significant digits.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Num, One, Zero};

#[derive(Clone, Copy, Default)]
pub struct DD {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DD {
    pub const PI: DD = DD {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };

    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Self { hi, lo }
    }

    fn trunc(self) -> Self {
        let hi = self.hi.trunc();
        if hi == self.hi {
            let (hi, lo) = quick_two_sum(hi, self.lo.trunc());
            Self { hi, lo }
        } else {
            Self { hi, lo: 0.0 }
        }
    }

    /// `sin(πt)` for a rational `t = num/den`, reduced exactly before evaluation.
    pub fn sin_pi_rational(num: i64, den: i64) -> Self {
        assert!(den > 0, "denominator must be positive");
        let mut r = num.rem_euclid(2 * den);
        let mut sign = 1.0;
        if r >= den {
            r -= den;
            sign = -1.0;
        }
        // sin(π r/den) = sin(π (den - r)/den)
        if 2 * r > den {
            r = den - r;
        }
        let x = DD::PI * DD::from_f64(r as f64) / DD::from_f64(den as f64);
        x.sin().mul_f64(sign)
    }

    /// Sine for `|x| ≲ π`: Taylor series after two halvings, then angle doubling.
    pub fn sin(self) -> Self {
        const HALVINGS: i32 = 2;
        let y = self.mul_f64(0.5f64.powi(HALVINGS));
        let y2 = y * y;
        let mut s = DD::zero();
        let mut c = DD::zero();
        let mut term_s = y;
        let mut term_c = DD::one();
        for k in 0..16 {
            s = s + term_s;
            c = c + term_c;
            let k = k as f64;
            term_s = -(term_s * y2) / DD::from_f64((2.0 * k + 2.0) * (2.0 * k + 3.0));
            term_c = -(term_c * y2) / DD::from_f64((2.0 * k + 1.0) * (2.0 * k + 2.0));
        }
        for _ in 0..HALVINGS {
            let s2 = (s * c).mul_f64(2.0);
            let c2 = c * c - s * s;
            s = s2;
            c = c2;
        }
        s
    }
}

impl fmt::Debug for DD {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DD({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DD {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl PartialEq for DD {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DD {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DD {
    type Output = DD;
    fn add(self, b: DD) -> DD {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DD { hi, lo }
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, b: DD) -> DD {
        self + (-b)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, b: DD) -> DD {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DD { hi, lo }
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, b: DD) -> DD {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD { hi, lo } + DD::from_f64(q3)
    }
}

impl Rem for DD {
    type Output = DD;
    fn rem(self, b: DD) -> DD {
        self - (self / b).trunc() * b
    }
}

impl Zero for DD {
    fn zero() -> Self {
        DD { hi: 0.0, lo: 0.0 }
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for DD {
    fn one() -> Self {
        DD { hi: 1.0, lo: 0.0 }
    }
}

impl Num for DD {
    type FromStrRadixErr = num_traits::ParseFloatError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(DD::from_f64)
    }
}
