//! Closed intervals of binary64 numbers with outward rounding.
//!
//! Every operation returns an interval that contains the exact real result
//! for every choice of points in its arguments. Rounding is done after the
//! fact: the basic operations use error-free transformations (TwoSum, FMA
//! residuals) to detect an inexact result and then step one representable
//! value outward, so exact results stay exact and the global FPU rounding
//! mode is never touched.
//!
//! Transcendental functions (`exp`, `ln`, `cos`, `sin`) rely on the platform
//! `libm` being faithfully rounded and pad each endpoint outward by
//! [`TRANSCENDENTAL_PADDING_ULPS`] units in the last place.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outward padding, in ulps, applied to each endpoint of a transcendental result.
pub const TRANSCENDENTAL_PADDING_ULPS: u32 = 4;

/// Below this magnitude a product or quotient may have lost bits to underflow,
/// so the residual test is not trusted and the result is always widened.
const TINY: f64 = 1.0e-290;

const PI_LO: f64 = std::f64::consts::PI;
const PI_HI: f64 = 3.1415926535897936; // next_up(PI); f64 PI lies below π

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.16e}, {:.16e}]", self.lo, self.hi)
    }
}

// ---------------------------------------------------------------------------
// Directed scalar operations.

fn nudge_down(x: f64, steps: u32) -> f64 {
    (0..steps).fold(x, |v, _| v.next_down())
}

fn nudge_up(x: f64, steps: u32) -> f64 {
    (0..steps).fold(x, |v, _| v.next_up())
}

/// Returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
pub(crate) fn add_down(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub(crate) fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Sign of the rounding residual `a*b - fl(a*b)`; `None` when it cannot be trusted.
#[inline]
fn mul_residual(a: f64, b: f64, p: f64) -> Option<f64> {
    if a == 0.0 || b == 0.0 {
        return Some(0.0);
    }
    if p.abs() < TINY {
        return None;
    }
    Some(a.mul_add(b, -p))
}

#[inline]
pub(crate) fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    match mul_residual(a, b, p) {
        Some(e) if e >= 0.0 => p,
        _ => p.next_down(),
    }
}

#[inline]
pub(crate) fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    match mul_residual(a, b, p) {
        Some(e) if e <= 0.0 => p,
        _ => p.next_up(),
    }
}

/// Sign of `a/b - fl(a/b)`, or `None` when the residual may have underflowed.
#[inline]
fn div_residual_sign(a: f64, b: f64, q: f64) -> Option<f64> {
    if a == 0.0 {
        return Some(0.0);
    }
    if q.abs() < TINY || a.abs() < TINY {
        return None;
    }
    // r = a - q*b exactly; a/b - q = r/b.
    let r = (-q).mul_add(b, a);
    Some(if r == 0.0 { 0.0 } else { r.signum() * b.signum() })
}

#[inline]
pub(crate) fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    match div_residual_sign(a, b, q) {
        Some(s) if s >= 0.0 => q,
        _ => q.next_down(),
    }
}

#[inline]
pub(crate) fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    match div_residual_sign(a, b, q) {
        Some(s) if s <= 0.0 => q,
        _ => q.next_up(),
    }
}

fn min4(a: f64, b: f64, c: f64, d: f64) -> f64 {
    a.min(b).min(c.min(d))
}

fn max4(a: f64, b: f64, c: f64, d: f64) -> f64 {
    a.max(b).max(c.max(d))
}

// ---------------------------------------------------------------------------

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
    pub const PI: Interval = Interval { lo: PI_LO, hi: PI_HI };
    pub const TAU: Interval = Interval {
        lo: 2.0 * PI_LO,
        hi: 2.0 * PI_HI,
    };

    /// Builds `[lo, hi]`, rejecting NaN, infinite or reversed endpoints.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    /// Degenerate interval `[x, x]`.
    ///
    /// Panics if `x` is not finite.
    pub fn point(x: f64) -> Self {
        assert!(x.is_finite(), "interval endpoint must be finite, got {x}");
        Self { lo: x, hi: x }
    }

    #[inline]
    pub(crate) fn from_raw(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "reversed interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    fn checked(lo: f64, hi: f64, what: &'static str) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            Err(Error::Overflow(what))
        }
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    /// Upper bound on `hi - lo`.
    pub fn width(self) -> f64 {
        add_up(self.hi, -self.lo)
    }

    pub fn mid(self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn is_point(self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(self, other: Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(self, other: Interval) -> Interval {
        Interval::from_raw(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// Largest absolute value attained on the interval.
    pub fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Interval with both endpoints moved outward by `r` (rounded outward).
    pub fn inflate(self, r: f64) -> Interval {
        Interval::from_raw(add_down(self.lo, -r), add_up(self.hi, r))
    }

    pub fn div(self, rhs: Interval) -> Result<Interval> {
        if rhs.contains(0.0) {
            return Err(Error::DivisionByZeroInterval);
        }
        let (a, b, c, d) = (self.lo, self.hi, rhs.lo, rhs.hi);
        let lo = min4(div_down(a, c), div_down(a, d), div_down(b, c), div_down(b, d));
        let hi = max4(div_up(a, c), div_up(a, d), div_up(b, c), div_up(b, d));
        Interval::checked(lo, hi, "div")
    }

    /// `self^k` for a positive integer `k`.
    pub fn pow_int(self, k: u32) -> Result<Interval> {
        if k == 0 {
            return Err(Error::InvalidArgument("pow_int exponent must be positive".into()));
        }
        let pow_down = |x: f64| (1..k).fold(x, |acc, _| mul_down(acc, x));
        let pow_up = |x: f64| (1..k).fold(x, |acc, _| mul_up(acc, x));
        // Both closures are only used on nonnegative arguments.
        let (lo, hi) = if k % 2 == 1 {
            let lo = if self.lo >= 0.0 { pow_down(self.lo) } else { -pow_up(-self.lo) };
            let hi = if self.hi >= 0.0 { pow_up(self.hi) } else { -pow_down(-self.hi) };
            (lo, hi)
        } else if self.lo >= 0.0 {
            (pow_down(self.lo), pow_up(self.hi))
        } else if self.hi <= 0.0 {
            (pow_down(-self.hi), pow_up(-self.lo))
        } else {
            (0.0, pow_up(self.mag()))
        };
        Interval::checked(lo, hi, "pow_int")
    }

    pub fn exp(self) -> Result<Interval> {
        let lo = nudge_down(self.lo.exp(), TRANSCENDENTAL_PADDING_ULPS).max(0.0);
        let hi = nudge_up(self.hi.exp(), TRANSCENDENTAL_PADDING_ULPS);
        Interval::checked(lo, hi, "exp")
    }

    pub fn ln(self) -> Result<Interval> {
        if self.lo <= 0.0 {
            return Err(Error::LogNonPositive { lo: self.lo });
        }
        let lo = nudge_down(self.lo.ln(), TRANSCENDENTAL_PADDING_ULPS);
        let hi = nudge_up(self.hi.ln(), TRANSCENDENTAL_PADDING_ULPS);
        Ok(Interval::from_raw(lo, hi))
    }

    /// Cosine of an angle in radians.
    pub fn cos(self) -> Interval {
        // cos peaks at even multiples of π and bottoms out at odd ones.
        self.trig(0.0, f64::cos)
    }

    /// Sine of an angle in radians.
    pub fn sin(self) -> Interval {
        // sin(x) = cos(x - π/2): extrema at (n + 1/2)π.
        self.trig(0.5, f64::sin)
    }

    /// Shared range reduction: the extrema of the function sit at
    /// `(n + shift)·π`, maximum for even `n`, minimum for odd `n`.
    fn trig(self, shift: f64, f: fn(f64) -> f64) -> Interval {
        if self.width() >= 2.0 * PI_LO {
            return Interval::from_raw(-1.0, 1.0);
        }
        let scaled = self.div(Interval::PI).expect("π interval excludes zero");
        let first = (add_down(scaled.lo, -shift)).ceil();
        let last = (add_up(scaled.hi, -shift)).floor();

        let at = |x: f64| {
            let y = f(x);
            (
                nudge_down(y, TRANSCENDENTAL_PADDING_ULPS),
                nudge_up(y, TRANSCENDENTAL_PADDING_ULPS),
            )
        };
        let (a_lo, a_hi) = at(self.lo);
        let (b_lo, b_hi) = at(self.hi);
        let mut lo = a_lo.min(b_lo);
        let mut hi = a_hi.max(b_hi);
        let mut n = first;
        while n <= last {
            if n.rem_euclid(2.0) == 0.0 {
                hi = 1.0;
            } else {
                lo = -1.0;
            }
            n += 1.0;
        }
        Interval::from_raw(lo.max(-1.0), hi.min(1.0))
    }

    /// `cos(2πx)`, with the argument first shifted by an integer.
    pub fn cos_tau(self) -> Interval {
        self.reduce_turns().mul(Interval::TAU).cos()
    }

    /// `sin(2πx)`, with the argument first shifted by an integer.
    pub fn sin_tau(self) -> Interval {
        self.reduce_turns().mul(Interval::TAU).sin()
    }

    /// Translates by `-floor(lo)` so that `lo ∈ [0, 1)`.
    pub fn reduce_turns(self) -> Interval {
        let n = self.lo.floor();
        if n == 0.0 {
            self
        } else {
            self - Interval::point(n)
        }
    }

    pub fn min_iv(self, other: Interval) -> Interval {
        Interval::from_raw(self.lo.min(other.lo), self.hi.min(other.hi))
    }

    pub fn max_iv(self, other: Interval) -> Interval {
        Interval::from_raw(self.lo.max(other.lo), self.hi.max(other.hi))
    }

    /// Splits at the midpoint; the halves share the midpoint endpoint.
    pub fn split(self) -> Result<(Interval, Interval)> {
        let m = self.mid();
        if !(self.lo < m && m < self.hi) {
            return Err(Error::DegenerateInterval { lo: self.lo, hi: self.hi });
        }
        Ok((Interval::from_raw(self.lo, m), Interval::from_raw(m, self.hi)))
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::from_raw(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::from_raw(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let (a, b, c, d) = (self.lo, self.hi, rhs.lo, rhs.hi);
        if a >= 0.0 && c >= 0.0 {
            return Interval::from_raw(mul_down(a, c), mul_up(b, d));
        }
        let lo = min4(mul_down(a, c), mul_down(a, d), mul_down(b, c), mul_down(b, d));
        let hi = max4(mul_up(a, c), mul_up(a, d), mul_up(b, c), mul_up(b, d));
        Interval::from_raw(lo, hi)
    }
}
