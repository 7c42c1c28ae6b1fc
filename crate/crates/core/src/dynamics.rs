//! Expanding circle maps described by their lifts.
//!
//! All dynamics run in lift coordinates. Reduction modulo one is left to the
//! 1-periodic observables (see [`Interval::cos_tau`]), so interval images
//! never need wraparound case analysis.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Number of cells in the cover of `[0, 1]` used to certify the expansion constant.
const EXPANSION_COVER_CELLS: u32 = 1 << 10;

/// Lift of an orientation-preserving expanding map of ℝ/ℤ.
///
/// Implementors promise `lift(0) = 0`, `lift(x + 1) = lift(x) + degree` and
/// `deriv > 1` everywhere; [`CircleMap::new`] checks all three on a grid.
pub trait Lift: Send + Sync {
    fn degree(&self) -> u32;

    /// Enclosure of the lift over `x`.
    fn lift(&self, x: Interval) -> Interval;

    /// Plain floating-point evaluation, used to drive bisection.
    fn lift_point(&self, x: f64) -> f64;

    /// Enclosure of the derivative over `x`.
    fn deriv(&self, x: Interval) -> Interval;

    /// Declared differentiability class; `None` means smooth.
    fn smoothness(&self) -> Option<u32> {
        Some(1)
    }

    fn describe(&self) -> String;
}

/// A validated expanding circle map with a certified expansion constant.
#[derive(Clone)]
pub struct CircleMap {
    lift: Arc<dyn Lift>,
    kappa: f64,
}

impl fmt::Debug for CircleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleMap")
            .field("lift", &self.lift.describe())
            .field("kappa", &self.kappa)
            .finish()
    }
}

impl CircleMap {
    pub fn new(lift: impl Lift + 'static) -> Result<Self> {
        let lift: Arc<dyn Lift> = Arc::new(lift);
        let d = lift.degree();
        if d < 2 {
            return Err(Error::InvalidMap(format!("degree must be at least 2, got {d}")));
        }
        if !lift.lift(Interval::ZERO).contains(0.0) {
            return Err(Error::InvalidMap("lift does not fix 0".into()));
        }

        let mut kappa = f64::INFINITY;
        let n = EXPANSION_COVER_CELLS;
        for i in 0..n {
            let cell = Interval::new(f64::from(i) / f64::from(n), f64::from(i + 1) / f64::from(n))?;
            kappa = kappa.min(lift.deriv(cell).lo());

            let x = cell.lo();
            let step = lift.lift(Interval::point(x + 1.0)) - lift.lift(Interval::point(x));
            // Non-rigorous sampling check of the degree relation.
            if (step.mid() - f64::from(d)).abs() > 1e-9 * f64::from(d) {
                return Err(Error::InvalidMap(format!(
                    "lift(x + 1) - lift(x) = {step:?} at x = {x}, expected {d}"
                )));
            }
        }
        if kappa <= 1.0 {
            return Err(Error::InvalidMap(format!(
                "map is not uniformly expanding (derivative lower bound {kappa})"
            )));
        }
        Ok(Self { lift, kappa })
    }

    /// `T(x) = N x + ε sin(2πx) mod 1`.
    pub fn sinusoidal(n: u32, eps: f64) -> Result<Self> {
        CircleMap::new(SinusoidalMap::new(n, eps)?)
    }

    /// `T(x) = N x mod 1`.
    pub fn linear(n: u32) -> Result<Self> {
        CircleMap::sinusoidal(n, 0.0)
    }

    pub fn degree(&self) -> u32 {
        self.lift.degree()
    }

    /// Certified lower bound on `T'` over the whole circle.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn smoothness(&self) -> Option<u32> {
        self.lift.smoothness()
    }

    pub fn describe(&self) -> String {
        self.lift.describe()
    }

    /// Plain floating-point lift, no rounding control.
    pub fn lift_point(&self, x: f64) -> f64 {
        self.lift.lift_point(x)
    }

    /// Enclosure of `T̃(I)` without the full-circle clamp.
    pub fn lift_interval(&self, x: Interval) -> Interval {
        self.lift.lift(x)
    }

    /// `k`-fold lift of `x`, without clamping.
    pub fn iterate_lift(&self, x: Interval, k: u32) -> Interval {
        (0..k).fold(x, |acc, _| self.lift.lift(acc))
    }

    /// Image of `x` under the lift.
    ///
    /// The lift is increasing, so the image is spanned by the images of the
    /// endpoints. An image of width one or more is replaced by the full-circle
    /// marker `[n, n + 1]`.
    pub fn map_interval(&self, x: Interval) -> Result<Interval> {
        let w = x.width();
        if w > 1.0 {
            return Err(Error::WidthOverflow { width: w });
        }
        let lo = self.lift.lift(Interval::point(x.lo())).lo();
        let hi = self.lift.lift(Interval::point(x.hi())).hi();
        if hi - lo >= 1.0 {
            let n = lo.floor();
            return Interval::new(n, n + 1.0);
        }
        Interval::new(lo, hi)
    }

    /// Enclosure of `T'` over `x`, never below the certified expansion constant.
    pub fn deriv_interval(&self, x: Interval) -> Result<Interval> {
        let w = x.width();
        if w > 1.0 {
            return Err(Error::WidthOverflow { width: w });
        }
        let d = self.lift.deriv(x);
        Ok(Interval::from_raw(d.lo().max(self.kappa), d.hi().max(self.kappa)))
    }

    /// The chain `I, T I, …, T^{len-1} I`.
    pub fn forward_chain(&self, x: Interval, len: usize) -> Result<Vec<Interval>> {
        let mut chain = Vec::with_capacity(len);
        let mut cur = x;
        for i in 0..len {
            if i > 0 {
                cur = self.map_interval(cur)?;
            }
            chain.push(cur);
        }
        Ok(chain)
    }
}

/// Whether `x` is the full-circle marker produced by [`CircleMap::map_interval`].
pub fn is_full_circle(x: Interval) -> bool {
    x.hi() - x.lo() >= 1.0
}

/// `x ↦ N x + ε sin(2πx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalMap {
    n: u32,
    eps: f64,
}

impl SinusoidalMap {
    pub fn new(n: u32, eps: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMap(format!("N must be at least 2, got {n}")));
        }
        let limit = f64::from(n - 1) / (2.0 * std::f64::consts::PI);
        if !eps.is_finite() || eps.abs() >= limit {
            return Err(Error::InvalidMap(format!(
                "|eps| must be below (N-1)/(2π) = {limit}, got {eps}"
            )));
        }
        Ok(Self { n, eps })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl Lift for SinusoidalMap {
    fn degree(&self) -> u32 {
        self.n
    }

    fn lift(&self, x: Interval) -> Interval {
        let linear = Interval::point(f64::from(self.n)) * x;
        if self.eps == 0.0 {
            linear
        } else {
            linear + Interval::point(self.eps) * x.sin_tau()
        }
    }

    fn lift_point(&self, x: f64) -> f64 {
        f64::from(self.n) * x + self.eps * (std::f64::consts::TAU * x).sin()
    }

    fn deriv(&self, x: Interval) -> Interval {
        let n = Interval::point(f64::from(self.n));
        if self.eps == 0.0 {
            n
        } else {
            n + Interval::point(self.eps) * Interval::TAU * x.cos_tau()
        }
    }

    fn smoothness(&self) -> Option<u32> {
        None
    }

    fn describe(&self) -> String {
        format!("sinusoidal(N={}, eps={})", self.n, self.eps)
    }
}
