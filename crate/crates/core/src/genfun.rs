//! Probability generating functions of environment-dependent reproduction laws.

use std::fmt;

use rand::RngCore;
use rand_distr::{Distribution, Poisson};

use crate::dynamics::CircleMap;
use crate::error::{Error, Result};
use crate::interval::Interval;

/// `s ↦ φ(x, s)` for a fixed environment cell.
pub type Law<'a> = Box<dyn Fn(Interval) -> Result<Interval> + Send + Sync + 'a>;

/// Interval-valued generating function `φ(x, s) = Σ μ_x(k) s^k` of a
/// reproduction law indexed by the environment `x ∈ ℝ/ℤ`.
///
/// `φ` must be analytic, increasing and convex in `s` with `φ(x, 1) = 1`;
/// [`check_family`] samples the monotonicity and range conditions but
/// analyticity is taken on trust.
pub trait GenFamily: Send + Sync {
    fn phi(&self, x: Interval, s: Interval) -> Result<Interval>;

    /// `φ(x, ·)` with the `x`-dependent part evaluated once, for repeated use.
    fn law(&self, x: Interval) -> Result<Law<'_>> {
        Ok(Box::new(move |s| self.phi(x, s)))
    }

    /// `∂_s φ(x, s)`.
    fn phi_ds(&self, x: Interval, s: Interval) -> Result<Interval>;

    /// `log ∂_s φ(x, s)`; families with a closed form should override this.
    fn log_phi_ds(&self, x: Interval, s: Interval) -> Result<Interval> {
        self.phi_ds(x, s)?.ln()
    }

    /// Mean offspring number `m(x) = ∂_s φ(x, 1)`.
    fn mean(&self, x: Interval) -> Result<Interval>;

    /// Draws the total offspring of `parents` individuals living in environment `x`.
    fn sample_offspring(&self, _x: f64, _parents: u64, _rng: &mut dyn RngCore) -> Option<u64> {
        None
    }

    /// True when `μ_x(0) > 0` for every `x`, which makes `q` positive.
    fn positive_at_zero(&self) -> bool {
        false
    }

    /// Declared differentiability class in `(x, s)`; `None` means smooth.
    fn smoothness(&self) -> Option<u32> {
        Some(1)
    }

    fn describe(&self) -> String;
}

impl fmt::Debug for dyn GenFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Poisson law with mean `m(x) = exp(λ + cos(2π(x + ω)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonCosFamily {
    lambda: f64,
    omega: f64,
}

impl PoissonCosFamily {
    pub fn new(lambda: f64, omega: f64) -> Result<Self> {
        if !lambda.is_finite() || !(0.0..1.0).contains(&omega) {
            return Err(Error::InvalidFamily(format!(
                "need finite lambda and omega in [0, 1), got lambda={lambda}, omega={omega}"
            )));
        }
        Ok(Self { lambda, omega })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn log_mean(&self, x: Interval) -> Interval {
        Interval::point(self.lambda) + (x + Interval::point(self.omega)).cos_tau()
    }

    fn log_mean_point(&self, x: f64) -> f64 {
        self.lambda + (std::f64::consts::TAU * (x + self.omega)).cos()
    }
}

impl GenFamily for PoissonCosFamily {
    fn phi(&self, x: Interval, s: Interval) -> Result<Interval> {
        poisson_phi(self.mean(x)?, s)
    }

    fn law(&self, x: Interval) -> Result<Law<'_>> {
        let mean = self.mean(x)?;
        Ok(Box::new(move |s| poisson_phi(mean, s)))
    }

    fn phi_ds(&self, x: Interval, s: Interval) -> Result<Interval> {
        self.log_phi_ds(x, s)?.exp()
    }

    fn log_phi_ds(&self, x: Interval, s: Interval) -> Result<Interval> {
        poisson_log_phi_ds(self.log_mean(x), s)
    }

    fn mean(&self, x: Interval) -> Result<Interval> {
        self.log_mean(x).exp()
    }

    fn sample_offspring(&self, x: f64, parents: u64, rng: &mut dyn RngCore) -> Option<u64> {
        Some(sample_poisson(self.log_mean_point(x).exp(), parents, rng))
    }

    fn positive_at_zero(&self) -> bool {
        true
    }

    fn smoothness(&self) -> Option<u32> {
        None
    }

    fn describe(&self) -> String {
        format!("poisson-cos(lambda={}, omega={})", self.lambda, self.omega)
    }
}

/// Environment-independent Poisson law with mean `c` (the classical Galton-Watson process).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPoissonFamily {
    c: f64,
    log_c: Interval,
}

impl ConstantPoissonFamily {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) || c == 1.0 {
            return Err(Error::InvalidFamily(format!("need c > 0 and c != 1, got {c}")));
        }
        Ok(Self {
            c,
            log_c: Interval::point(c).ln()?,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl GenFamily for ConstantPoissonFamily {
    fn phi(&self, _x: Interval, s: Interval) -> Result<Interval> {
        poisson_phi(Interval::point(self.c), s)
    }

    fn phi_ds(&self, x: Interval, s: Interval) -> Result<Interval> {
        self.log_phi_ds(x, s)?.exp()
    }

    fn log_phi_ds(&self, _x: Interval, s: Interval) -> Result<Interval> {
        poisson_log_phi_ds(self.log_c, s)
    }

    fn mean(&self, _x: Interval) -> Result<Interval> {
        Ok(Interval::point(self.c))
    }

    fn sample_offspring(&self, _x: f64, parents: u64, rng: &mut dyn RngCore) -> Option<u64> {
        Some(sample_poisson(self.c, parents, rng))
    }

    fn positive_at_zero(&self) -> bool {
        true
    }

    fn smoothness(&self) -> Option<u32> {
        None
    }

    fn describe(&self) -> String {
        format!("constant-poisson(c={})", self.c)
    }
}

/// `exp(m (s - 1))`.
fn poisson_phi(mean: Interval, s: Interval) -> Result<Interval> {
    (mean * (s - Interval::ONE)).exp()
}

/// `log ∂_s φ = L + e^L (s - 1)` for a Poisson law with log-mean `L`.
///
/// As a function of the mean `m = e^L` this is `log m + m (s - 1)`, concave
/// with its maximum at `m = 1/(1 - s)`, and it increases with `s`. The range is
/// therefore attained at the endpoints or at that critical point, which keeps
/// the enclosure tight even when `L` is wide.
fn poisson_log_phi_ds(log_mean: Interval, s: Interval) -> Result<Interval> {
    let at = |l: f64, s: f64| -> Result<Interval> {
        let l = Interval::point(l);
        Ok(l + l.exp()? * (Interval::point(s) - Interval::ONE))
    };
    let (l_lo, l_hi) = (log_mean.lo(), log_mean.hi());

    let inf = at(l_lo, s.lo())?.lo().min(at(l_hi, s.lo())?.lo());

    let mut sup = at(l_lo, s.hi())?.hi().max(at(l_hi, s.hi())?.hi());
    if s.hi() < 1.0 {
        let one_minus_s = Interval::ONE - Interval::point(s.hi());
        let crit_mean = Interval::ONE.div(one_minus_s)?;
        let mean = log_mean.exp()?;
        if crit_mean.hi() >= mean.lo() && crit_mean.lo() <= mean.hi() {
            let peak = -one_minus_s.ln()? - Interval::ONE;
            sup = sup.max(peak.hi());
        }
    }
    Interval::new(inf, sup)
}

fn sample_poisson(mean: f64, parents: u64, rng: &mut dyn RngCore) -> u64 {
    let total = mean * parents as f64;
    if total <= 0.0 {
        return 0;
    }
    // The sum of independent Poisson variables is Poisson with the summed mean.
    let dist = Poisson::new(total).expect("positive finite Poisson mean");
    let draw: f64 = dist.sample(rng);
    draw as u64
}

/// `φ^{(n)}(I, s)`: encloses `φ(x, φ(Tx, … φ(T^{n-1}x, σ)…))` for all `x ∈ I`, `σ ∈ s`.
pub fn phi_iter(
    fam: &dyn GenFamily,
    map: &CircleMap,
    cell: Interval,
    s: Interval,
    n: usize,
) -> Result<Interval> {
    let chain = map.forward_chain(cell, n)?;
    chain.iter().rev().try_fold(s, |acc, &x| fam.phi(x, acc))
}

/// `φ_K^{(n)}(I, K)` with `φ_K = min(φ, K)`.
///
/// Its upper endpoint is non-increasing in `n` and bounds `q` on `I` from above
/// whenever `K ≥ sup q`.
pub fn phi_iter_truncated(
    fam: &dyn GenFamily,
    map: &CircleMap,
    cell: Interval,
    k: f64,
    n: usize,
) -> Result<Interval> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::InvalidArgument(format!("truncation level must lie in (0, 1), got {k}")));
    }
    let cap = Interval::point(k);
    let chain = map.forward_chain(cell, n)?;
    chain
        .iter()
        .rev()
        .try_fold(cap, |acc, &x| Ok(fam.phi(x, acc)?.min_iv(cap)))
}

/// `log ∂_s φ(I, q_next)`: one term of a Birkhoff sum of `F(x) = log ∂_s φ(x, q(Tx))`.
pub fn log_deriv_term(fam: &dyn GenFamily, cell: Interval, q_next: Interval) -> Result<Interval> {
    if q_next.lo() < 0.0 || q_next.hi() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "q_next must lie in [0, 1), got {q_next:?}"
        )));
    }
    fam.log_phi_ds(cell, q_next)
}

/// Sampled sanity check of the generating-function contract.
pub fn check_family(fam: &dyn GenFamily) -> Result<()> {
    const XS: u32 = 64;
    const SS: u32 = 16;
    for i in 0..XS {
        let x = Interval::point(f64::from(i) / f64::from(XS));
        let at_one = fam.phi(x, Interval::ONE)?;
        if !at_one.contains(1.0) {
            return Err(Error::InvalidFamily(format!("phi({x:?}, 1) = {at_one:?} does not contain 1")));
        }
        let mut prev = fam.phi(x, Interval::ZERO)?;
        for j in 1..=SS {
            let s = Interval::point(f64::from(j) / f64::from(SS));
            let cur = fam.phi(x, s)?;
            if cur.lo() < 0.0 || cur.hi() > 1.0 + 1e-12 {
                return Err(Error::InvalidFamily(format!("phi({x:?}, {s:?}) = {cur:?} leaves [0, 1]")));
            }
            if prev.lo() > cur.hi() {
                return Err(Error::InvalidFamily(format!("phi is not increasing in s at {x:?}")));
            }
            if fam.phi_ds(x, s)?.hi() < 0.0 {
                return Err(Error::InvalidFamily(format!("negative derivative at {x:?}")));
            }
            prev = cur;
        }
    }
    Ok(())
}
