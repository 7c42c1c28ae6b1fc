//! Enumeration of primitive periodic orbits of an expanding circle map.
//!
//! For a degree-`d` lift with `T̃(0) = 0`, the period-`k` points are the unique
//! solutions `x_j ∈ [0, 1)` of `T̃^k(x) - x = j`, `0 ≤ j ≤ d^k - 2`. The branch
//! index carries all the combinatorics:
//!
//! * `T(x_j) = x_{d·j mod (d^k - 1)}`, so orbits are cycles of `j ↦ d·j`;
//! * `x_j` has period dividing `m | k` exactly when `j = i·(d^k - 1)/(d^m - 1)`
//!   for some period-`m` branch `i`.
//!
//! Each point is located by bisection and its bracket certified with interval
//! arithmetic; primitivity is additionally confirmed by an interval divisor test.

use rayon::prelude::*;

use crate::dynamics::CircleMap;
use crate::error::{Error, Result};
use crate::interval::Interval;

/// Refuse enumerations with more than this many candidate points per period.
const MAX_POINTS_PER_PERIOD: u64 = 1 << 26;

/// Shrinks of ε tried before a primitivity test is declared undecided.
const PRIMITIVITY_RETRIES: u32 = 8;

/// One primitive periodic orbit, as enclosing cells of its points.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    period: u32,
    branch: u64,
    cells: Vec<Interval>,
}

impl PeriodicOrbit {
    pub fn period(&self) -> u32 {
        self.period
    }

    /// Branch index `j` of the representative: `T̃^k(x) - x = j`.
    pub fn branch(&self) -> u64 {
        self.branch
    }

    /// `cells[i]` encloses `T^i(x)`.
    pub fn cells(&self) -> &[Interval] {
        &self.cells
    }
}

/// Cells rotated by one, so that entry `i` encloses `T^{i+1}(x)`.
pub fn orbit_image_cells(orbit: &PeriodicOrbit) -> Vec<Interval> {
    let mut cells = orbit.cells.clone();
    cells.rotate_left(1);
    cells
}

/// One representative per primitive orbit of period `1..=max_period`, each
/// point enclosed in a cell of width at most `2ε`. Ordered by `(period, branch)`.
pub fn find_periodic_orbits(map: &CircleMap, max_period: u32, eps: f64) -> Result<Vec<PeriodicOrbit>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let mut orbits = Vec::new();
    for k in 1..=max_period {
        orbits.extend(orbits_of_period(map, k, eps)?);
    }
    Ok(orbits)
}

fn point_count(d: u64, k: u32) -> Result<u64> {
    d.checked_pow(k)
        .map(|p| p - 1)
        .filter(|&n| n <= MAX_POINTS_PER_PERIOD)
        .ok_or_else(|| Error::InvalidArgument(format!("too many periodic points of period {k}")))
}

fn proper_divisors(k: u32) -> impl Iterator<Item = u32> {
    (1..k).filter(move |m| k % m == 0)
}

/// True when branch `j` of period `k` is a point of some smaller period.
fn is_non_primitive(d: u64, k: u32, j: u64) -> bool {
    let total = d.pow(k) - 1;
    proper_divisors(k).any(|m| {
        let stride = total / (d.pow(m) - 1);
        j % stride == 0
    })
}

/// Branch indices of the orbit starting at `j`.
fn orbit_indices(d: u64, k: u32, j: u64) -> Vec<u64> {
    let modulus = d.pow(k) - 1;
    let mut out = Vec::with_capacity(k as usize);
    let mut cur = j;
    for _ in 0..k {
        out.push(cur);
        cur = ((u128::from(cur) * u128::from(d)) % u128::from(modulus)) as u64;
    }
    out
}

fn orbits_of_period(map: &CircleMap, k: u32, eps: f64) -> Result<Vec<PeriodicOrbit>> {
    let d = u64::from(map.degree());
    let count = point_count(d, k)?;

    // Representatives: primitive branches that are the smallest index of their cycle.
    let reps: Vec<Vec<u64>> = (0..count)
        .into_par_iter()
        .filter(|&j| !is_non_primitive(d, k, j))
        .map(|j| orbit_indices(d, k, j))
        .filter(|idx| idx.iter().all(|&i| i >= idx[0]))
        .collect();

    reps.into_par_iter()
        .map(|indices| {
            let cells = indices
                .iter()
                .map(|&j| certified_point(map, k, j, eps))
                .collect::<Result<Vec<_>>>()?;
            Ok(PeriodicOrbit {
                period: k,
                branch: indices[0],
                cells,
            })
        })
        .collect()
}

/// Bracket of width at most `2ε` around `x_j`, certified and checked primitive.
fn certified_point(map: &CircleMap, k: u32, j: u64, eps: f64) -> Result<Interval> {
    let mut e = eps;
    for _ in 0..=PRIMITIVITY_RETRIES {
        let cell = locate_point(map, k, j, e)?;
        if primitivity_confirmed(map, k, cell) {
            return Ok(cell);
        }
        e /= 4.0;
    }
    Err(Error::PrimitivityUndecided { period: k, branch: j })
}

/// Interval divisor test: `T̃^m(I) - I` avoids every integer for each proper divisor `m`.
fn primitivity_confirmed(map: &CircleMap, k: u32, cell: Interval) -> bool {
    proper_divisors(k).all(|m| {
        let g = map.iterate_lift(cell, m) - cell;
        g.lo().ceil() > g.hi()
    })
}

fn g_point(map: &CircleMap, k: u32, j: f64, x: f64) -> f64 {
    let mut y = x;
    for _ in 0..k {
        y = map.lift_point(y);
    }
    y - x - j
}

/// Encloses `T̃^k(x) - x - j` at the point `x`.
fn g_interval(map: &CircleMap, k: u32, j: f64, x: f64) -> Interval {
    let p = Interval::point(x);
    map.iterate_lift(p, k) - p - Interval::point(j)
}

/// Locates the zero of `g_j(x) = T̃^k(x) - x - j` in `[0, 1)`.
///
/// The bracket is driven by plain floating-point evaluation and certified at
/// the end with interval arithmetic: `g_j(lo) ≤ 0 ≤ g_j(hi)` and `g_j` is
/// strictly increasing, so the zero lies in `[lo, hi]`.
fn locate_point(map: &CircleMap, k: u32, j: u64, eps: f64) -> Result<Interval> {
    if j == 0 {
        // T̃(0) = 0, so the zero of g_0 is exactly 0.
        return Ok(Interval::ZERO);
    }
    let jf = j as f64;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > eps {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::EpsilonTooSmall { period: k, branch: j, epsilon: eps });
        }
        if g_point(map, k, jf, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let certify = |lo: f64, hi: f64| g_interval(map, k, jf, lo).hi() <= 0.0 && g_interval(map, k, jf, hi).lo() >= 0.0;
    if certify(lo, hi) {
        return Interval::new(lo, hi);
    }
    let (wlo, whi) = (lo - 0.5 * eps, hi + 0.5 * eps);
    if certify(wlo, whi) {
        return Interval::new(wlo, whi);
    }
    Err(Error::EpsilonTooSmall { period: k, branch: j, epsilon: eps })
}
