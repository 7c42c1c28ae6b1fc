//! Two-sided certified bounds on the fibre exponent `λ_F` and the base exponent `λ_u`.
//!
//! Both exponents are maximal ergodic averages, of `F(x) = log ∂_s φ(x, q(Tx))`
//! and of `log T'` respectively.
//!
//! * Lower bounds: Birkhoff averages along periodic orbits, using lower bounds
//!   on `q` (`∂_s φ` increases with `s`).
//! * Upper bounds: the sup-inf formula
//!   `max_j inf_{k ≤ k_max(j)} sup (1/k) Σ_{i<k} f(T^i I_j)` over a dyadic
//!   cover `(I_j)` of the circle, refined where the bound is worst.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{is_full_circle, CircleMap};
use crate::error::{Error, Result};
use crate::extinction::{lower_bound_q_on_orbit, KCertificate};
use crate::genfun::GenFamily;
use crate::interval::{add_down, add_up, div_down, div_up, Interval};
use crate::orbits::{find_periodic_orbits, PeriodicOrbit};

/// Deepest dyadic level representable exactly in binary64 cell endpoints.
pub const MAX_CELL_DEPTH: u32 = 52;

/// Default number of `φ_K` compositions used for the upper bound on `q`.
pub const DEFAULT_N_Q_UPPER: usize = 60;

/// Default number of cyclic compositions used for the lower bound on `q` along orbits.
pub const DEFAULT_N_Q_LOWER: usize = 60;

/// Length of the Birkhoff window used for a cell of depth `N`.
///
/// Any window gives a valid bound; longer windows amortize transients better
/// but only help while the images `T^i I` stay small.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Window {
    /// `⌊N/2⌋ + 1`.
    #[default]
    #[serde(rename = "half-depth")]
    HalfDepth,
    /// `max(N, 1)`.
    #[serde(rename = "depth")]
    Depth,
}

impl Window {
    pub fn len(self, depth: u32) -> usize {
        match self {
            Window::HalfDepth => (depth / 2 + 1) as usize,
            Window::Depth => depth.max(1) as usize,
        }
    }
}

/// A dyadic cell `[i/2^N, (i+1)/2^N]` of the refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub interval: Interval,
    pub depth: u32,
    pub is_new: bool,
    /// Upper bound on `inf_{k ≤ k_max} (1/k) Σ f(T^i x)` over the cell, once computed.
    pub bound: f64,
}

impl Cell {
    fn root() -> Self {
        Self {
            interval: Interval::UNIT,
            depth: 0,
            is_new: true,
            bound: f64::INFINITY,
        }
    }

    /// `⌊N/2⌋ + 1`: keeps the images `T^i I` small for `i < k_max`.
    pub fn k_max(&self) -> usize {
        Window::HalfDepth.len(self.depth)
    }

    fn children(&self) -> Result<[Cell; 2]> {
        let (a, b) = self.interval.split()?;
        let child = |interval| Cell {
            interval,
            depth: self.depth + 1,
            is_new: true,
            bound: f64::INFINITY,
        };
        Ok([child(a), child(b)])
    }
}

/// Certified enclosures of both exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentBounds {
    pub lambda_f_lo: f64,
    pub lambda_f_hi: f64,
    pub lambda_u_lo: f64,
    pub lambda_u_hi: f64,
    pub k_used: f64,
    pub m_orbits: u32,
    pub n_iterations: u32,
}

/// Certified enclosure of `|λ_F| / λ_u`, given `λ_F < 0 < λ_u`.
pub fn ratio_bounds(b: &ExponentBounds) -> Result<(f64, f64)> {
    if !(b.lambda_f_hi < 0.0) {
        return Err(Error::NotCertifiedNegative { lambda_f_hi: b.lambda_f_hi });
    }
    if !(b.lambda_u_lo > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "base exponent lower bound must be positive, got {}",
            b.lambda_u_lo
        )));
    }
    let lo = div_down(-b.lambda_f_hi, b.lambda_u_hi);
    let hi = div_up(-b.lambda_f_lo, b.lambda_u_lo);
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// Lower bounds along periodic orbits.

/// Best orbit average found and the orbits that had to be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitBound {
    /// `-∞` when no orbit produced a finite average.
    pub value: f64,
    pub period: u32,
    pub branch: u64,
    pub skipped: Vec<(u32, u64, Error)>,
}

fn best_orbit_average<F>(orbits: &[PeriodicOrbit], average: F) -> OrbitBound
where
    F: Fn(&PeriodicOrbit) -> Result<f64> + Sync,
{
    let results: Vec<(u32, u64, Result<f64>)> = orbits
        .par_iter()
        .map(|o| (o.period(), o.branch(), average(o)))
        .collect();
    let mut best = OrbitBound {
        value: f64::NEG_INFINITY,
        period: 0,
        branch: 0,
        skipped: Vec::new(),
    };
    for (period, branch, r) in results {
        match r {
            Ok(v) if v > best.value => {
                best.value = v;
                best.period = period;
                best.branch = branch;
            }
            Ok(_) => {}
            Err(e) => best.skipped.push((period, branch, e)),
        }
    }
    best
}

/// Sum of lower endpoints rounded down, divided by the count rounded down.
fn mean_down(terms: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = terms.fold((0.0, 0u32), |(s, n), t| (add_down(s, t), n + 1));
    if sum >= 0.0 {
        div_down(sum, f64::from(n))
    } else {
        -div_up(-sum, f64::from(n))
    }
}

/// Sum of upper endpoints rounded up, divided by the count rounded up.
fn mean_up(sum: f64, n: usize) -> f64 {
    let n = n as f64;
    if sum >= 0.0 {
        div_up(sum, n)
    } else {
        -div_down(-sum, n)
    }
}

/// `(1/m) Σ inf log ∂_s φ(I_i, q_lb[i])` for one orbit.
pub fn orbit_fibre_average(fam: &dyn GenFamily, orbit: &PeriodicOrbit, n_q: usize) -> Result<f64> {
    let lb = lower_bound_q_on_orbit(fam, orbit, n_q)?;
    let terms = orbit
        .cells()
        .iter()
        .zip(&lb.q_lb)
        .map(|(&cell, &q)| fam.log_phi_ds(cell, Interval::point(q)).map(|v| v.lo()))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_down(terms.into_iter()))
}

/// `(1/m) Σ inf log T'(I_i)` for one orbit.
pub fn orbit_base_average(map: &CircleMap, orbit: &PeriodicOrbit) -> Result<f64> {
    let terms = orbit
        .cells()
        .iter()
        .map(|&cell| Ok(map.deriv_interval(cell)?.ln()?.lo()))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_down(terms.into_iter()))
}

pub fn lower_bound_lambda_f_on_orbits(fam: &dyn GenFamily, orbits: &[PeriodicOrbit], n_q: usize) -> OrbitBound {
    best_orbit_average(orbits, |o| orbit_fibre_average(fam, o, n_q))
}

pub fn lower_bound_lambda_u_on_orbits(map: &CircleMap, orbits: &[PeriodicOrbit]) -> OrbitBound {
    best_orbit_average(orbits, |o| orbit_base_average(map, o))
}

/// Lower bound on `λ_F` from all primitive orbits of period at most `max_period`.
pub fn lower_bound_lambda_f(
    fam: &dyn GenFamily,
    map: &CircleMap,
    max_period: u32,
    eps: f64,
    n_q: usize,
) -> Result<f64> {
    let orbits = find_periodic_orbits(map, max_period, eps)?;
    Ok(lower_bound_lambda_f_on_orbits(fam, &orbits, n_q).value)
}

/// Lower bound on `λ_u` from all primitive orbits of period at most `max_period`.
pub fn lower_bound_lambda_u(map: &CircleMap, max_period: u32, eps: f64) -> Result<f64> {
    let orbits = find_periodic_orbits(map, max_period, eps)?;
    Ok(lower_bound_lambda_u_on_orbits(map, &orbits).value)
}

// ---------------------------------------------------------------------------
// Upper bounds by adaptive refinement.

/// Observable whose maximal ergodic average is bounded by [`refine`].
pub trait CellObservable: Sync {
    /// Upper bounds on `sup f(T^i I)` for `i < count`.
    fn sup_terms(&self, cell: Interval, count: usize) -> Result<Vec<f64>>;
}

/// `log T'`.
pub struct BaseObservable<'a> {
    pub map: &'a CircleMap,
}

impl CellObservable for BaseObservable<'_> {
    fn sup_terms(&self, cell: Interval, count: usize) -> Result<Vec<f64>> {
        self.map
            .forward_chain(cell, count)?
            .into_iter()
            .map(|x| Ok(self.map.deriv_interval(x)?.ln()?.hi()))
            .collect()
    }
}

/// `F(x) = log ∂_s φ(x, q(Tx))`, with `q` bounded above by `φ_K^{(n)}(·, K)`.
pub struct FibreObservable<'a> {
    fam: &'a dyn GenFamily,
    map: &'a CircleMap,
    k: f64,
    n_q: usize,
    /// `saturated[t] = φ_K^{(t)}([0, 1], K)`, the value of a `t`-step
    /// truncated composition once the chain covers the whole circle.
    saturated: Vec<Interval>,
}

impl<'a> FibreObservable<'a> {
    pub fn new(fam: &'a dyn GenFamily, map: &'a CircleMap, k: f64, n_q: usize) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::InvalidArgument(format!("K must lie in (0, 1), got {k}")));
        }
        let cap = Interval::point(k);
        let longest = n_q + MAX_CELL_DEPTH as usize + 2;
        let mut saturated = Vec::with_capacity(longest + 1);
        saturated.push(cap);
        for t in 0..longest {
            let next = fam.phi(Interval::UNIT, saturated[t])?.min_iv(cap);
            saturated.push(next);
        }
        Ok(Self {
            fam,
            map,
            k,
            n_q,
            saturated,
        })
    }
}

impl CellObservable for FibreObservable<'_> {
    fn sup_terms(&self, cell: Interval, count: usize) -> Result<Vec<f64>> {
        let cap = Interval::point(self.k);
        // Truncated compositions run from level `deepest` (value K) back to level 1;
        // s[l] bounds q on T^l I from above.
        let deepest = count + self.n_q;
        if deepest >= self.saturated.len() {
            return Err(Error::InvalidArgument(format!("Birkhoff window {count} is too long")));
        }
        let mut chain = Vec::with_capacity(count + 1);
        chain.push(cell);
        let mut full_from = None;
        for level in 1..=deepest {
            let last = chain[level - 1];
            if is_full_circle(last) {
                full_from.get_or_insert(level - 1);
                if level > count {
                    break;
                }
            }
            chain.push(self.map.map_interval(last)?);
        }
        let full_from = full_from
            .or_else(|| chain.iter().position(|&x| is_full_circle(x)))
            .unwrap_or(deepest)
            .min(deepest);

        // From `full_from` on, every level is the whole circle.
        let mut s = vec![cap; count + 1];
        let mut cur = self.saturated[deepest - full_from];
        for level in (full_from..=count).skip_while(|&l| l == 0) {
            s[level] = self.saturated[deepest - level];
        }
        for level in (1..full_from).rev() {
            cur = self.fam.phi(chain[level], cur)?.min_iv(cap);
            if level <= count {
                s[level] = cur;
            }
        }

        (0..count)
            .map(|i| Ok(self.fam.log_phi_ds(chain[i], s[i + 1])?.hi()))
            .collect()
    }
}

/// `inf_{k ≤ k_max} (1/k) Σ_{i<k} terms[i]`, rounded up.
fn truncated_birkhoff_bound(terms: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut best = f64::INFINITY;
    for (k, &t) in terms.iter().enumerate() {
        sum = add_up(sum, t);
        best = best.min(mean_up(sum, k + 1));
    }
    best
}

/// Per-cell bound of the refinement.
pub fn cell_bound(obs: &dyn CellObservable, cell: &Cell, window: Window) -> Result<f64> {
    let terms = obs.sup_terms(cell.interval, window.len(cell.depth))?;
    Ok(truncated_birkhoff_bound(&terms))
}

/// Final state of a refinement run.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub bound: f64,
    pub cells: Vec<Cell>,
    pub iterations: u32,
}

fn worst_first(a: &Cell, b: &Cell) -> Ordering {
    b.bound
        .total_cmp(&a.bound)
        .then_with(|| a.interval.lo().total_cmp(&b.interval.lo()))
}

fn compute_new(obs: &dyn CellObservable, cells: &mut [Cell], window: Window) -> Result<()> {
    cells
        .par_iter_mut()
        .filter(|c| c.is_new)
        .try_for_each(|c| {
            c.bound = cell_bound(obs, c, window)?;
            c.is_new = false;
            Ok(())
        })
}

/// Adaptive refinement of the sup-inf upper bound.
///
/// Starting from `[0, 1]`, each round splits the `⌈δ·count⌉` cells with the
/// worst bound (ties: smaller left endpoint first) and bounds the new halves.
/// Cells at [`MAX_CELL_DEPTH`] are never split; if every selected cell is at
/// that depth the run stops with [`Error::DepthOverflow`], which carries the
/// (still valid) bound reached so far.
pub fn refine(obs: &dyn CellObservable, delta: f64, n_iteration: u32, window: Window) -> Result<Refinement> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut cells = vec![Cell::root()];
    compute_new(obs, &mut cells, window)?;

    for _ in 0..n_iteration {
        let count = cells.len();
        let take = ((delta * count as f64).ceil() as usize).clamp(1, count);
        if take < count {
            cells.select_nth_unstable_by(take - 1, worst_first);
        }
        let mut split_any = false;
        let mut fresh = Vec::with_capacity(take);
        for c in cells.iter_mut().take(take) {
            if c.depth >= MAX_CELL_DEPTH {
                continue;
            }
            let [a, b] = c.children()?;
            *c = a;
            fresh.push(b);
            split_any = true;
        }
        if !split_any {
            let bound = max_bound(&cells);
            return Err(Error::DepthOverflow { bound });
        }
        cells.extend(fresh);
        compute_new(obs, &mut cells, window)?;
    }

    Ok(Refinement {
        bound: max_bound(&cells),
        cells,
        iterations: n_iteration,
    })
}

fn max_bound(cells: &[Cell]) -> f64 {
    cells.iter().map(|c| c.bound).fold(f64::NEG_INFINITY, f64::max)
}

/// Upper bound on `λ_F` by adaptive refinement, given a certified `K`.
pub fn upper_bound_lambda_f(
    fam: &dyn GenFamily,
    map: &CircleMap,
    k: &KCertificate,
    delta: f64,
    n_iteration: u32,
    n_q_upper: usize,
) -> Result<f64> {
    if !k.certified {
        return Err(Error::InvalidArgument("upper bound on λ_F needs a certified K".into()));
    }
    let obs = FibreObservable::new(fam, map, k.k, n_q_upper)?;
    Ok(refine(&obs, delta, n_iteration, Window::HalfDepth)?.bound)
}

/// Upper bound on `λ_u` by adaptive refinement.
pub fn upper_bound_lambda_u(map: &CircleMap, delta: f64, n_iteration: u32) -> Result<f64> {
    let obs = BaseObservable { map };
    Ok(refine(&obs, delta, n_iteration, Window::HalfDepth)?.bound)
}
