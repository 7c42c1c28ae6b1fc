//! Certified two-sided bounds on the extinction probability `q`.
//!
//! Lower bounds come from `φ^{(n)}(·, 0) ↗ q`, evaluated cyclically along
//! periodic orbits. Upper bounds need a constant `K < 1` with `q ≤ K`
//! everywhere; such a `K` is certified by showing that every point `x` has
//! some `N_x` with `φ^{(N_x)}(x, K) ≤ K`, checked on an adaptive cover of the
//! circle. After that, `φ_K^{(n)}(I, K)` bounds `q` on any cell `I`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{is_full_circle, CircleMap};
use crate::error::{Error, Result};
use crate::genfun::{phi_iter, phi_iter_truncated, GenFamily};
use crate::interval::{add_up, mul_up, Interval};
use crate::orbits::PeriodicOrbit;

/// Cap on the worklist size in [`verify_upper_bound_k`]; beyond it the check gives up.
pub const MAX_K_CELLS: usize = 1_000_000;

/// Cells at this dyadic depth are re-checked but no longer split.
const MAX_SPLIT_DEPTH: u32 = 52;

/// Lower bounds on `q` along a periodic orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitQLower {
    pub orbit: PeriodicOrbit,
    /// `q_lb[i] ≤ q(T^{i+1} x)`.
    pub q_lb: Vec<f64>,
}

/// Outcome of an attempt to certify `sup q ≤ K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KCertificate {
    #[serde(rename = "K")]
    pub k: f64,
    pub certified: bool,
    /// Number of refinement rounds performed by the last check.
    pub refinement_depth: u32,
    /// Total number of cell checks over all attempts.
    pub cells_checked: u64,
    /// How many times the candidate was enlarged.
    pub retries: u32,
}

/// Lower bound on `q` at each point of `orbit`.
///
/// The `n_q`-fold cyclic composition `φ(I_0, φ(I_1, … φ(I_{(n_q-1) mod k}, 0)…))`
/// bounds `q(x_0)` from below; the bound is then pulled back around the orbit
/// with `b_{i-1} = inf φ(I_{i-1}, b_i)`.
pub fn lower_bound_q_on_orbit(fam: &dyn GenFamily, orbit: &PeriodicOrbit, n_q: usize) -> Result<OrbitQLower> {
    let cells = orbit.cells();
    let k = cells.len();
    if n_q == 0 {
        return Ok(OrbitQLower {
            orbit: orbit.clone(),
            q_lb: vec![0.0; k],
        });
    }

    let mut s = Interval::ZERO;
    for step in (0..n_q).rev() {
        s = Interval::point(fam.phi(cells[step % k], s)?.lo().max(0.0));
    }
    // at_point[i] ≤ q(x_i)
    let mut at_point = vec![0.0; k];
    at_point[0] = s.lo();
    let mut next = s.lo();
    for i in (1..k).rev() {
        next = fam.phi(cells[i], Interval::point(next))?.lo().max(0.0);
        at_point[i] = next;
    }
    let q_lb = (0..k).map(|i| at_point[(i + 1) % k]).collect();
    Ok(OrbitQLower {
        orbit: orbit.clone(),
        q_lb,
    })
}

/// `saturated[t] = φ^{(t)}([0, 1], C)`, for chains that have reached the whole circle.
fn saturated_table(fam: &dyn GenFamily, c: Interval, len: usize) -> Result<Vec<Interval>> {
    let mut table = Vec::with_capacity(len + 1);
    table.push(c);
    for t in 0..len {
        let next = fam.phi(Interval::UNIT, table[t])?;
        table.push(next);
    }
    Ok(table)
}

/// Whether some `j ≤ j_max` has `sup φ^{(j)}(cell, C) ≤ C`.
fn discharged(
    fam: &dyn GenFamily,
    map: &CircleMap,
    cell: Interval,
    c: Interval,
    saturated: &[Interval],
    j_max: usize,
) -> Result<bool> {
    // Stop the chain at the first level covering the circle; deeper levels repeat it.
    let mut laws = Vec::with_capacity(j_max);
    let mut cur = cell;
    while laws.len() < j_max {
        if is_full_circle(cur) {
            break;
        }
        laws.push(fam.law(cur)?);
        cur = map.map_interval(cur)?;
    }
    let f = laws.len();
    for j in 1..=j_max {
        let (head, start) = if j <= f { (&laws[..j], c) } else { (&laws[..], saturated[j - f]) };
        let v = head.iter().rev().try_fold(start, |acc, law| law(acc))?;
        if v.hi() <= c.lo() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Adaptive cover used to certify `K`; survives across candidate retries.
#[derive(Debug, Clone)]
struct KWorklist {
    cells: Vec<(Interval, u32)>,
    iteration: u32,
    checked: u64,
    overflowed: bool,
}

impl KWorklist {
    fn new() -> Self {
        Self {
            cells: vec![(Interval::UNIT, 0)],
            iteration: 0,
            checked: 0,
            overflowed: false,
        }
    }

    /// Runs up to `budget` rounds against candidate `c`; true once the worklist empties.
    ///
    /// Round numbering, and with it the composition depth `⌊i/2⌋ + 1`, starts
    /// afresh for each candidate.
    fn run(&mut self, fam: &dyn GenFamily, map: &CircleMap, c: f64, budget: u32) -> Result<bool> {
        let ci = Interval::point(c);
        let saturated = saturated_table(fam, ci, (budget / 2 + 1) as usize)?;
        self.iteration = 0;
        for _ in 0..budget {
            if self.cells.is_empty() {
                return Ok(true);
            }
            self.iteration += 1;
            let j_max = (self.iteration / 2 + 1) as usize;
            let keep: Vec<bool> = self
                .cells
                .par_iter()
                .map(|&(cell, _)| discharged(fam, map, cell, ci, &saturated, j_max).map(|d| !d))
                .collect::<Result<_>>()?;
            self.checked += self.cells.len() as u64;

            let mut next = Vec::new();
            for (&(cell, depth), keep) in self.cells.iter().zip(keep) {
                if !keep {
                    continue;
                }
                if depth >= MAX_SPLIT_DEPTH {
                    next.push((cell, depth));
                } else {
                    let (a, b) = cell.split()?;
                    next.push((a, depth + 1));
                    next.push((b, depth + 1));
                }
            }
            self.cells = next;
            if self.cells.len() > MAX_K_CELLS {
                self.overflowed = true;
                return Ok(false);
            }
        }
        Ok(self.cells.is_empty())
    }
}

fn check_candidate(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("candidate must lie in (0, 1), got {c}")))
    }
}

/// Tries to certify `sup q ≤ c` within `n_max` refinement rounds.
///
/// A cell is discharged once some `j ≤ ⌊i/2⌋ + 1` gives `sup φ^{(j)}(I, c) ≤ c`
/// at round `i`; the others are split. `certified = false` only means the
/// check did not succeed, not that `c` is too small.
pub fn verify_upper_bound_k(fam: &dyn GenFamily, map: &CircleMap, c: f64, n_max: u32) -> Result<KCertificate> {
    check_candidate(c)?;
    let mut work = KWorklist::new();
    let certified = work.run(fam, map, c, n_max)?;
    Ok(KCertificate {
        k: c,
        certified,
        refinement_depth: work.iteration,
        cells_checked: work.checked,
        retries: 0,
    })
}

/// Parameters of the search for a certified `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSearch {
    /// The candidate is estimated on the grid `i / 2^n_grid`.
    pub n_grid: u32,
    /// Depth `M` of `φ^{(M)}(·, 0)` in the estimate.
    pub m_depth: usize,
    /// Added to the grid estimate.
    pub eps_pad: f64,
    /// On failure the candidate moves to `C + (1 - C)·delta_retry`.
    pub delta_retry: f64,
    pub max_retries: u32,
    /// Refinement rounds allowed per candidate.
    pub n_max: u32,
}

impl Default for KSearch {
    fn default() -> Self {
        Self {
            n_grid: 8,
            m_depth: 10,
            eps_pad: 1e-3,
            delta_retry: 0.1,
            max_retries: 20,
            n_max: 24,
        }
    }
}

/// `sup_i φ^{(M)}(i/2^N, 0) + ε`, rounded up.
pub fn grid_estimate(fam: &dyn GenFamily, map: &CircleMap, search: &KSearch) -> Result<f64> {
    let n = 1u64 << search.n_grid;
    let sup = (0..=n)
        .into_par_iter()
        .map(|i| {
            let x = Interval::point(i as f64 / n as f64);
            phi_iter(fam, map, x, Interval::ZERO, search.m_depth).map(|v| v.hi())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(add_up(sup, search.eps_pad))
}

/// Estimates `sup q` on a grid and certifies the estimate, enlarging it on failure.
pub fn candidate_k(fam: &dyn GenFamily, map: &CircleMap, search: &KSearch) -> Result<KCertificate> {
    let start = grid_estimate(fam, map, search)?;
    candidate_k_from(fam, map, start, search)
}

/// Certification loop of [`candidate_k`] starting from a given candidate.
///
/// By convexity of `s ↦ φ^{(N)}(x, s)` and `φ^{(N)}(x, 1) = 1`, a cell
/// discharged for `C` stays discharged for any larger candidate, so retries
/// only revisit the surviving worklist.
pub fn candidate_k_from(fam: &dyn GenFamily, map: &CircleMap, start: f64, search: &KSearch) -> Result<KCertificate> {
    if !(search.delta_retry > 0.0 && search.delta_retry < 1.0) || !(search.eps_pad > 0.0) {
        return Err(Error::InvalidArgument("need eps_pad > 0 and 0 < delta_retry < 1".into()));
    }
    let mut c = start;
    let mut work = KWorklist::new();
    let mut checked = 0;
    for retry in 0..=search.max_retries {
        if !(c > 0.0 && c < 1.0) {
            break;
        }
        if work.overflowed {
            checked += work.checked;
            work = KWorklist::new();
        }
        if work.run(fam, map, c, search.n_max)? {
            return Ok(KCertificate {
                k: c,
                certified: true,
                refinement_depth: work.iteration,
                cells_checked: checked + work.checked,
                retries: retry,
            });
        }
        c = add_up(c, mul_up(add_up(1.0, -c), search.delta_retry));
    }
    Ok(KCertificate {
        k: c.min(1.0),
        certified: false,
        refinement_depth: work.iteration,
        cells_checked: checked + work.checked,
        retries: search.max_retries,
    })
}

/// `sup φ_K^{(n)}(I, K) ≥ sup q(I)` for a certified `K`.
pub fn upper_bound_q_on_cell(fam: &dyn GenFamily, map: &CircleMap, cell: Interval, k: f64, n: usize) -> Result<f64> {
    Ok(phi_iter_truncated(fam, map, cell, k, n)?.hi())
}

/// `inf φ^{(n)}(I, 0) ≤ inf q(I)`.
pub fn lower_bound_q_on_cell(fam: &dyn GenFamily, map: &CircleMap, cell: Interval, n: usize) -> Result<f64> {
    Ok(phi_iter(fam, map, cell, Interval::ZERO, n)?.lo().max(0.0))
}
