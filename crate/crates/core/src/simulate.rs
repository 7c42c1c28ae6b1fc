//! Monte-Carlo simulation of the branching process in its dynamical environment.
//!
//! This is a statistical cross-check, not a certified computation: the
//! environment orbit `x, Tx, T²x, …` is followed in plain double precision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::CircleMap;
use crate::error::{Error, Result};
use crate::genfun::GenFamily;

pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub x0: f64,
    pub generations: u32,
    pub trials: u64,
    pub seed: u64,
    /// Populations reaching this size are counted as surviving.
    pub population_cap: u64,
}

impl SimConfig {
    pub fn new(x0: f64, generations: u32, trials: u64, seed: u64) -> Self {
        Self {
            x0,
            generations,
            trials,
            seed,
            population_cap: DEFAULT_POPULATION_CAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.x0) {
            return Err(Error::InvalidArgument(format!("x0 must lie in [0, 1), got {}", self.x0)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.population_cap == 0 {
            return Err(Error::InvalidArgument("population_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOutcome {
    pub freq: f64,
    pub stderr: f64,
    pub capped_trials: u64,
}

enum Fate {
    Extinct,
    Alive,
    Capped,
}

/// Environment sequence `x0, T x0, …` of length `len`, reduced mod 1.
pub fn environment(map: &CircleMap, x0: f64, len: usize) -> Vec<f64> {
    let mut xs = Vec::with_capacity(len);
    let mut x = x0;
    for _ in 0..len {
        xs.push(x);
        x = map.lift_point(x).rem_euclid(1.0);
    }
    xs
}

/// Each trial draws from its own ChaCha stream `(seed, trial)`, so results do
/// not depend on how trials are scheduled across threads.
fn run_trial(fam: &dyn GenFamily, env: &[f64], cap: u64, seed: u64, trial: u64) -> Result<Fate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let mut z: u64 = 1;
    for &x in env {
        z = fam
            .sample_offspring(x, z, &mut rng)
            .ok_or(Error::UnsupportedSampling)?;
        if z == 0 {
            return Ok(Fate::Extinct);
        }
        if z >= cap {
            return Ok(Fate::Capped);
        }
    }
    Ok(Fate::Alive)
}

/// Fraction of trials with `Z_generations = 0`, started from one individual at `x0`.
pub fn extinction_frequency(fam: &dyn GenFamily, map: &CircleMap, cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    if fam.sample_offspring(cfg.x0, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_none() {
        return Err(Error::UnsupportedSampling);
    }
    let env = environment(map, cfg.x0, cfg.generations as usize);
    let (extinct, capped) = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(fam, &env, cfg.population_cap, cfg.seed, t).map(|f| match f {
                Fate::Extinct => (1u64, 0u64),
                Fate::Capped => (0, 1),
                Fate::Alive => (0, 0),
            })
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let n = cfg.trials as f64;
    let freq = extinct as f64 / n;
    Ok(SimOutcome {
        freq,
        stderr: (freq * (1.0 - freq) / n).sqrt(),
        capped_trials: capped,
    })
}
