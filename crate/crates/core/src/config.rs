//! Run configuration, read from a single JSON document.

use serde::{Deserialize, Serialize};

use crate::dynamics::CircleMap;
use crate::error::{Error, Result};
use crate::extinction::KSearch;
use crate::genfun::{ConstantPoissonFamily, GenFamily, PoissonCosFamily};
use crate::lyapunov::Window;

/// Environment variable overriding [`RunConfig::threads`].
pub const THREADS_ENV: &str = "LYAPBOUND_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    #[serde(rename = "poisson-cos")]
    PoissonCos,
    #[serde(rename = "constant-poisson")]
    ConstantPoisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: FamilyKind,
    pub lambda: f64,
    pub omega: f64,
    pub c: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: FamilyKind::PoissonCos,
            lambda: 1.05,
            omega: 0.5,
            c: 2.0,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<Box<dyn GenFamily>> {
        Ok(match self.family {
            FamilyKind::PoissonCos => Box::new(PoissonCosFamily::new(self.lambda, self.omega)?),
            FamilyKind::ConstantPoisson => Box::new(ConstantPoissonFamily::new(self.c)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub eps: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { n: 2, eps: 0.0 }
    }
}

impl MapConfig {
    pub fn build(&self) -> Result<CircleMap> {
        CircleMap::sinusoidal(self.n, self.eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitConfig {
    #[serde(rename = "M")]
    pub m: u32,
    pub epsilon: f64,
    /// Cyclic compositions used for the lower bound on `q` along each orbit.
    pub n_q: usize,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            m: 10,
            epsilon: 1e-10,
            n_q: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KConfig {
    pub n_grid: u32,
    pub m_depth: usize,
    pub eps_pad: f64,
    pub delta_retry: f64,
    pub max_retries: u32,
    pub n_max: u32,
}

impl Default for KConfig {
    fn default() -> Self {
        let s = KSearch::default();
        Self {
            n_grid: s.n_grid,
            m_depth: s.m_depth,
            eps_pad: s.eps_pad,
            delta_retry: s.delta_retry,
            max_retries: s.max_retries,
            n_max: s.n_max,
        }
    }
}

impl KConfig {
    pub fn search(&self) -> KSearch {
        KSearch {
            n_grid: self.n_grid,
            m_depth: self.m_depth,
            eps_pad: self.eps_pad,
            delta_retry: self.delta_retry,
            max_retries: self.max_retries,
            n_max: self.n_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub delta: f64,
    pub n_iteration: u32,
    /// `φ_K` compositions beyond the Birkhoff window in the upper bound on `q`.
    pub n_q: usize,
    pub window: Window,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            n_iteration: 60,
            n_q: crate::lyapunov::DEFAULT_N_Q_UPPER,
            window: Window::HalfDepth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub map: MapConfig,
    pub orbit: OrbitConfig,
    pub kcert: KConfig,
    pub refine: RefineConfig,
    pub margin: f64,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            map: MapConfig::default(),
            orbit: OrbitConfig::default(),
            kcert: KConfig::default(),
            refine: RefineConfig::default(),
            margin: crate::regularity::DEFAULT_MARGIN,
            threads: 1,
        }
    }
}

impl RunConfig {
    /// Parses and validates a JSON document; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &str, msg: String) -> Result<()> {
            Err(Error::Config(format!("{field}: {msg}")))
        }
        self.model.build().map_err(|e| Error::Config(format!("model: {e}")))?;
        self.map.build().map_err(|e| Error::Config(format!("map: {e}")))?;
        if self.orbit.m == 0 {
            return bad("orbit.M", "must be at least 1".into());
        }
        if !(self.orbit.epsilon > 0.0) {
            return bad("orbit.epsilon", format!("must be positive, got {}", self.orbit.epsilon));
        }
        let k = &self.kcert;
        if k.n_grid > 24 {
            return bad("kcert.n_grid", format!("at most 24, got {}", k.n_grid));
        }
        if !(k.eps_pad > 0.0 && k.eps_pad < 1.0) {
            return bad("kcert.eps_pad", format!("must lie in (0, 1), got {}", k.eps_pad));
        }
        if !(k.delta_retry > 0.0 && k.delta_retry < 1.0) {
            return bad("kcert.delta_retry", format!("must lie in (0, 1), got {}", k.delta_retry));
        }
        if !(self.refine.delta > 0.0 && self.refine.delta < 1.0) {
            return bad("refine.delta", format!("must lie in (0, 1), got {}", self.refine.delta));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("margin", format!("must be finite and non-negative, got {}", self.margin));
        }
        if self.threads == 0 {
            return bad("threads", "must be at least 1".into());
        }
        Ok(())
    }

    /// `threads`, unless overridden by the environment.
    pub fn effective_threads(&self) -> Result<usize> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(Error::Config(format!("{THREADS_ENV}: expected a positive integer, got {v:?}"))),
            },
            Err(_) => Ok(self.threads),
        }
    }
}
