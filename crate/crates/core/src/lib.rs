//! Certified bounds on the Lyapunov exponents of Galton-Watson processes in
//! dynamical environments driven by expanding circle maps, and the resulting
//! Hölder regularity of the extinction probability.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod extinction;
pub mod genfun;
pub mod interval;
pub mod lyapunov;
pub mod orbits;
pub mod pipeline;
pub mod regularity;
pub mod simulate;

pub use config::RunConfig;
pub use dynamics::{CircleMap, Lift, SinusoidalMap};
pub use error::{Error, Result};
pub use extinction::{KCertificate, KSearch};
pub use genfun::{ConstantPoissonFamily, GenFamily, PoissonCosFamily};
pub use interval::Interval;
pub use lyapunov::{Cell, ExponentBounds};
pub use orbits::PeriodicOrbit;
pub use pipeline::{run_pipeline, BoundsReport};
pub use regularity::RegularityCertificate;
pub use simulate::{SimConfig, SimOutcome};
