//! Hölder-regularity certificates for the extinction probability.
//!
//! If `λ_F < 0`, the process is uniformly supercritical, `q > 0`, and the map
//! and generating function are `C^{k+1}`, then `q` is `C^k` with an
//! `α`-Hölder `k`-th derivative for every `k + α < |λ_F| / λ_u`, `α ∈ (0, 1]`.
//! The smoothness and positivity hypotheses are attested from what the model
//! declares, not verified.

use serde::Serialize;

use crate::dynamics::CircleMap;
use crate::error::{Error, Result};
use crate::extinction::KCertificate;
use crate::genfun::GenFamily;
use crate::interval::add_down;
use crate::lyapunov::{ratio_bounds, ExponentBounds};

pub const DEFAULT_MARGIN: f64 = 1e-6;

/// Hypotheses taken from the model's declarations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Attestation {
    /// Declared differentiability class of `T` and `φ`; `None` means smooth.
    pub smoothness: Option<u32>,
    /// `μ_x(0) > 0` for all `x`.
    pub q_positive: bool,
}

impl Attestation {
    pub fn from_model(fam: &dyn GenFamily, map: &CircleMap) -> Self {
        let smoothness = match (fam.smoothness(), map.smoothness()) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(u32::MAX).min(b.unwrap_or(u32::MAX))),
        };
        Self {
            smoothness,
            q_positive: fam.positive_at_zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypotheses {
    pub uniformly_supercritical: bool,
    pub q_positive: bool,
    pub smoothness_declared: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityCertificate {
    pub k: u32,
    pub alpha: f64,
    pub ratio_lo: f64,
    /// `C^{k+1}` smoothness that `T` and `φ` must have for the certificate to hold.
    pub smoothness_required: u32,
    pub hypotheses: Hypotheses,
}

/// Largest `(k, α)` with `k + α + margin ≤ ratio_lo`, `α ≤ 1` and `k + 1` within
/// the declared smoothness.
pub fn certify_ratio(ratio_lo: f64, margin: f64, attest: &Attestation) -> Result<RegularityCertificate> {
    if !(margin >= 0.0) || !(ratio_lo > margin) {
        return Err(Error::NoPositiveAlpha { ratio_lo });
    }
    // Largest integer k with k + margin < ratio_lo.
    let room = add_down(ratio_lo, -margin);
    let mut k = room.ceil() - 1.0;
    if let Some(s) = attest.smoothness {
        // Hypotheses need C^{k+1}.
        k = k.min(f64::from(s.saturating_sub(1)));
    }
    let k = k.max(0.0);
    let alpha = add_down(room, -k).min(1.0);
    if !(alpha > 0.0) {
        return Err(Error::NoPositiveAlpha { ratio_lo });
    }
    let k = k as u32;
    Ok(RegularityCertificate {
        k,
        alpha,
        ratio_lo,
        smoothness_required: k + 1,
        hypotheses: Hypotheses {
            uniformly_supercritical: false,
            q_positive: attest.q_positive,
            smoothness_declared: attest.smoothness.is_none_or(|s| s > k),
        },
    })
}

/// Regularity certificate from certified exponent bounds and a certified `K`.
pub fn certify(
    bounds: &ExponentBounds,
    k_cert: &KCertificate,
    margin: f64,
    attest: &Attestation,
) -> Result<RegularityCertificate> {
    if !k_cert.certified {
        return Err(Error::InvalidArgument("regularity needs a certified K".into()));
    }
    let (ratio_lo, _) = ratio_bounds(bounds)?;
    let mut cert = certify_ratio(ratio_lo, margin, attest)?;
    cert.hypotheses.uniformly_supercritical = true;
    Ok(cert)
}
