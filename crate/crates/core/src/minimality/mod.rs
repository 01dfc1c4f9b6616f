//! Minimal arrival-time distributions and the L1 near-minimality certificate.

pub mod airy;
pub mod fit;

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

pub use airy::{airy, airy_negative_zeros, airy_prime_negative_zeros, AiryEval, AIRY_RANGE};
pub use fit::{certify_minimal, fit_minimal, FitTarget, MinimalFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// `2(−Z₁/3)^{3/2}`, the constant of the mean-time relation.
    pub c: f64,
    /// Stability constant of the Airy² certificate.
    pub gamma_airy: f64,
    /// Stability constant of the Gaussian certificate.
    pub gamma_gauss: f64,
    /// Ground state of the oscillator `−d²/dt² + t²`.
    pub x0: f64,
    /// `−Z₁`, ground state of `−d²/dt² + t` on the half line.
    pub y0: f64,
    /// `−Z₂`, first excited state of the same operator.
    pub y1: f64,
    /// `Ai'(Z₁)²`, normalizer of the Airy² density.
    pub airy_norm: f64,
}

pub fn constants() -> &'static Constants {
    static CONSTANTS: OnceLock<Constants> = OnceLock::new();
    CONSTANTS.get_or_init(|| {
        let z = airy_negative_zeros(2);
        let (y0, y1) = (-z[0], -z[1]);
        let aip = airy::airy_unchecked(z[0]).ai_prime;
        Constants {
            c: 2.0 * (y0 / 3.0).powf(1.5),
            gamma_airy: 2.0 * (2.0 * y0 / (3.0 * (y1 - y0))).sqrt(),
            gamma_gauss: 2f64.sqrt(),
            x0: 1.0,
            y0,
            y1,
            airy_norm: aip * aip,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinimalKind {
    Gaussian,
    Airy,
}

impl MinimalKind {
    pub const ALL: [MinimalKind; 2] = [MinimalKind::Gaussian, MinimalKind::Airy];

    pub fn gamma(self) -> f64 {
        match self {
            MinimalKind::Gaussian => constants().gamma_gauss,
            MinimalKind::Airy => constants().gamma_airy,
        }
    }

    /// Mean and standard deviation of the unit-scale density.
    pub fn unit_moments(self) -> (f64, f64) {
        match self {
            MinimalKind::Gaussian => (0.0, 1.0),
            MinimalKind::Airy => {
                let y0 = constants().y0;
                (2.0 * y0 / 3.0, 2.0 * y0 / (3.0 * 5f64.sqrt()))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MinimalKind::Gaussian => "gaussian",
            MinimalKind::Airy => "airy",
        }
    }
}

/// Unit-scale density in the reduced variable `s`.
pub(crate) fn unit_density(kind: MinimalKind, s: f64) -> f64 {
    match kind {
        MinimalKind::Gaussian => (-0.5 * s * s).exp() / (2.0 * PI).sqrt(),
        MinimalKind::Airy => {
            let k = constants();
            let x = s - k.y0;
            if s <= 0.0 || x > AIRY_RANGE {
                return 0.0;
            }
            let ai = airy::airy_unchecked(x).ai;
            ai * ai / k.airy_norm
        }
    }
}

fn check_scale(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveScale(lambda))
    }
}

/// `λ·P_min(λ(t−τ))`.
pub fn minimal_density(kind: MinimalKind, lambda: f64, tau: f64, t: f64) -> Result<f64> {
    check_scale(lambda)?;
    Ok(lambda * unit_density(kind, lambda * (t - tau)))
}

/// Cumulative distribution of `λ·P_min(λ(t−τ))`.
pub fn minimal_cdf(kind: MinimalKind, lambda: f64, tau: f64, t: f64) -> Result<f64> {
    check_scale(lambda)?;
    let s = lambda * (t - tau);
    Ok(match kind {
        MinimalKind::Gaussian => 0.5 * libm::erfc(-s / 2f64.sqrt()),
        MinimalKind::Airy => {
            let k = constants();
            let x = s - k.y0;
            if s <= 0.0 {
                0.0
            } else if x > AIRY_RANGE {
                1.0
            } else {
                // d/dx (x·Ai² − Ai'²) = Ai²
                let e = airy::airy_unchecked(x);
                ((x * e.ai * e.ai - e.ai_prime * e.ai_prime + k.airy_norm) / k.airy_norm).clamp(0.0, 1.0)
            }
        }
    })
}

/// `∫₀^∞ Ai(s+Z₁)² ds` by adaptive quadrature, to be compared with `Ai'(Z₁)²`.
pub fn airy_normalization_quadrature() -> f64 {
    let k = constants();
    let breaks: Vec<f64> = (0..=40).map(|i| i as f64).collect();
    quad::integrate_breaks(
        |s| {
            let ai = airy::airy_unchecked(s - k.y0).ai;
            ai * ai
        },
        &breaks,
        1e-15,
        1e-13,
        4000,
    )
    .value
}
