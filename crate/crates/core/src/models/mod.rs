//! Concrete absorptive systems: the two-level model, the constant absorber,
//! the trapped-ion reduction and a random generator for dark initial states.

pub mod montecarlo;

use nalgebra::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::absorption::AbsorptiveSystem;
use crate::arrival::{stats_with, MomentMethod};
use crate::error::{Error, Result};
use crate::linops::{c64, ComplexMatrix, ComplexVector, StateVector, C64};
use crate::optimize::golden_section;

pub use montecarlo::{ks_against_arrival, ks_test, quantum_jump_sample, KsReport, KsVerdict, SampleSet};

/// Ratio `|Ω₂₃|/Γ₃₄` above which adiabatic elimination of level 3 is refused.
pub const ADIABATIC_FACTOR: f64 = 5.0;

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveParameter { name, value })
    }
}

/// `H = ħ/2·[[0, Ω], [Ω, 0]]`, `D = ħ/2·diag(0, γ)`, `ψ = (1, 0)`.
pub fn two_level(omega: f64, gamma: f64, hbar: f64) -> Result<(AbsorptiveSystem, StateVector)> {
    positive("omega", omega)?;
    positive("gamma", gamma)?;
    positive("hbar", hbar)?;
    let z = c64(0.0, 0.0);
    let h = ComplexMatrix::from_row_slice(2, 2, &[z, c64(hbar * omega / 2.0, 0.0), c64(hbar * omega / 2.0, 0.0), z]);
    let d = ComplexMatrix::from_row_slice(2, 2, &[z, z, z, c64(hbar * gamma / 2.0, 0.0)]);
    Ok((AbsorptiveSystem::new(h, d, hbar)?, StateVector::basis(2, 0)))
}

/// `D = ħα·1`, so that `S(t) = e^{−2αt}` for every state.
pub fn constant_absorber(h: ComplexMatrix, alpha: f64, hbar: f64) -> Result<AbsorptiveSystem> {
    positive("alpha", alpha)?;
    positive("hbar", hbar)?;
    let n = h.nrows();
    AbsorptiveSystem::new(h, ComplexMatrix::identity(n, n) * c64(hbar * alpha, 0.0), hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonScheme {
    /// Drive on the 1–2 transition (rad/s).
    pub omega12: f64,
    /// Drive on the 2–3 transition (rad/s).
    pub omega23: f64,
    /// Decay rate of level 3 (1/s).
    pub gamma34: f64,
    /// Detection efficiency.
    pub q: f64,
}

impl IonScheme {
    /// `γ = |Ω₂₃|²/Γ₃₄`.
    pub fn effective_rate(&self) -> f64 {
        self.omega23 * self.omega23 / self.gamma34
    }

    pub fn regime_limit(&self) -> f64 {
        self.gamma34 / ADIABATIC_FACTOR
    }

    pub fn is_valid(&self) -> bool {
        self.omega23.abs() <= self.regime_limit()
    }

    fn validate(&self) -> Result<()> {
        positive("omega12", self.omega12)?;
        positive("omega23", self.omega23)?;
        positive("gamma34", self.gamma34)?;
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::NonpositiveParameter { name: "q", value: self.q });
        }
        if !self.is_valid() {
            return Err(Error::RegimeViolation {
                omega23: self.omega23,
                limit: self.regime_limit(),
            });
        }
        Ok(())
    }
}

/// The two-level system obtained by eliminating level 3.
pub fn ion_effective(s: &IonScheme, hbar: f64) -> Result<(AbsorptiveSystem, StateVector)> {
    s.validate()?;
    two_level(s.omega12, s.effective_rate(), hbar)
}

fn gaussian_c64(rng: &mut ChaCha20Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) / 2f64.sqrt()
}

/// Random system with a dark initial state: `H` from the Gaussian unitary
/// ensemble, `D` of rank `dim − kernel_dim` with weights in `(0, 2]`, and
/// `ψ` a random unit vector in `ker D`.
pub fn random_system(dim: usize, kernel_dim: usize, seed: u64) -> Result<(AbsorptiveSystem, StateVector)> {
    if !(2..=16).contains(&dim) || kernel_dim == 0 || kernel_dim >= dim {
        return Err(Error::InvalidArgument(format!(
            "need 2 ≤ dim ≤ 16 and 1 ≤ kernel_dim < dim, got dim {dim}, kernel_dim {kernel_dim}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let a = ComplexMatrix::from_fn(dim, dim, |_, _| gaussian_c64(&mut rng));
    let h = (&a + a.adjoint()) * c64(0.5, 0.0);

    let g = ComplexMatrix::from_fn(dim, dim, |_, _| gaussian_c64(&mut rng));
    let basis = QR::new(g).q();
    let rank = dim - kernel_dim;
    let mut d = ComplexMatrix::zeros(dim, dim);
    for _ in 0..rank {
        let coeffs = ComplexVector::from_fn(rank, |_, _| gaussian_c64(&mut rng));
        let v = basis.columns(kernel_dim, rank) * coeffs;
        let v = &v / c64(v.norm(), 0.0);
        let w = 2.0 * (1.0 - rng.random::<f64>());
        d += &v * v.adjoint() * c64(w, 0.0);
    }
    let coeffs = ComplexVector::from_fn(kernel_dim, |_, _| gaussian_c64(&mut rng));
    let psi = StateVector::normalized(basis.columns(0, kernel_dim) * coeffs)?;
    Ok((AbsorptiveSystem::new(h, d, 1.0)?, psi))
}

/// Extends `sys` by one undetected level carrying an `H`-eigenvector with the
/// same energy as `ψ`, and returns `√p′·ψ ⊕ √(1−p′)·φ₀`.
pub fn dilute(sys: &AbsorptiveSystem, psi: &StateVector, p_prime: f64) -> Result<(AbsorptiveSystem, StateVector)> {
    if !(p_prime > 0.0 && p_prime <= 1.0) {
        return Err(Error::NonpositiveParameter {
            name: "p_prime",
            value: p_prime,
        });
    }
    let n = sys.dim();
    let v = psi.as_vector();
    let energy = v.dotc(&(sys.h() * v)).re;
    let mut h = ComplexMatrix::zeros(n + 1, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(sys.h());
    h[(n, n)] = c64(energy, 0.0);
    let mut d = ComplexMatrix::zeros(n + 1, n + 1);
    d.view_mut((0, 0), (n, n)).copy_from(sys.d());
    let mut w = ComplexVector::zeros(n + 1);
    w.rows_mut(0, n).copy_from(&(v * c64(p_prime.sqrt(), 0.0)));
    w[n] = c64((1.0 - p_prime).sqrt(), 0.0);
    Ok((AbsorptiveSystem::new(h, d, sys.hbar())?, StateVector::normalized(w)?))
}

/// Scales `H` and `D` by `c`.
pub fn rescale(sys: &AbsorptiveSystem, c: f64) -> Result<AbsorptiveSystem> {
    positive("scale", c)?;
    AbsorptiveSystem::new(sys.h() * c64(c, 0.0), sys.d() * c64(c, 0.0), sys.hbar())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoLevelObjective {
    /// `⟨T⟩·ΔE/ħ`.
    MeanTime,
    /// `ΔT·ΔE/ħ`.
    StdTime,
}

/// `⟨T⟩ΔE/ħ` or `ΔT·ΔE/ħ` of the two-level model at `γ = ratio·Ω`.
pub fn two_level_objective(omega: f64, ratio: f64, hbar: f64, objective: TwoLevelObjective) -> Result<f64> {
    let (sys, psi) = two_level(omega, ratio * omega, hbar)?;
    let method = if sys.factorization().is_some() {
        MomentMethod::ClosedForm
    } else {
        MomentMethod::Quadrature
    };
    let stats = stats_with(&sys, &psi, method)?;
    let de = hbar * omega / 2.0;
    Ok(match objective {
        TwoLevelObjective::MeanTime => stats.mean_t * de / hbar,
        TwoLevelObjective::StdTime => stats.std_t * de / hbar,
    })
}

/// Golden-section minimizer of [`two_level_objective`] over `γ/Ω ∈ [lo, hi]`.
pub fn two_level_optimum(omega: f64, hbar: f64, objective: TwoLevelObjective, lo: f64, hi: f64) -> Result<(f64, f64)> {
    positive("lo", lo)?;
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
    }
    // Probe once so parameter errors surface instead of becoming NaN.
    two_level_objective(omega, lo, hbar, objective)?;
    let f = |r: f64| two_level_objective(omega, r, hbar, objective).unwrap_or(f64::INFINITY);
    Ok(golden_section(f, lo, hi, 1e-10))
}
