//! Arrival-time density, its moments, energy statistics and the
//! uncertainty-relation report.

use serde::Serialize;

use crate::absorption::{AbsorptiveSystem, Trajectory};
use crate::error::{Error, Result};
use crate::linops::{spectral_norm, ComplexMatrix, StateVector, C64};
use crate::minimality::{constants, FitTarget, MinimalKind};
use crate::quad;

/// Relative size of `‖Dψ‖` below which the initial state counts as dark.
pub const ASSUMPTION_TOL: f64 = 1e-10;
/// Decay rates below this fraction of `‖K‖/ħ` are treated as non-decaying.
pub const SLOW_RATE_TOL: f64 = 1e-12;
/// Numerical slack allowed on the mean-time relation.
pub const RELATION_SLACK: f64 = 1e-9;
/// Weight a non-decaying mode may carry in the absorbed part of the state.
const SLOW_WEIGHT_TOL: f64 = 1e-9;
/// Width of the uniform quadrature panels, in units of `ħ/‖K‖`.
const PANEL: f64 = 4.0;
const UNIFORM_PANELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArrivalStats {
    pub p: f64,
    pub mean_t: f64,
    pub second_t: f64,
    pub std_t: f64,
    pub mean_e: f64,
    pub std_e: f64,
    /// `ΔT·ΔE/(√p·ħ/2)`.
    pub ratio_var: f64,
    /// `⟨T⟩·ΔE/(C·√p·ħ)`.
    pub ratio_mean: f64,
    pub method: MomentMethod,
}

impl ArrivalStats {
    /// Relative excess `ε` of the relation matching `kind`.
    pub fn epsilon(&self, kind: MinimalKind) -> f64 {
        match kind {
            MinimalKind::Gaussian => self.ratio_var - 1.0,
            MinimalKind::Airy => self.ratio_mean - 1.0,
        }
    }
}

/// `P(t) = ‖(Jψ)(t)‖²/p`.
pub fn density(sys: &AbsorptiveSystem, psi: &StateVector, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let traj = sys.trajectory(psi)?;
    let p = checked_p(&traj)?;
    Ok(traj.absorption_rate(t) / p)
}

fn checked_p(traj: &Trajectory) -> Result<f64> {
    let p = traj.absorption_probability();
    if p < 1e-12 {
        Err(Error::ZeroAbsorption(p))
    } else {
        Ok(p)
    }
}

/// `⟨Tⁿ⟩` for `n ∈ {1, 2}`.
pub fn moments(sys: &AbsorptiveSystem, psi: &StateVector, n: u32, method: MomentMethod) -> Result<f64> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidArgument(format!("moment order {n} not in 1..=2")));
    }
    let traj = sys.trajectory(psi)?;
    let [m1, m2] = match method {
        MomentMethod::ClosedForm => closed_form_moments(&traj, psi)?,
        MomentMethod::Quadrature => quadrature_moments(&traj)?,
    };
    Ok(if n == 1 { m1 } else { m2 })
}

/// Both moments from the eigen-expansion of `B_tψ`:
/// `∫ tⁿ e^{st} dt = n!/(−s)^{n+1}` with `s = i(λ̄_j − λ_k)/ħ`.
pub fn closed_form_moments(traj: &Trajectory, psi: &StateVector) -> Result<[f64; 2]> {
    let p = checked_p(traj)?;
    let sys = traj.system();
    let Some(f) = sys.factorization() else {
        return Err(Error::DefectiveMatrix {
            condition: f64::INFINITY,
            cap: crate::linops::DEFAULT_CONDITION_CAP,
        });
    };
    let hbar = sys.hbar();
    let n = sys.dim();
    let slow = SLOW_RATE_TOL * sys.generator_norm() / hbar;
    let asym = traj.asymptotic();
    let mut c: Vec<C64> = (&f.inverse_vectors * psi.as_vector()).iter().copied().collect();
    for k in 0..n {
        let rate = -f.eigenvalues[k].im / hbar;
        if rate < slow.max(f64::MIN_POSITIVE) {
            let v = f.right_vectors.column(k).into_owned();
            let weight = c[k].norm() * asym.complement(&v).norm();
            if weight > SLOW_WEIGHT_TOL {
                return Err(Error::DivergentMoment { rate });
            }
            c[k] = C64::new(0.0, 0.0);
        }
    }
    let g: ComplexMatrix = f.right_vectors.adjoint() * sys.d() * &f.right_vectors;
    let mut sums = [C64::new(0.0, 0.0); 2];
    for j in 0..n {
        if c[j].norm() == 0.0 {
            continue;
        }
        for k in 0..n {
            if c[k].norm() == 0.0 {
                continue;
            }
            let s = (f.eigenvalues[j].conj() - f.eigenvalues[k]) * C64::new(0.0, 1.0 / hbar);
            let w = c[j].conj() * c[k] * g[(j, k)];
            let inv = -s.inv();
            sums[0] += w * inv * inv;
            sums[1] += w * 2.0 * inv * inv * inv;
        }
    }
    let scale = 2.0 / (hbar * p);
    Ok([scale * sums[0].re, scale * sums[1].re])
}

/// Quadrature breakpoints: uniform panels near the origin, then doubling.
fn breakpoints(unit: f64, horizon: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let step = PANEL * unit;
    for i in 1..=UNIFORM_PANELS {
        let t = i as f64 * step;
        if t >= horizon {
            break;
        }
        b.push(t);
    }
    let mut t = *b.last().unwrap_or(&0.0);
    while t < horizon {
        t = if t == 0.0 { step } else { (2.0 * t).min(horizon) };
        if t < horizon {
            b.push(t);
        }
    }
    b.push(horizon);
    b
}

/// Both moments from `⟨Tⁿ⟩ = (1/p)∫ n·t^{n−1}·(S(t) − (1−p)) dt`.
pub fn quadrature_moments(traj: &Trajectory) -> Result<[f64; 2]> {
    let p = checked_p(traj)?;
    let horizon = traj.horizon()?;
    let breaks = breakpoints(traj.system().time_unit(), horizon);
    let integrate = |g: &dyn Fn(f64) -> f64| {
        quad::integrate_breaks(g, &breaks, 1e-15, 1e-12, 20_000).value
    };
    let m1 = integrate(&|t| traj.excess_survival(t)) / p;
    let m2 = integrate(&|t| 2.0 * t * traj.excess_survival(t)) / p;
    Ok([m1, m2])
}

/// `∫₀^∞ ‖(Jψ)(t)‖² dt` by direct quadrature of the dilated trajectory.
pub fn dilation_norm(traj: &Trajectory) -> Result<f64> {
    let horizon = traj.horizon()?;
    let breaks = breakpoints(traj.system().time_unit(), horizon);
    Ok(quad::integrate_breaks(|t| traj.absorption_rate(t), &breaks, 1e-15, 1e-12, 20_000).value)
}

/// `(⟨H⟩, ΔE)`.
pub fn energy_stats(sys: &AbsorptiveSystem, psi: &StateVector) -> (f64, f64) {
    let v = psi.as_vector();
    let hv = sys.h() * v;
    let mean = v.dotc(&hv).re;
    let spread = (hv - v * C64::new(mean, 0.0)).norm();
    (mean, spread)
}

/// `‖Dψ‖` relative to `‖D‖`, and whether it is below [`ASSUMPTION_TOL`].
pub fn dark_start_residual(sys: &AbsorptiveSystem, psi: &StateVector) -> (f64, bool) {
    let d_norm = spectral_norm(sys.d());
    let dv = (sys.d() * psi.as_vector()).norm();
    let residual = if d_norm > 0.0 { dv / d_norm } else { 0.0 };
    (residual, dv <= ASSUMPTION_TOL * d_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub stats: ArrivalStats,
    /// Whether the initial state has no overlap with the absorber.
    pub assumption_holds: bool,
    pub assumption_residual: f64,
    /// `ratio_var > 1`; `None` when the assumption fails.
    pub variance_relation: Option<bool>,
    /// `ratio_mean ≥ 1 − slack`; `None` when the assumption fails.
    pub mean_relation: Option<bool>,
}

impl UncertaintyReport {
    /// The stats, or [`Error::AssumptionViolated`] if the relations do not apply.
    pub fn require_assumption(&self) -> Result<&ArrivalStats> {
        if self.assumption_holds {
            Ok(&self.stats)
        } else {
            Err(Error::AssumptionViolated {
                residual: self.assumption_residual,
            })
        }
    }

    /// Relations apply and both hold.
    pub fn relations_hold(&self) -> bool {
        self.variance_relation == Some(true) && self.mean_relation == Some(true)
    }
}

pub fn stats_with(sys: &AbsorptiveSystem, psi: &StateVector, method: MomentMethod) -> Result<ArrivalStats> {
    let traj = sys.trajectory(psi)?;
    stats_from_trajectory(&traj, psi, method)
}

pub fn stats_from_trajectory(traj: &Trajectory, psi: &StateVector, method: MomentMethod) -> Result<ArrivalStats> {
    let sys = traj.system();
    let p = checked_p(traj)?;
    let [mean_t, second_t] = match method {
        MomentMethod::ClosedForm => closed_form_moments(traj, psi)?,
        MomentMethod::Quadrature => quadrature_moments(traj)?,
    };
    let std_t = (second_t - mean_t * mean_t).max(0.0).sqrt();
    let (mean_e, std_e) = energy_stats(sys, psi);
    let hbar = sys.hbar();
    Ok(ArrivalStats {
        p,
        mean_t,
        second_t,
        std_t,
        mean_e,
        std_e,
        ratio_var: std_t * std_e / (p.sqrt() * hbar / 2.0),
        ratio_mean: mean_t * std_e / (constants().c * p.sqrt() * hbar),
        method,
    })
}

/// Full report: closed-form moments when the generator is diagonalizable,
/// quadrature otherwise.
pub fn uncertainty_report(sys: &AbsorptiveSystem, psi: &StateVector) -> Result<UncertaintyReport> {
    let method = if sys.factorization().is_some() {
        MomentMethod::ClosedForm
    } else {
        MomentMethod::Quadrature
    };
    let stats = stats_with(sys, psi, method)?;
    Ok(report_from_stats(sys, psi, stats))
}

pub fn report_from_stats(sys: &AbsorptiveSystem, psi: &StateVector, stats: ArrivalStats) -> UncertaintyReport {
    let (residual, holds) = dark_start_residual(sys, psi);
    UncertaintyReport {
        stats,
        assumption_holds: holds,
        assumption_residual: residual,
        variance_relation: holds.then_some(stats.ratio_var > 1.0),
        mean_relation: holds.then_some(stats.ratio_mean >= 1.0 - RELATION_SLACK),
    }
}

/// Samples `P(t)` on `[0, horizon]` for L1 fits.
pub fn fit_target(traj: &Trajectory, stats: &ArrivalStats) -> Result<FitTarget> {
    let p = checked_p(traj)?;
    let horizon = traj.horizon()?;
    FitTarget::sample(|t| traj.absorption_rate(t) / p, horizon, stats.mean_t, stats.std_t)
}
