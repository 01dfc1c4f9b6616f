//! Absorptive systems `K = H − iD` and the contraction semigroup
//! `B_t = exp(−iKt/ħ)` they generate.
//!
//! The loss of norm `1 − ‖B_tψ‖²` is the probability that the particle has
//! been absorbed (detected) before `t`. The limit `R = lim B_t*B_t` carries
//! the part of the state that is never absorbed. It is computed twice, once
//! as the numerical limit over doubling horizons and once algebraically as
//! the projector onto the largest `K`-invariant subspace on which `D`
//! vanishes, and the two must agree.

use std::sync::OnceLock;

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::linops::{
    self, c64, check_matrix, check_psd, frobenius, hermitian_defect, hermitian_eigen, psd_sqrt,
    spectral_norm, ComplexMatrix, ComplexVector, SpectralFactorization, StateVector, C64,
};
use crate::ode::{self, OdeTolerance};

const HERMITIAN_TOL: f64 = 1e-12;
/// Successive-horizon Frobenius distance that counts as converged.
const LIMIT_STEP_TOL: f64 = 1e-10;
/// Required agreement between the limit and the algebraic projector.
const LIMIT_AGREEMENT_TOL: f64 = 1e-8;
/// Horizon cap, in natural time units `ħ/‖K‖`.
pub const HORIZON_CAP: f64 = 1e6;
/// Relative threshold on singular values when building the dark subspace.
const DARK_SUBSPACE_TOL: f64 = 1e-9;
/// Residual excess survival (relative to p) at which integrals are cut off.
pub const TAIL_TOL: f64 = 1e-12;

/// How `B_t` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropagationMode {
    /// Eigendecomposition when well conditioned, otherwise ODE integration.
    #[default]
    Auto,
    /// Always integrate the Schrödinger equation numerically.
    Ode,
}

#[derive(Debug, Clone)]
enum Propagator {
    Spectral(SpectralFactorization),
    Ode,
}

/// The asymptotic operator `R = lim_{t→∞} B_t*B_t`.
#[derive(Debug, Clone)]
pub struct AsymptoticOperator {
    pub r: ComplexMatrix,
    pub converged: bool,
    /// Horizon at which the doubling limit agreed with the algebraic projector.
    pub horizon: f64,
}

impl AsymptoticOperator {
    /// `⟨ψ|(1 − R)ψ⟩`.
    pub fn absorbed_weight(&self, psi: &ComplexVector) -> f64 {
        let rpsi = &self.r * psi;
        (psi.norm_squared() - psi.dotc(&rpsi).re).clamp(0.0, 1.0_f64.max(psi.norm_squared()))
    }

    /// `(1 − R)v`.
    pub fn complement(&self, v: &ComplexVector) -> ComplexVector {
        v - &self.r * v
    }
}

/// A validated absorptive system.
#[derive(Debug)]
pub struct AbsorptiveSystem {
    h: ComplexMatrix,
    d: ComplexMatrix,
    hbar: f64,
    k: ComplexMatrix,
    d_sqrt: ComplexMatrix,
    generator_norm: f64,
    propagator: Propagator,
    asymptotic: OnceLock<Result<AsymptoticOperator>>,
}

impl Clone for AbsorptiveSystem {
    fn clone(&self) -> Self {
        let asymptotic = OnceLock::new();
        if let Some(r) = self.asymptotic.get() {
            let _ = asymptotic.set(r.clone());
        }
        Self {
            h: self.h.clone(),
            d: self.d.clone(),
            hbar: self.hbar,
            k: self.k.clone(),
            d_sqrt: self.d_sqrt.clone(),
            generator_norm: self.generator_norm,
            propagator: self.propagator.clone(),
            asymptotic,
        }
    }
}

pub fn make_system(h: ComplexMatrix, d: ComplexMatrix, hbar: f64) -> Result<AbsorptiveSystem> {
    AbsorptiveSystem::new(h, d, hbar)
}

impl AbsorptiveSystem {
    pub fn new(h: ComplexMatrix, d: ComplexMatrix, hbar: f64) -> Result<Self> {
        Self::with_mode(h, d, hbar, PropagationMode::Auto)
    }

    pub fn with_mode(h: ComplexMatrix, d: ComplexMatrix, hbar: f64, mode: PropagationMode) -> Result<Self> {
        check_matrix(&h, "H")?;
        check_matrix(&d, "D")?;
        if d.nrows() != h.nrows() {
            return Err(Error::DimensionMismatch {
                what: "D",
                expected: h.nrows(),
                found: d.nrows(),
            });
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::NonpositiveParameter {
                name: "hbar",
                value: hbar,
            });
        }
        let defect = hermitian_defect(&h);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { what: "H", defect });
        }
        let defect = hermitian_defect(&d);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { what: "D", defect });
        }
        check_psd(&d, "D")?;
        let half = c64(0.5, 0.0);
        let h = (&h + h.adjoint()) * half;
        let d = (&d + d.adjoint()) * half;
        let d_sqrt = psd_sqrt(&d)?;
        let k = &h - &d * c64(0.0, 1.0);
        let generator_norm = spectral_norm(&k);

        let propagator = match mode {
            PropagationMode::Ode => Propagator::Ode,
            PropagationMode::Auto => match linops::spectral_factorize(&k) {
                Ok(f) => Propagator::Spectral(f),
                Err(Error::DefectiveMatrix { .. }) => Propagator::Ode,
                Err(e) => return Err(e),
            },
        };
        if let Propagator::Spectral(f) = &propagator {
            let max_im = f.eigenvalues.iter().map(|l| l.im).fold(f64::NEG_INFINITY, f64::max);
            if max_im > 1e-12 * generator_norm.max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidArgument(format!(
                    "generator has an amplifying eigenvalue (imaginary part {max_im:.3e})"
                )));
            }
        }

        Ok(Self {
            h,
            d,
            hbar,
            k,
            d_sqrt,
            generator_norm,
            propagator,
            asymptotic: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }
    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }
    pub fn d(&self) -> &ComplexMatrix {
        &self.d
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn k(&self) -> &ComplexMatrix {
        &self.k
    }
    pub fn d_sqrt(&self) -> &ComplexMatrix {
        &self.d_sqrt
    }
    pub fn generator_norm(&self) -> f64 {
        self.generator_norm
    }

    /// `None` when the ODE fallback is in force.
    pub fn factorization(&self) -> Option<&SpectralFactorization> {
        match &self.propagator {
            Propagator::Spectral(f) => Some(f),
            Propagator::Ode => None,
        }
    }

    /// `ħ/‖K‖`, the time scale of the dynamics (1 for `K = 0`).
    pub fn time_unit(&self) -> f64 {
        if self.generator_norm > 0.0 {
            self.hbar / self.generator_norm
        } else {
            1.0
        }
    }

    fn check_state(&self, v: &ComplexVector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "state",
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `B_t v` for an arbitrary vector.
    pub fn evolve_vector(&self, v: &ComplexVector, t: f64) -> Result<ComplexVector> {
        self.check_state(v)?;
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            return Ok(v.clone());
        }
        Ok(match &self.propagator {
            Propagator::Spectral(f) => spectral_apply(f, &(&f.inverse_vectors * v), t, self.hbar),
            Propagator::Ode => self.integrate(v, t),
        })
    }

    fn integrate(&self, v: &ComplexVector, t: f64) -> ComplexVector {
        let gen = &self.k * c64(0.0, -1.0 / self.hbar);
        ode::integrate(|y| &gen * y, v, t, self.generator_norm / self.hbar, OdeTolerance::default())
    }

    /// `B_t ψ`.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<ComplexVector> {
        self.evolve_vector(psi.as_vector(), t)
    }

    /// `‖B_tψ‖²`.
    pub fn survival(&self, psi: &StateVector, t: f64) -> Result<f64> {
        Ok(self.evolve(psi, t)?.norm_squared())
    }

    /// The matrix `B_t`.
    pub fn propagator(&self, t: f64) -> Result<ComplexMatrix> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let n = self.dim();
        Ok(match &self.propagator {
            Propagator::Spectral(f) => {
                let hbar = self.hbar;
                f.apply_function(|l| (l * c64(0.0, -t / hbar)).exp())
            }
            Propagator::Ode => {
                let mut b = ComplexMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = ComplexVector::zeros(n);
                    e[j] = c64(1.0, 0.0);
                    b.set_column(j, &self.integrate(&e, t));
                }
                b
            }
        })
    }

    /// The arrival-interval effect `F([t, s]) = B_t*B_t − B_s*B_s`.
    pub fn interval_operator(&self, t: f64, s: f64) -> Result<ComplexMatrix> {
        if s < t {
            return Err(Error::InvalidArgument(format!("empty interval [{t}, {s}]")));
        }
        let bt = self.propagator(t)?;
        let bs = self.propagator(s)?;
        Ok(bt.adjoint() * &bt - bs.adjoint() * &bs)
    }

    /// The projector onto the largest `D`-dark, `H`-invariant subspace.
    pub fn dark_projector(&self) -> ComplexMatrix {
        let n = self.dim();
        let scale = self.generator_norm.max(f64::MIN_POSITIVE);
        let tol = DARK_SUBSPACE_TOL * scale;
        let (values, vectors) = hermitian_eigen(&self.d);
        let kernel: Vec<usize> = (0..n).filter(|&i| values[i] <= tol).collect();
        let mut q = ComplexMatrix::from_fn(n, kernel.len(), |r, c| vectors[(r, kernel[c])]);
        while q.ncols() > 0 {
            let proj = &q * q.adjoint();
            let leak = (ComplexMatrix::identity(n, n) - proj) * &self.h * &q;
            let svd = SVD::new(leak, false, true);
            let v_t = svd.v_t.expect("requested v_t");
            let m = q.ncols();
            let null: Vec<usize> = (0..m).filter(|&i| svd.singular_values[i] <= tol).collect();
            if null.len() == m {
                break;
            }
            let basis = ComplexMatrix::from_fn(m, null.len(), |r, c| v_t[(null[c], r)].conj());
            q = &q * basis;
        }
        &q * q.adjoint()
    }

    /// `R = lim B_t*B_t`, cached after the first call.
    pub fn asymptotic_operator(&self) -> Result<AsymptoticOperator> {
        self.asymptotic.get_or_init(|| self.compute_asymptotic()).clone()
    }

    fn compute_asymptotic(&self) -> Result<AsymptoticOperator> {
        let algebraic = self.dark_projector();
        let unit = self.time_unit();
        let mut horizon = unit;
        let gram = |t: f64| -> Result<ComplexMatrix> {
            let b = self.propagator(t)?;
            Ok(b.adjoint() * b)
        };
        let mut previous = gram(horizon)?;
        let mut gap = f64::INFINITY;
        while horizon < HORIZON_CAP * unit {
            horizon *= 2.0;
            let current = gram(horizon)?;
            let step = frobenius(&(&current - &previous));
            gap = frobenius(&(&current - &algebraic));
            if step < LIMIT_STEP_TOL && gap < LIMIT_AGREEMENT_TOL {
                return Ok(AsymptoticOperator {
                    r: algebraic,
                    converged: true,
                    horizon,
                });
            }
            previous = current;
        }
        Err(Error::NonConvergent { horizon, gap })
    }

    /// `p = ⟨ψ|(1 − R)ψ⟩`.
    pub fn absorption_probability(&self, psi: &StateVector) -> Result<f64> {
        self.check_state(psi.as_vector())?;
        Ok(self.asymptotic_operator()?.absorbed_weight(psi.as_vector()))
    }

    /// `(Jψ)(t) = √(2/ħ)·D^{1/2}·B_tψ` (zero for negative `t`).
    pub fn dilation_trajectory(&self, psi: &StateVector, t: f64) -> Result<ComplexVector> {
        if t < 0.0 {
            self.check_state(psi.as_vector())?;
            return Ok(ComplexVector::zeros(self.dim()));
        }
        let phi = self.evolve(psi, t)?;
        Ok(&self.d_sqrt * phi * c64((2.0 / self.hbar).sqrt(), 0.0))
    }

    /// `C(t) = ⟨ψ̂|Û_tψ̂⟩`, the characteristic function of the dilated energy.
    pub fn characteristic_function(&self, psi: &StateVector, t: f64, r: &AsymptoticOperator) -> Result<C64> {
        let v = psi.as_vector();
        self.check_state(v)?;
        let p = r.absorbed_weight(v);
        if p < 1e-12 {
            return Err(Error::ZeroAbsorption(p));
        }
        let value = if t >= 0.0 {
            v.dotc(&r.complement(&self.evolve_vector(v, t)?))
        } else {
            self.evolve_vector(v, -t)?.dotc(&r.complement(v))
        };
        Ok(value / p)
    }

    /// Cached evaluator of `B_tψ` for repeated time points.
    pub fn trajectory<'a>(&'a self, psi: &StateVector) -> Result<Trajectory<'a>> {
        self.check_state(psi.as_vector())?;
        let asym = self.asymptotic_operator()?;
        let coefficients = self
            .factorization()
            .map(|f| &f.inverse_vectors * psi.as_vector());
        Ok(Trajectory {
            system: self,
            initial: psi.as_vector().clone(),
            coefficients,
            p: asym.absorbed_weight(psi.as_vector()),
            asymptotic: asym,
        })
    }
}

fn spectral_apply(f: &SpectralFactorization, coefficients: &ComplexVector, t: f64, hbar: f64) -> ComplexVector {
    let phases = ComplexVector::from_iterator(
        coefficients.len(),
        f.eigenvalues
            .iter()
            .zip(coefficients.iter())
            .map(|(l, c)| c * (l * c64(0.0, -t / hbar)).exp()),
    );
    &f.right_vectors * phases
}

/// `B_tψ` and derived scalar quantities for one initial state.
pub struct Trajectory<'a> {
    system: &'a AbsorptiveSystem,
    initial: ComplexVector,
    coefficients: Option<ComplexVector>,
    asymptotic: AsymptoticOperator,
    p: f64,
}

impl<'a> Trajectory<'a> {
    pub fn system(&self) -> &'a AbsorptiveSystem {
        self.system
    }

    pub fn absorption_probability(&self) -> f64 {
        self.p
    }

    pub fn asymptotic(&self) -> &AsymptoticOperator {
        &self.asymptotic
    }

    /// `B_tψ`, `t ≥ 0`.
    pub fn state(&self, t: f64) -> ComplexVector {
        match (&self.coefficients, self.system.factorization()) {
            (Some(c), Some(f)) => spectral_apply(f, c, t, self.system.hbar),
            _ if t <= 0.0 => self.initial.clone(),
            _ => self.system.integrate(&self.initial, t),
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        self.state(t).norm_squared()
    }

    /// `S(t) − lim S = ⟨B_tψ|(1 − R)B_tψ⟩`, computed without cancellation.
    pub fn excess_survival(&self, t: f64) -> f64 {
        let phi = self.state(t);
        phi.dotc(&self.asymptotic.complement(&phi)).re.max(0.0)
    }

    /// `‖(Jψ)(t)‖² = (2/ħ)⟨B_tψ|D B_tψ⟩ = −dS/dt`.
    pub fn absorption_rate(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let phi = self.state(t);
        let root = self.system.d_sqrt() * phi;
        2.0 / self.system.hbar * root.norm_squared()
    }

    /// First `T` on the doubling ladder with excess survival below
    /// `TAIL_TOL · p`.
    pub fn horizon(&self) -> Result<f64> {
        let unit = self.system.time_unit();
        let mut t = unit;
        let target = TAIL_TOL * self.p;
        while self.excess_survival(t) >= target {
            if t > HORIZON_CAP * unit {
                return Err(Error::NonConvergent {
                    horizon: t,
                    gap: self.excess_survival(t),
                });
            }
            t *= 2.0;
        }
        Ok(t)
    }
}
