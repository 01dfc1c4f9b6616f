//! Finite-difference spectra of `−d²/dt² + t²` and of `−d²/dt² + t` with a
//! wall at the origin, and a checker for the gapped-ground-state lemma.

use nalgebra::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linops::{
    c64, check_matrix, hermitian_defect, hermitian_eigen, spectral_norm, trace_norm, ComplexMatrix, ComplexVector,
};
use crate::minimality::{airy, constants};

pub const MIN_GRID_POINTS: usize = 100;
/// Largest allowed gap between raw and extrapolated eigenvalues.
pub const RICHARDSON_TOL: f64 = 1e-2;
/// Slack on both inequalities of the gap lemma.
pub const GAP_SLACK: f64 = 1e-9;

/// `n` interior points strictly between `t_min` and `t_max`, Dirichlet at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if n < MIN_GRID_POINTS {
            return Err(Error::InvalidArgument(format!("grid needs at least {MIN_GRID_POINTS} points, got {n}")));
        }
        if !(t_max > t_min) || !t_min.is_finite() || !t_max.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid interval [{t_min}, {t_max}]")));
        }
        Ok(Self { t_min, t_max, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n + 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.t_min + (i + 1) as f64 * self.spacing()
    }

    /// Same interval at half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n + 1,
            ..*self
        }
    }

    /// Oscillator default: 2000 points on `[−10, 10]`.
    pub fn oscillator_default() -> Self {
        Self {
            t_min: -10.0,
            t_max: 10.0,
            n: 2000,
        }
    }

    /// Wall default: 4000 points on `[0, 20]`.
    pub fn wall_default() -> Self {
        Self {
            t_min: 0.0,
            t_max: 20.0,
            n: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    /// `t²` on a symmetric interval.
    Oscillator,
    /// `t` on `[0, t_max]`.
    WallLinear,
}

impl Potential {
    fn value(self, t: f64) -> f64 {
        match self {
            Potential::Oscillator => t * t,
            Potential::WallLinear => t,
        }
    }

    fn check(self, grid: &Grid) -> Result<()> {
        match self {
            Potential::Oscillator => {
                if (grid.t_min + grid.t_max).abs() > 1e-12 * grid.t_max.abs() || grid.t_max < 8.0 {
                    return Err(Error::InvalidArgument(format!(
                        "oscillator grid must be symmetric with t_max ≥ 8, got [{}, {}]",
                        grid.t_min, grid.t_max
                    )));
                }
            }
            Potential::WallLinear => {
                if grid.t_min != 0.0 || grid.t_max < 15.0 {
                    return Err(Error::InvalidArgument(format!(
                        "wall grid must be [0, t_max] with t_max ≥ 15, got [{}, {}]",
                        grid.t_min, grid.t_max
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Symmetric tridiagonal matrix: `diag` and the constant off-diagonal `off`.
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn discretize(potential: Potential, grid: &Grid) -> Self {
        let h = grid.spacing();
        let inv = 1.0 / (h * h);
        Self {
            diag: (0..grid.n).map(|i| 2.0 * inv + potential.value(grid.point(i))).collect(),
            off: -inv,
        }
    }

    /// Number of eigenvalues below `x` (Sturm sequence of the `LDLᵀ` pivots).
    fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = d - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn lowest(&self, k: usize) -> Vec<f64> {
        let lo0 = self.diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * self.off.abs();
        let hi0 = self.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * self.off.abs();
        (0..k)
            .map(|j| {
                let (mut lo, mut hi) = (lo0, hi0);
                while hi - lo > 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.count_below(mid) > j {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Solves `(T − σ)x = b` by the Thomas algorithm.
    fn solve_shifted(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut denom = self.diag[0] - sigma;
        c[0] = self.off / denom;
        x[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - sigma - self.off * c[i - 1];
            if denom == 0.0 {
                denom = f64::EPSILON * self.off.abs();
            }
            c[i] = self.off / denom;
            x[i] = (b[i] - self.off * x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    }

    fn eigenvector(&self, eigenvalue: f64) -> Vec<f64> {
        let n = self.diag.len();
        let sigma = eigenvalue - 1e-10 * eigenvalue.abs().max(1.0);
        let mut v = vec![1.0; n];
        for _ in 0..4 {
            v = self.solve_shifted(sigma, &v);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub potential: Potential,
    pub grid: Grid,
    /// Eigenvalues at the grid spacing `h`.
    pub raw: Vec<f64>,
    /// Eigenvalues at spacing `h/2`.
    pub refined: Vec<f64>,
    /// `(4·refined − raw)/3`.
    pub extrapolated: Vec<f64>,
}

/// Lowest `k` eigenvalues at spacings `h` and `h/2`, with Richardson extrapolation.
pub fn spectrum_report(potential: Potential, grid: &Grid, k: usize) -> Result<SpectrumReport> {
    potential.check(grid)?;
    if k == 0 || k > grid.n {
        return Err(Error::InvalidArgument(format!("cannot take {k} eigenvalues of a {}-point grid", grid.n)));
    }
    let raw = Tridiagonal::discretize(potential, grid).lowest(k);
    let refined = Tridiagonal::discretize(potential, &grid.refined()).lowest(k);
    let extrapolated: Vec<f64> = raw.iter().zip(&refined).map(|(r, f)| (4.0 * f - r) / 3.0).collect();
    for (r, e) in raw.iter().zip(&extrapolated) {
        if (r - e).abs() > RICHARDSON_TOL {
            return Err(Error::GridTooCoarse {
                raw: *r,
                extrapolated: *e,
            });
        }
    }
    Ok(SpectrumReport {
        potential,
        grid: *grid,
        raw,
        refined,
        extrapolated,
    })
}

/// Lowest `k` eigenvalues of `−d²/dt² + t²` (extrapolated); exact values `2n+1`.
pub fn oscillator_spectrum(grid: &Grid, k: usize) -> Result<Vec<f64>> {
    Ok(spectrum_report(Potential::Oscillator, grid, k)?.extrapolated)
}

/// Lowest `k` eigenvalues of `−d²/dt² + t` on `[0, t_max]` (extrapolated);
/// exact values `−Z_n`.
pub fn wall_linear_spectrum(grid: &Grid, k: usize) -> Result<Vec<f64>> {
    Ok(spectrum_report(Potential::WallLinear, grid, k)?.extrapolated)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateProfile {
    pub t: Vec<f64>,
    /// Discrete ground state normalized so that `Σψ²h = 1`, positive.
    pub psi: Vec<f64>,
    /// `Ai(t + Z₁)/|Ai'(Z₁)|` at the same points.
    pub airy: Vec<f64>,
    pub max_deviation: f64,
}

/// Ground state of the wall problem compared pointwise with the Airy profile.
pub fn wall_linear_ground_state(grid: &Grid) -> Result<GroundStateProfile> {
    Potential::WallLinear.check(grid)?;
    let tri = Tridiagonal::discretize(Potential::WallLinear, grid);
    let e0 = tri.lowest(1)[0];
    let mut psi = tri.eigenvector(e0);
    let h = grid.spacing();
    let sign = if psi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let scale = sign / h.sqrt();
    psi.iter_mut().for_each(|x| *x *= scale);
    let k = constants();
    let norm = k.airy_norm.sqrt();
    let t: Vec<f64> = (0..grid.n).map(|i| grid.point(i)).collect();
    let mut reference = Vec::with_capacity(grid.n);
    for &ti in &t {
        let x = ti - k.y0;
        reference.push(if x > airy::AIRY_RANGE { 0.0 } else { airy::airy(x)?.ai / norm });
    }
    let max_deviation = psi.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(GroundStateProfile {
        t,
        psi,
        airy: reference,
        max_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapLemmaReport {
    pub a0: f64,
    pub a1: f64,
    /// `tr(ρA) − a₀`.
    pub alpha: f64,
    /// `‖ρ − |φ₀⟩⟨φ₀|‖₁`.
    pub lhs: f64,
    /// `2√(α/(a₁ − a₀))`.
    pub rhs: f64,
    /// `1 − ⟨φ₀|ρ|φ₀⟩`.
    pub fidelity_deficit: f64,
    /// `α/(a₁ − a₀)`.
    pub fidelity_bound: f64,
    pub holds: bool,
}

/// Evaluates both sides of the trace-norm and fidelity bounds for `ρ` near
/// the ground state of `A`.
pub fn gap_lemma_check(a: &ComplexMatrix, rho: &ComplexMatrix) -> Result<GapLemmaReport> {
    check_matrix(a, "A")?;
    check_matrix(rho, "rho")?;
    let n = a.nrows();
    if rho.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "rho",
            expected: n,
            found: rho.nrows(),
        });
    }
    for (m, what) in [(a, "A"), (rho, "rho")] {
        let defect = hermitian_defect(m);
        if defect > 1e-10 {
            return Err(Error::NotHermitian { what, defect });
        }
    }
    let (rho_values, _) = hermitian_eigen(rho);
    if rho_values[0] < -1e-10 {
        return Err(Error::NotPositive {
            what: "rho",
            min_eigenvalue: rho_values[0],
        });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("rho must have unit trace, got {tr}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("gap lemma needs dimension at least 2".into()));
    }
    let (values, vectors) = hermitian_eigen(a);
    let (a0, a1) = (values[0], values[1]);
    let gap = a1 - a0;
    if gap <= 1e-10 * spectral_norm(a).max(1.0) {
        return Err(Error::DegenerateGroundState(gap));
    }
    let phi0: ComplexVector = vectors.column(0).into_owned();
    let alpha = (rho * a).trace().re - a0;
    let ground = &phi0 * phi0.adjoint();
    let lhs = trace_norm(&(rho - ground))?;
    let rhs = 2.0 * (alpha.max(0.0) / gap).sqrt();
    let fidelity_deficit = 1.0 - phi0.dotc(&(rho * &phi0)).re;
    let fidelity_bound = alpha / gap;
    Ok(GapLemmaReport {
        a0,
        a1,
        alpha,
        lhs,
        rhs,
        fidelity_deficit,
        fidelity_bound,
        holds: lhs <= rhs + GAP_SLACK && fidelity_deficit <= fidelity_bound + GAP_SLACK,
    })
}

fn gaussian_c64(rng: &mut ChaCha20Rng) -> nalgebra::Complex<f64> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im)
}

/// Random Hermitian `A` and a density matrix `ρ` drawn to land at varying
/// distances from the ground state of `A`.
pub fn random_gap_instance(dim: usize, seed: u64) -> (ComplexMatrix, ComplexMatrix) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| gaussian_c64(&mut rng));
    let a = (&g + g.adjoint()) * c64(0.5, 0.0);
    let (_, vectors) = hermitian_eigen(&a);
    let phi0: ComplexVector = vectors.column(0).into_owned();

    // Mix the ground state with a random state of random rank.
    let rank = rng.random_range(1..=dim);
    let w = ComplexMatrix::from_fn(dim, rank, |_, _| gaussian_c64(&mut rng));
    let sigma = &w * w.adjoint();
    let sigma = &sigma / sigma.trace();
    let weight = 10f64.powf(-6.0 * rng.random::<f64>());
    let mut rho = &phi0 * phi0.adjoint() * c64(1.0 - weight, 0.0) + sigma * c64(weight, 0.0);
    if rng.random::<f64>() < 0.3 {
        // Occasionally a pure state rotated slightly away from φ₀.
        let kick = ComplexVector::from_fn(dim, |_, _| gaussian_c64(&mut rng)) * c64(weight.sqrt(), 0.0);
        let v = &phi0 + kick;
        let v = &v / c64(v.norm(), 0.0);
        rho = &v * v.adjoint();
    }
    if rng.random::<f64>() < 0.1 {
        let q = QR::new(ComplexMatrix::from_fn(dim, dim, |_, _| gaussian_c64(&mut rng))).q();
        rho = &q * rho * q.adjoint();
    }
    (a, (&rho + rho.adjoint()) * c64(0.5, 0.0))
}
