//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here works on small dense matrices (dimension up to a few
//! hundred). The generator `K = H - iD` of an absorptive system is non-normal,
//! so the eigendecomposition keeps the inverse eigenvector matrix and a
//! condition estimate next to the eigenvalues; callers fall back to ODE
//! propagation when the condition is too large to trust.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Default cap on `‖V‖·‖V⁻¹‖` above which a factorization is rejected.
pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

const NORMALIZATION_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;
const PSD_REJECT: f64 = 1e-8;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Checks squareness and finiteness, the invariants of every matrix input.
pub fn check_matrix(m: &ComplexMatrix, what: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{what} has dimension zero")));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { what });
    }
    Ok(())
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// `‖M − M†‖_F / ‖M‖_F`, zero for the zero matrix.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let scale = frobenius(m);
    if scale == 0.0 {
        return 0.0;
    }
    frobenius(&(m - m.adjoint())) / scale
}

pub fn is_hermitian(m: &ComplexMatrix, rel_tol: f64) -> bool {
    m.is_square() && hermitian_defect(m) <= rel_tol
}

/// `⟨v|A v⟩`.
pub fn expectation(a: &ComplexMatrix, v: &ComplexVector) -> C64 {
    v.dotc(&(a * v))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// The input is symmetrized first; callers validate Hermiticity.
pub fn hermitian_eigen(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let sym = (a + a.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// A normalized complex amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(ComplexVector);

impl StateVector {
    /// Accepts `amplitudes` only if they already have unit norm (to 1e-12).
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        check_vector(&amplitudes)?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(amplitudes))
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        check_vector(&amplitudes)?;
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(amplitudes.unscale(norm)))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = ComplexVector::zeros(dim);
        v[index] = c64(1.0, 0.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &ComplexVector {
        &self.0
    }

    pub fn into_vector(self) -> ComplexVector {
        self.0
    }
}

fn check_vector(v: &ComplexVector) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("state vector is empty".into()));
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite {
            what: "state vector",
        });
    }
    Ok(())
}

/// Right eigenvectors (as columns), their inverse and eigenvalues of a
/// diagonalizable matrix, `M = V · diag(λ) · V⁻¹`.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    /// Sorted by imaginary part descending, then real part ascending.
    pub eigenvalues: Vec<C64>,
    pub right_vectors: ComplexMatrix,
    pub inverse_vectors: ComplexMatrix,
    /// `‖V‖₂ · ‖V⁻¹‖₂`.
    pub condition: f64,
}

impl SpectralFactorization {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let lambda = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(self.eigenvalues.clone()));
        &self.right_vectors * lambda * &self.inverse_vectors
    }

    /// `V · diag(f(λ)) · V⁻¹`.
    pub fn apply_function(&self, f: impl Fn(C64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let mut scaled = self.right_vectors.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let fk = f(lambda);
            for r in 0..n {
                scaled[(r, k)] *= fk;
            }
        }
        scaled * &self.inverse_vectors
    }
}

fn eigen_order(a: &C64, b: &C64) -> Ordering {
    b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re))
}

pub fn spectral_factorize(m: &ComplexMatrix) -> Result<SpectralFactorization> {
    spectral_factorize_with_cap(m, DEFAULT_CONDITION_CAP)
}

pub fn spectral_factorize_with_cap(m: &ComplexMatrix, cap: f64) -> Result<SpectralFactorization> {
    check_matrix(m, "matrix")?;
    let n = m.nrows();
    let scale = frobenius(m);
    let defective = |condition: f64| Error::DefectiveMatrix { condition, cap };

    let (q, t) = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| defective(f64::INFINITY))?
        .unpack();

    let small = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut columns = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        // Back-substitution for (T − λ_k)y = 0 with y_k = 1, y_j = 0 for j > k.
        let mut y = ComplexVector::zeros(n);
        y[k] = c64(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = c64(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < small {
                denom = c64(small, 0.0);
            }
            y[i] = -acc / denom;
        }
        let mut v = &q * y;
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(defective(f64::INFINITY));
        }
        v.unscale_mut(norm);
        // Fix the phase: largest component real and positive.
        let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        let phase = pivot.conj() / pivot.norm();
        v *= phase;
        eigenvalues.push(lambda);
        columns.push(v);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigen_order(&eigenvalues[i], &eigenvalues[j]));
    let eigenvalues: Vec<C64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let right_vectors = ComplexMatrix::from_fn(n, n, |r, c| columns[order[c]][r]);
    let inverse_vectors = right_vectors
        .clone()
        .try_inverse()
        .ok_or_else(|| defective(f64::INFINITY))?;
    let condition = spectral_norm(&right_vectors) * spectral_norm(&inverse_vectors);
    if !condition.is_finite() || condition > cap {
        return Err(defective(condition));
    }

    let fact = SpectralFactorization {
        eigenvalues,
        right_vectors,
        inverse_vectors,
        condition,
    };
    let residual = frobenius(&(fact.reconstruct() - m));
    if residual > 1e-10 * condition * scale.max(f64::MIN_POSITIVE) {
        return Err(defective(condition));
    }
    Ok(fact)
}

/// Hermitian square root of a positive semidefinite matrix.
///
/// Slightly negative eigenvalues (roundoff in outer-product sums) are clamped
/// to zero; anything below `−1e−8·max(1, ‖A‖)` is rejected.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_matrix(a, "matrix")?;
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            what: "matrix",
            defect,
        });
    }
    let (values, vectors) = hermitian_eigen(a);
    let scale = values
        .iter()
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let min = values.first().copied().unwrap_or(0.0);
    if min < -PSD_REJECT * scale {
        return Err(Error::NotPositive {
            what: "matrix",
            min_eigenvalue: min,
        });
    }
    let roots: Vec<C64> = values
        .iter()
        .map(|&v| c64(v.max(0.0).sqrt(), 0.0))
        .collect();
    let s = &vectors * ComplexMatrix::from_diagonal(&ComplexVector::from_vec(roots)) * vectors.adjoint();
    Ok((&s + s.adjoint()) * c64(0.5, 0.0))
}

/// Checks that `a` is Hermitian positive semidefinite under the same
/// tolerances as [`psd_sqrt`], returning the smallest eigenvalue.
pub fn check_psd(a: &ComplexMatrix, what: &'static str) -> Result<f64> {
    check_matrix(a, what)?;
    let defect = hermitian_defect(a);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { what, defect });
    }
    let (values, _) = hermitian_eigen(a);
    let scale = values.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let min = values[0];
    if min < -PSD_REJECT * scale {
        return Err(Error::NotPositive {
            what,
            min_eigenvalue: min,
        });
    }
    Ok(min)
}

/// Sum of singular values.
pub fn trace_norm(x: &ComplexMatrix) -> Result<f64> {
    check_matrix(x, "matrix")?;
    Ok(SVD::new(x.clone(), false, false).singular_values.sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: [[C64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |r, c| a[r][c])
    }

    #[test]
    fn diagonal_factorization_is_trivial() {
        let m = m2([[c64(1.0, 0.0), c64(0.0, 0.0)], [c64(0.0, 0.0), c64(0.0, 2.0)]]);
        let f = spectral_factorize(&m).unwrap();
        // imaginary part descending puts 2i first
        assert!((f.eigenvalues[0] - c64(0.0, 2.0)).norm() < 1e-14);
        assert!((f.eigenvalues[1] - c64(1.0, 0.0)).norm() < 1e-14);
        for k in 0..2 {
            let col = f.right_vectors.column(k);
            assert!((col.norm() - 1.0).abs() < 1e-14);
            assert_eq!(col.iter().filter(|z| z.norm() > 1e-14).count(), 1);
        }
        assert!((f.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_level_generator_eigenvalues() {
        // λ² + i√2 λ − 1 = 0  ⇒  λ = (±2 − i·2)/(2√2) = (±1 − i)/√2
        let s = std::f64::consts::SQRT_2;
        let disc = (c64(0.0, s) * c64(0.0, s) + c64(4.0, 0.0)).sqrt();
        let r1 = (c64(0.0, -s) + disc) * 0.5;
        let r2 = (c64(0.0, -s) - disc) * 0.5;
        assert!((r1 - c64(1.0 / s, -1.0 / s)).norm() < 1e-15);
        assert!((r2 - c64(-1.0 / s, -1.0 / s)).norm() < 1e-15);

        let m = m2([[c64(0.0, 0.0), c64(1.0, 0.0)], [c64(1.0, 0.0), c64(0.0, -s)]]);
        let f = spectral_factorize(&m).unwrap();
        // equal imaginary parts: real part ascending
        assert!((f.eigenvalues[0] - r2).norm() < 1e-12);
        assert!((f.eigenvalues[1] - r1).norm() < 1e-12);
    }

    #[test]
    fn nilpotent_jordan_block_is_rejected() {
        let m = m2([[c64(0.0, 0.0), c64(1.0, 0.0)], [c64(0.0, 0.0), c64(0.0, 0.0)]]);
        assert!(matches!(spectral_factorize(&m), Err(Error::DefectiveMatrix { .. })));
    }

    #[test]
    fn non_square_is_rejected() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(spectral_factorize(&m), Err(Error::NotSquare { .. })));
        let mut bad = ComplexMatrix::identity(2, 2);
        bad[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(matches!(trace_norm(&bad), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn psd_sqrt_diagonal_cases() {
        let id = ComplexMatrix::identity(3, 3);
        assert!(frobenius(&(psd_sqrt(&id).unwrap() - &id)) < 1e-14);
        let d = m2([[c64(0.0, 0.0), c64(0.0, 0.0)], [c64(0.0, 0.0), c64(4.0, 0.0)]]);
        let expected = m2([[c64(0.0, 0.0), c64(0.0, 0.0)], [c64(0.0, 0.0), c64(2.0, 0.0)]]);
        assert!(frobenius(&(psd_sqrt(&d).unwrap() - expected)) < 1e-14);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite_and_non_hermitian() {
        let d = m2([[c64(1.0, 0.0), c64(0.0, 0.0)], [c64(0.0, 0.0), c64(-0.1, 0.0)]]);
        assert!(matches!(psd_sqrt(&d), Err(Error::NotPositive { .. })));
        let nh = m2([[c64(1.0, 0.0), c64(1.0, 0.0)], [c64(0.0, 0.0), c64(1.0, 0.0)]]);
        assert!(matches!(psd_sqrt(&nh), Err(Error::NotHermitian { .. })));
        // roundoff-level negativity is clamped
        let tiny = m2([[c64(1.0, 0.0), c64(0.0, 0.0)], [c64(0.0, 0.0), c64(-1e-13, 0.0)]]);
        let s = psd_sqrt(&tiny).unwrap();
        assert_eq!(s[(1, 1)], c64(0.0, 0.0));
    }

    #[test]
    fn trace_norm_simple_cases() {
        assert!((trace_norm(&ComplexMatrix::identity(4, 4)).unwrap() - 4.0).abs() < 1e-13);
        let u = ComplexVector::from_vec(vec![c64(0.6, 0.0), c64(0.0, 0.8)]);
        let v = ComplexVector::from_vec(vec![c64(0.0, 1.0), c64(0.0, 0.0)]);
        let rank_one = &u * v.adjoint();
        assert!((trace_norm(&rank_one).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn state_vector_validation() {
        let v = ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(1.0, 0.0)]);
        assert!(matches!(StateVector::new(v.clone()), Err(Error::NotNormalized { .. })));
        let s = StateVector::normalized(v).unwrap();
        assert!((s.as_vector().norm() - 1.0).abs() < 1e-15);
        assert!(StateVector::normalized(ComplexVector::zeros(2)).is_err());
    }
}
