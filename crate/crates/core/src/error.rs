use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("{what} contains non-finite entries")]
    NonFinite { what: &'static str },
    #[error("dimension mismatch: {what} has dim {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} is not Hermitian (defect {defect:.3e})")]
    NotHermitian { what: &'static str, defect: f64 },
    #[error("{what} is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive {
        what: &'static str,
        min_eigenvalue: f64,
    },
    #[error("state vector is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("eigenvector matrix condition {condition:.3e} exceeds cap {cap:.1e}")]
    DefectiveMatrix { condition: f64, cap: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("asymptotic operator did not converge up to horizon {horizon:.3e} (gap {gap:.3e})")]
    NonConvergent { horizon: f64, gap: f64 },
    #[error("absorption probability {0:.3e} is too small")]
    ZeroAbsorption(f64),
    #[error("moment diverges: decay rate {rate:.3e} with non-negligible weight")]
    DivergentMoment { rate: f64 },
    #[error("standing assumption D psi = 0 violated: |D psi| = {residual:.3e}")]
    AssumptionViolated { residual: f64 },
    #[error("argument {0} outside the supported range")]
    RangeExceeded(f64),
    #[error("scale must be positive, got {0}")]
    NonpositiveScale(f64),
    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),
    #[error("parameter {name} must be positive, got {value}")]
    NonpositiveParameter { name: &'static str, value: f64 },
    #[error(
        "adiabatic elimination invalid: |omega23| = {omega23:.4e} exceeds gamma34/5 = {limit:.4e}"
    )]
    RegimeViolation { omega23: f64, limit: f64 },
    #[error("horizon {t_max:.4e} too small: residual survival {residual:.3e}, try t_max >= {suggested:.4e}")]
    HorizonTooSmall {
        t_max: f64,
        residual: f64,
        suggested: f64,
    },
    #[error("grid too coarse: raw {raw} vs extrapolated {extrapolated}")]
    GridTooCoarse { raw: f64, extrapolated: f64 },
    #[error("ground state is degenerate (gap {0:.3e})")]
    DegenerateGroundState(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
