//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the propagators, quadratures or special functions
//! of the library under test.

#![allow(dead_code)]

use arrival_core::linops::{c64, ComplexMatrix, ComplexVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| gaussian(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let a = random_matrix(rng, n);
    (&a + a.adjoint()) * c64(0.5, 0.0)
}

pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> ComplexVector {
    let v = ComplexVector::from_fn(n, |_, _| gaussian(rng));
    &v / c64(v.norm(), 0.0)
}

/// Random unitary by Gram–Schmidt on Gaussian columns.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let mut q = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = ComplexVector::from_fn(n, |_, _| gaussian(rng));
        for k in 0..j {
            let col = q.column(k).into_owned();
            let proj = col.dotc(&v);
            v -= col * proj;
        }
        let v = &v / c64(v.norm(), 0.0);
        q.set_column(j, &v);
    }
    q
}

pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let w = random_matrix(rng, n);
    let rho = &w * w.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Classical fixed-step RK4 for `dψ/dt = −iKψ/ħ`.
pub fn rk4(k: &ComplexMatrix, hbar: f64, psi: &ComplexVector, t: f64, steps: usize) -> ComplexVector {
    let gen = k * c64(0.0, -1.0 / hbar);
    let h = c64(t / steps as f64, 0.0);
    let half = h * 0.5;
    let mut y = psi.clone();
    for _ in 0..steps {
        let k1 = &gen * &y;
        let k2 = &gen * (&y + &k1 * half);
        let k3 = &gen * (&y + &k2 * half);
        let k4 = &gen * (&y + &k3 * h);
        y += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * (h / 6.0);
    }
    y
}

/// Recursive adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Simpson on `[0, t_end]` split into unit-ish panels.
pub fn simpson_panels<F: Fn(f64) -> f64>(f: &F, t_end: f64, panels: usize, tol: f64) -> f64 {
    let w = t_end / panels as f64;
    (0..panels)
        .map(|i| simpson(f, i as f64 * w, (i + 1) as f64 * w, tol / panels as f64))
        .sum()
}

/// Two-level model moments for `H = ħ/2[[0,Ω],[Ω,0]]`, `D = ħ/2 diag(0,γ)`,
/// `ψ = (1,0)`; obtained symbolically from the Lyapunov equations
/// `iK*X − iXK = −Y`.
pub fn two_level_mean(omega: f64, gamma: f64) -> f64 {
    (2.0 * omega * omega + gamma * gamma) / (omega * omega * gamma)
}

pub fn two_level_variance(omega: f64, gamma: f64) -> f64 {
    let (o2, g2) = (omega * omega, gamma * gamma);
    (4.0 * o2 * o2 - 2.0 * o2 * g2 + g2 * g2) / (o2 * o2 * g2)
}

pub fn two_level_matrices(omega: f64, gamma: f64, hbar: f64) -> (ComplexMatrix, ComplexMatrix) {
    let z = c64(0.0, 0.0);
    let h = ComplexMatrix::from_row_slice(2, 2, &[z, c64(hbar * omega / 2.0, 0.0), c64(hbar * omega / 2.0, 0.0), z]);
    let d = ComplexMatrix::from_row_slice(2, 2, &[z, z, z, c64(hbar * gamma / 2.0, 0.0)]);
    (h, d)
}

/// Airy function from its Maclaurin series, summed with many terms; only
/// trustworthy for moderate `|x|`.
pub fn airy_maclaurin(x: f64) -> (f64, f64) {
    let ai0 = 1.0 / (3f64.powf(2.0 / 3.0) * libm::tgamma(2.0 / 3.0));
    let aip0 = -1.0 / (3f64.powf(1.0 / 3.0) * libm::tgamma(1.0 / 3.0));
    // f = Σ 3^k (1/3)_k x^{3k}/(3k)!, g = Σ 3^k (2/3)_k x^{3k+1}/(3k+1)!
    let (mut f, mut g, mut fp, mut gp) = (1.0, x, 0.0, 1.0);
    let (mut tf, mut tg) = (1.0, x);
    for k in 1..200 {
        let kf = k as f64;
        tf *= x * x * x / ((3.0 * kf - 1.0) * (3.0 * kf));
        tg *= x * x * x / ((3.0 * kf) * (3.0 * kf + 1.0));
        f += tf;
        g += tg;
        fp += tf * 3.0 * kf / x;
        gp += tg * (3.0 * kf + 1.0) / x;
        if tf.abs() + tg.abs() < 1e-30 {
            break;
        }
    }
    (ai0 * f + aip0 * g, ai0 * fp + aip0 * gp)
}
