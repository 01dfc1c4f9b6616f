//! Embedded Dormand–Prince 5(4) integrator for complex linear systems
//! `dψ/dt = f(ψ)`, used when the eigendecomposition of the generator is not
//! trustworthy.

use crate::linops::{c64, ComplexVector, C64};

#[inline]
fn r(x: f64) -> C64 {
    c64(x, 0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-13,
        }
    }
}

// Butcher tableau, Dormand & Prince (1980).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates from 0 to `t_end` starting at `y0`. `rate` is an estimate of the
/// generator norm used to pick the first step.
pub fn integrate<F>(f: F, y0: &ComplexVector, t_end: f64, rate: f64, tol: OdeTolerance) -> ComplexVector
where
    F: Fn(&ComplexVector) -> ComplexVector,
{
    let mut y = y0.clone();
    if t_end <= 0.0 {
        return y;
    }
    let mut t = 0.0;
    let mut h = if rate > 0.0 { (0.1 / rate).min(t_end) } else { t_end };
    let mut k1 = f(&y);
    let mut rejected_last = false;

    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let k2 = f(&(&y + &k1 * r(h * A21)));
        let k3 = f(&(&y + &k1 * r(h * A31) + &k2 * r(h * A32)));
        let k4 = f(&(&y + &k1 * r(h * A41) + &k2 * r(h * A42) + &k3 * r(h * A43)));
        let k5 = f(&(&y + &k1 * r(h * A51) + &k2 * r(h * A52) + &k3 * r(h * A53) + &k4 * r(h * A54)));
        let k6 = f(&(&y
            + &k1 * r(h * A61)
            + &k2 * r(h * A62)
            + &k3 * r(h * A63)
            + &k4 * r(h * A64)
            + &k5 * r(h * A65)));
        let y_new = &y + (&k1 * r(B1) + &k3 * r(B3) + &k4 * r(B4) + &k5 * r(B5) + &k6 * r(B6)) * r(h);
        let k7 = f(&y_new);
        let err_vec = (&k1 * r(E1) + &k3 * r(E3) + &k4 * r(E4) + &k5 * r(E5) + &k6 * r(E6) + &k7 * r(E7)) * r(h);

        let mut err = 0.0;
        for i in 0..y.len() {
            let sc = tol.abs + tol.rel * y[i].norm().max(y_new[i].norm());
            err += (err_vec[i].norm() / sc).powi(2);
        }
        let err = (err / y.len() as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= if rejected_last { factor.min(1.0) } else { factor };
            rejected_last = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            rejected_last = true;
        }
        debug_assert!(h > 0.0);
    }
    y
}
