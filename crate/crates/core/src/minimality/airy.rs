//! Airy function of the first kind and its derivative on `[-50, 50]`.
//!
//! Near the origin the Maclaurin series is summed directly. For `x ≥ 8` the
//! decaying asymptotic expansion is accurate to roundoff. In between, and on
//! the far negative axis where the oscillatory expansion is too coarse, values
//! are continued from tabulated anchors with exact Taylor steps of the Airy
//! equation `y'' = x·y`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

pub const AIRY_RANGE: f64 = 50.0;

/// Ai(0) = 1/(3^{2/3} Γ(2/3)).
const AI0: f64 = 0.355_028_053_887_817_24;
/// Ai'(0) = −1/(3^{1/3} Γ(1/3)).
const AIP0: f64 = -0.258_819_403_792_806_8;

const ANCHOR_STEP: f64 = 0.5;
const ANCHOR_MIN: f64 = -AIRY_RANGE;
const ASYMPTOTIC_FROM: f64 = 8.0;
const MACLAURIN_MIN: f64 = -6.0;
const MACLAURIN_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AiryEval {
    pub ai: f64,
    pub ai_prime: f64,
}

/// Advances `(y, y')` of a solution of `y'' = x·y` from `x0` to `x0 + h`
/// by summing its Taylor series.
fn taylor_step(x0: f64, y: f64, yp: f64, h: f64) -> (f64, f64) {
    // a_{k+2}(k+1)(k+2) = x0·a_k + a_{k-1}
    let (mut a_km1, mut a_k, mut a_kp1) = (0.0, y, yp);
    let mut hk = 1.0; // h^k
    let mut value = y + yp * h;
    let mut deriv = yp;
    let mut quiet = 0;
    for k in 0..400 {
        let a_kp2 = (x0 * a_k + a_km1) / ((k + 1) as f64 * (k + 2) as f64);
        let hk1 = hk * h; // h^{k+1}
        let hk2 = hk1 * h; // h^{k+2}
        let dv = a_kp2 * hk2;
        let dd = (k + 2) as f64 * a_kp2 * hk1;
        value += dv;
        deriv += dd;
        let scale = value.abs() + deriv.abs() + f64::MIN_POSITIVE;
        if dv.abs() + dd.abs() <= 1e-18 * scale {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        a_km1 = a_k;
        a_k = a_kp1;
        a_kp1 = a_kp2;
        hk = hk1;
    }
    (value, deriv)
}

fn asymptotic_positive(x: f64) -> AiryEval {
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let pref = (-zeta).exp() / (2.0 * PI.sqrt());
    let q = x.sqrt().sqrt();
    let (mut su, mut sv) = (1.0, 1.0);
    let mut u = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        let term = u / zeta.powi(k);
        if term.abs() > last || term.abs() < 1e-18 {
            break;
        }
        last = term.abs();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        su += sign * term;
        sv += sign * v / zeta.powi(k);
    }
    AiryEval {
        ai: pref / q * su,
        ai_prime: -pref * q * sv,
    }
}

fn maclaurin(x: f64) -> AiryEval {
    let (ai, ai_prime) = taylor_step(0.0, AI0, AIP0, x);
    AiryEval { ai, ai_prime }
}

struct Anchors {
    values: Vec<(f64, f64)>,
}

impl Anchors {
    fn x(i: usize) -> f64 {
        ANCHOR_MIN + i as f64 * ANCHOR_STEP
    }

    fn build() -> Self {
        let count = ((ASYMPTOTIC_FROM - ANCHOR_MIN) / ANCHOR_STEP).round() as usize + 1;
        let mut values = vec![(0.0, 0.0); count];
        let idx = |x: f64| ((x - ANCHOR_MIN) / ANCHOR_STEP).round() as usize;
        for (i, slot) in values.iter_mut().enumerate() {
            let x = Self::x(i);
            if (MACLAURIN_MIN..=MACLAURIN_MAX).contains(&x) {
                let e = maclaurin(x);
                *slot = (e.ai, e.ai_prime);
            }
        }
        // Decaying side: march down from the asymptotic region (stable direction).
        let top = asymptotic_positive(ASYMPTOTIC_FROM);
        values[count - 1] = (top.ai, top.ai_prime);
        let mut i = count - 1;
        while Self::x(i - 1) > MACLAURIN_MAX {
            let (y, yp) = values[i];
            values[i - 1] = taylor_step(Self::x(i), y, yp, -ANCHOR_STEP);
            i -= 1;
        }
        // Oscillatory side: march outwards from the Maclaurin region.
        let mut i = idx(MACLAURIN_MIN);
        while i > 0 {
            let (mut y, mut yp) = values[i];
            let mut x = Self::x(i);
            for _ in 0..4 {
                (y, yp) = taylor_step(x, y, yp, -ANCHOR_STEP / 4.0);
                x -= ANCHOR_STEP / 4.0;
            }
            values[i - 1] = (y, yp);
            i -= 1;
        }
        Self { values }
    }
}

fn anchors() -> &'static Anchors {
    static TABLE: OnceLock<Anchors> = OnceLock::new();
    TABLE.get_or_init(Anchors::build)
}

/// `Ai(x)` and `Ai'(x)` for `|x| ≤ 50`.
pub fn airy(x: f64) -> Result<AiryEval> {
    if !(x.abs() <= AIRY_RANGE) {
        return Err(Error::RangeExceeded(x));
    }
    Ok(airy_unchecked(x))
}

pub(crate) fn airy_unchecked(x: f64) -> AiryEval {
    if x >= ASYMPTOTIC_FROM {
        return asymptotic_positive(x);
    }
    if (-1.0..=1.0).contains(&x) {
        return maclaurin(x);
    }
    let table = anchors();
    let i = (((x - ANCHOR_MIN) / ANCHOR_STEP).round() as usize).min(table.values.len() - 1);
    let x0 = Anchors::x(i);
    let (y, yp) = table.values[i];
    let (ai, ai_prime) = taylor_step(x0, y, yp, x - x0);
    AiryEval { ai, ai_prime }
}

fn zero_guess(t: f64) -> f64 {
    // Ai zeros: a_k = −T(3π(4k−1)/8)
    let t2 = t.powi(-2);
    t.powf(2.0 / 3.0) * (1.0 + 5.0 / 48.0 * t2 - 5.0 / 36.0 * t2 * t2)
}

fn prime_zero_guess(t: f64) -> f64 {
    // Ai' zeros: a'_k = −U(3π(4k−3)/8)
    let t2 = t.powi(-2);
    t.powf(2.0 / 3.0) * (1.0 - 7.0 / 48.0 * t2 + 35.0 / 288.0 * t2 * t2)
}

/// The first `n` zeros of `Ai` on the negative axis, in decreasing order.
pub fn airy_negative_zeros(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            let mut x = -zero_guess(3.0 * PI * (4.0 * k as f64 - 1.0) / 8.0);
            for _ in 0..50 {
                let e = airy_unchecked(x);
                let dx = e.ai / e.ai_prime;
                x -= dx;
                if dx.abs() < 1e-15 * x.abs() {
                    break;
                }
            }
            x
        })
        .collect()
}

/// The first `n` zeros of `Ai'` on the negative axis, in decreasing order.
pub fn airy_prime_negative_zeros(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            let mut x = -prime_zero_guess(3.0 * PI * (4.0 * k as f64 - 3.0) / 8.0);
            for _ in 0..50 {
                let e = airy_unchecked(x);
                // (Ai')' = x·Ai
                let dx = e.ai_prime / (x * e.ai);
                x -= dx;
                if dx.abs() < 1e-15 * x.abs() {
                    break;
                }
            }
            x
        })
        .collect()
}
