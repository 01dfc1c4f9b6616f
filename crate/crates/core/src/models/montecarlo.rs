//! First-jump sampling of arrival times and a Kolmogorov–Smirnov comparison
//! with the analytic distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::absorption::{AbsorptiveSystem, Trajectory};
use crate::error::{Error, Result};
use crate::linops::StateVector;

/// Allowed excess survival at the sampling horizon.
pub const HORIZON_RESIDUAL_TOL: f64 = 1e-6;
/// Samples per independent random stream.
const CHUNK: usize = 8192;
/// Points of the cumulative table used to bracket inversions.
const TABLE_POINTS: usize = 2048;
/// Level of the KS test.
pub const KS_LEVEL: f64 = 0.01;
/// Click counts below this only ever yield a failing or inconclusive verdict.
pub const KS_MIN_CLICKS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    /// Recorded click times, sorted.
    pub arrival_times: Vec<f64>,
    pub no_click_count: usize,
    pub seed: u64,
    pub n_requested: usize,
    pub q: f64,
    pub t_max: f64,
}

/// Cumulative absorption `G(t) = 1 − S(t)` tabulated on `[0, t_max]`.
struct Inverter<'a> {
    traj: &'a Trajectory<'a>,
    t_max: f64,
    table: Vec<f64>,
}

impl<'a> Inverter<'a> {
    fn new(traj: &'a Trajectory<'a>, t_max: f64) -> Self {
        let table = (0..=TABLE_POINTS)
            .map(|i| 1.0 - traj.survival(t_max * i as f64 / TABLE_POINTS as f64))
            .collect();
        Self { traj, t_max, table }
    }

    fn total(&self) -> f64 {
        self.table[TABLE_POINTS]
    }

    /// Solves `G(t) = u` for `u < G(t_max)` by safeguarded Newton iteration.
    fn invert(&self, u: f64) -> f64 {
        let i = self.table.partition_point(|&g| g < u).clamp(1, TABLE_POINTS);
        let h = self.t_max / TABLE_POINTS as f64;
        let (mut lo, mut hi) = ((i - 1) as f64 * h, i as f64 * h);
        let mut t = lo + h * (u - self.table[i - 1]) / (self.table[i] - self.table[i - 1]).max(f64::MIN_POSITIVE);
        for _ in 0..60 {
            let g = 1.0 - self.traj.survival(t) - u;
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let rate = self.traj.absorption_rate(t);
            let mut next = t - g / rate;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-14 * t.abs().max(h) {
                return next;
            }
            t = next;
        }
        t
    }
}

/// Draws `n` first-jump times for `ψ`, keeping each with probability `q`.
/// Absorptions later than `t_max` are counted as missed clicks.
pub fn quantum_jump_sample(
    sys: &AbsorptiveSystem,
    psi: &StateVector,
    n: usize,
    q: f64,
    seed: u64,
    t_max: f64,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::NonpositiveParameter { name: "q", value: q });
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::NonpositiveParameter { name: "t_max", value: t_max });
    }
    let traj = sys.trajectory(psi)?;
    let residual = traj.excess_survival(t_max);
    if residual > HORIZON_RESIDUAL_TOL {
        return Err(Error::HorizonTooSmall {
            t_max,
            residual,
            suggested: traj.horizon()?,
        });
    }
    let inverter = Inverter::new(&traj, t_max);
    let absorbed = inverter.total();

    let chunks = n.div_ceil(CHUNK);
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(chunks);
    let mut results: Vec<(usize, Vec<f64>, usize)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let inverter = &inverter;
                scope.spawn(move || {
                    (w..chunks)
                        .step_by(workers)
                        .map(|c| {
                            let mut rng = ChaCha20Rng::seed_from_u64(seed);
                            rng.set_stream(c as u64);
                            let count = CHUNK.min(n - c * CHUNK);
                            let mut times = Vec::with_capacity(count);
                            let mut missed = 0;
                            for _ in 0..count {
                                let u: f64 = rng.random();
                                let keep: f64 = rng.random();
                                if u < absorbed && keep < q {
                                    times.push(inverter.invert(u));
                                } else {
                                    missed += 1;
                                }
                            }
                            (c, times, missed)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sampler thread")).collect()
    });
    results.sort_by_key(|r| r.0);
    let mut arrival_times: Vec<f64> = Vec::with_capacity(n);
    let mut no_click_count = 0;
    for (_, times, missed) in results {
        arrival_times.extend(times);
        no_click_count += missed;
    }
    arrival_times.sort_by(f64::total_cmp);
    Ok(SampleSet {
        arrival_times,
        no_click_count,
        seed,
        n_requested: n,
        q,
        t_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KsVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub clicks: usize,
    pub statistic: f64,
    pub p_value: f64,
    /// Asymptotic critical value of the statistic at [`KS_LEVEL`].
    pub critical_value: f64,
    pub verdict: KsVerdict,
}

/// Kolmogorov survival function `Q(λ) = 2Σ(−1)^{k−1}e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of sorted `times` against `cdf`.
pub fn ks_test(times: &[f64], cdf: impl Fn(f64) -> f64) -> KsReport {
    let n = times.len();
    if n == 0 {
        return KsReport {
            clicks: 0,
            statistic: f64::NAN,
            p_value: f64::NAN,
            critical_value: f64::NAN,
            verdict: KsVerdict::Inconclusive,
        };
    }
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let f = cdf(t);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let sqrt_n = nf.sqrt();
    // Stephens' finite-sample correction.
    let effective = sqrt_n + 0.12 + 0.11 / sqrt_n;
    let p_value = kolmogorov_q(effective * d);
    let critical_value = 1.627_624 / effective;
    let verdict = if p_value < KS_LEVEL {
        KsVerdict::Fail
    } else if n < KS_MIN_CLICKS {
        KsVerdict::Inconclusive
    } else {
        KsVerdict::Pass
    };
    KsReport {
        clicks: n,
        statistic: d,
        p_value,
        critical_value,
        verdict,
    }
}

/// KS test of a sample set against the arrival distribution conditioned on
/// absorption before the sampling horizon.
pub fn ks_against_arrival(sys: &AbsorptiveSystem, psi: &StateVector, samples: &SampleSet) -> Result<KsReport> {
    let traj = sys.trajectory(psi)?;
    let total = 1.0 - traj.survival(samples.t_max);
    Ok(ks_test(&samples.arrival_times, |t| (1.0 - traj.survival(t)) / total))
}
