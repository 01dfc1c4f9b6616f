//! Randomized check of the relations, certificates and dilation identities
//! over generated systems, plus the gap lemma on random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::absorption::AbsorptiveSystem;
use crate::arrival::{
    closed_form_moments, dilation_norm, fit_target, quadrature_moments, report_from_stats, stats_from_trajectory,
    MomentMethod, RELATION_SLACK,
};
use crate::error::Result;
use crate::groundstate::{gap_lemma_check, random_gap_instance};
use crate::linops::{frobenius, StateVector};
use crate::minimality::{certify_minimal, MinimalKind};
use crate::models::random_system;

pub const MOMENT_AGREEMENT_TOL: f64 = 1e-7;
pub const DILATION_TOL: f64 = 1e-6;
pub const COMMUTATION_TOL: f64 = 1e-8;

/// Deliberate defects used to show that the battery can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Flips the sign of the variance-relation ratio before checking it.
    RelationSignFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatteryConfig {
    pub systems: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub gap_instances: usize,
    pub seed: u64,
    pub fits: bool,
    pub fault: Option<Fault>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            systems: 500,
            min_dim: 2,
            max_dim: 8,
            gap_instances: 2000,
            seed: 20_240_601,
            fits: true,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckTally {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    /// Smallest margin seen (positive means satisfied).
    pub worst_margin: f64,
}

impl CheckTally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, margin: f64) {
        self.checked += 1;
        if !(margin >= 0.0) {
            self.violations += 1;
        }
        self.worst_margin = self.worst_margin.min(margin);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub index: usize,
    pub dim: usize,
    pub kernel_dim: usize,
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatterySummary {
    pub config: BatteryConfig,
    pub checks: Vec<CheckTally>,
    /// First few failures, for diagnosis.
    pub violations: Vec<Violation>,
    pub errors: usize,
}

impl BatterySummary {
    pub fn passed(&self) -> bool {
        self.errors == 0 && self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn tally(&self, name: &str) -> Option<&CheckTally> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const MAX_REPORTED: usize = 20;

struct Tallies {
    variance: CheckTally,
    mean: CheckTally,
    methods: CheckTally,
    dilation: CheckTally,
    commutation: CheckTally,
    gaussian: CheckTally,
    airy: CheckTally,
    gap_trace: CheckTally,
    gap_fidelity: CheckTally,
}

/// One generated case of the battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Case {
    pub index: usize,
    pub dim: usize,
    pub kernel_dim: usize,
    pub seed: u64,
}

/// The cases drawn for a configuration, reproducible from its seed.
pub fn cases(config: &BatteryConfig) -> Vec<Case> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    (0..config.systems)
        .map(|index| {
            let dim = rng.random_range(config.min_dim.max(2)..=config.max_dim.max(config.min_dim.max(2)));
            let kernel_dim = rng.random_range(1..dim);
            Case {
                index,
                dim,
                kernel_dim,
                seed: rng.random(),
            }
        })
        .collect()
}

pub fn run(config: &BatteryConfig) -> BatterySummary {
    let mut t = Tallies {
        variance: CheckTally::new("variance_relation"),
        mean: CheckTally::new("mean_relation"),
        methods: CheckTally::new("moment_methods_agree"),
        dilation: CheckTally::new("dilation_identity"),
        commutation: CheckTally::new("asymptotic_commutation"),
        gaussian: CheckTally::new("gaussian_certificate"),
        airy: CheckTally::new("airy_certificate"),
        gap_trace: CheckTally::new("gap_trace_norm"),
        gap_fidelity: CheckTally::new("gap_fidelity"),
    };
    let mut violations = Vec::new();
    let mut errors = 0;

    for case in cases(config) {
        let outcome = random_system(case.dim, case.kernel_dim, case.seed)
            .and_then(|(sys, psi)| check_system(&sys, &psi, config, &mut t));
        match outcome {
            Ok(failed) => {
                for (check, detail) in failed {
                    if violations.len() < MAX_REPORTED {
                        violations.push(Violation {
                            check,
                            index: case.index,
                            dim: case.dim,
                            kernel_dim: case.kernel_dim,
                            seed: case.seed,
                            detail,
                        });
                    }
                }
            }
            Err(e) => {
                errors += 1;
                if violations.len() < MAX_REPORTED {
                    violations.push(Violation {
                        check: "error",
                        index: case.index,
                        dim: case.dim,
                        kernel_dim: case.kernel_dim,
                        seed: case.seed,
                        detail: e.to_string(),
                    });
                }
            }
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    for index in 0..config.gap_instances {
        let dim = rng.random_range(2..=10);
        let seed: u64 = rng.random();
        let (a, rho) = random_gap_instance(dim, seed);
        match gap_lemma_check(&a, &rho) {
            Ok(r) => {
                t.gap_trace.record(r.rhs + crate::groundstate::GAP_SLACK - r.lhs);
                t.gap_fidelity.record(r.fidelity_bound + crate::groundstate::GAP_SLACK - r.fidelity_deficit);
                if !r.holds && violations.len() < MAX_REPORTED {
                    violations.push(Violation {
                        check: "gap_lemma",
                        index,
                        dim,
                        kernel_dim: 0,
                        seed,
                        detail: format!("{r:?}"),
                    });
                }
            }
            Err(e) => {
                errors += 1;
                if violations.len() < MAX_REPORTED {
                    violations.push(Violation {
                        check: "error",
                        index,
                        dim,
                        kernel_dim: 0,
                        seed,
                        detail: e.to_string(),
                    });
                }
            }
        }
    }

    let mut checks = vec![t.variance, t.mean, t.methods, t.dilation, t.commutation];
    if config.fits {
        checks.push(t.gaussian);
        checks.push(t.airy);
    }
    checks.push(t.gap_trace);
    checks.push(t.gap_fidelity);
    BatterySummary {
        config: *config,
        checks,
        violations,
        errors,
    }
}

fn check_system(
    sys: &AbsorptiveSystem,
    psi: &StateVector,
    config: &BatteryConfig,
    t: &mut Tallies,
) -> Result<Vec<(&'static str, String)>> {
    let mut failed = Vec::new();
    let traj = sys.trajectory(psi)?;
    let stats = stats_from_trajectory(&traj, psi, MomentMethod::ClosedForm)?;
    let report = report_from_stats(sys, psi, stats);
    let s = &report.stats;

    let ratio_var = match config.fault {
        Some(Fault::RelationSignFlip) => -s.ratio_var,
        None => s.ratio_var,
    };
    // Strict inequality: a zero margin counts as a violation.
    let margin = ratio_var - 1.0;
    t.variance.record(if margin > 0.0 { margin } else { margin.min(-f64::MIN_POSITIVE) });
    if margin <= 0.0 || !report.assumption_holds {
        failed.push(("variance_relation", format!("ratio_var = {ratio_var}, assumption {}", report.assumption_holds)));
    }
    let margin = s.ratio_mean - (1.0 - RELATION_SLACK);
    t.mean.record(margin);
    if margin < 0.0 {
        failed.push(("mean_relation", format!("ratio_mean = {}", s.ratio_mean)));
    }

    let closed = closed_form_moments(&traj, psi)?;
    let quad = quadrature_moments(&traj)?;
    let rel = (0..2)
        .map(|i| ((closed[i] - quad[i]) / quad[i]).abs())
        .fold(0.0, f64::max);
    t.methods.record(MOMENT_AGREEMENT_TOL - rel);
    if rel > MOMENT_AGREEMENT_TOL {
        failed.push(("moment_methods_agree", format!("closed {closed:?} vs quadrature {quad:?}")));
    }

    let norm = dilation_norm(&traj)?;
    let gap = (norm - s.p).abs();
    t.dilation.record(DILATION_TOL - gap);
    if gap > DILATION_TOL {
        failed.push(("dilation_identity", format!("∫‖Jψ‖² = {norm}, p = {}", s.p)));
    }

    let r = &traj.asymptotic().r;
    let k = sys.k();
    let comm = frobenius(&(r * k - k.adjoint() * r)) / frobenius(k).max(f64::MIN_POSITIVE);
    t.commutation.record(COMMUTATION_TOL - comm);
    if comm > COMMUTATION_TOL {
        failed.push(("asymptotic_commutation", format!("‖RK − K*R‖/‖K‖ = {comm}")));
    }

    if config.fits {
        let target = fit_target(&traj, s)?;
        for (kind, tally) in [(MinimalKind::Gaussian, &mut t.gaussian), (MinimalKind::Airy, &mut t.airy)] {
            let fit = certify_minimal(&target, kind, s.epsilon(kind))?;
            tally.record(fit.bound + crate::minimality::fit::CERTIFICATE_SLACK - fit.distance);
            if !fit.certified {
                failed.push((
                    if kind == MinimalKind::Gaussian { "gaussian_certificate" } else { "airy_certificate" },
                    format!("distance {} > bound {}", fit.distance, fit.bound),
                ));
            }
        }
    }
    Ok(failed)
}
