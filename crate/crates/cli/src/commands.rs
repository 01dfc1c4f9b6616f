use anyhow::{bail, Context, Result};
use arrival_core::absorption::Trajectory;
use arrival_core::arrival::{
    density as density_at, fit_target, report_from_stats, stats_from_trajectory, uncertainty_report, ArrivalStats,
    MomentMethod, UncertaintyReport, RELATION_SLACK,
};
use arrival_core::battery::{self, BatteryConfig, Fault};
use arrival_core::groundstate::{spectrum_report, wall_linear_ground_state, Grid, Potential};
use arrival_core::minimality::{airy_negative_zeros, fit_minimal, MinimalKind};
use arrival_core::models::{ks_against_arrival, quantum_jump_sample};
use arrival_core::optimize::golden_section;
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{digest_value, Model, SystemConfig};
use crate::output::Table;
use crate::Globals;

const TIME: &str = "hbar/E";
const ENERGY: &str = "E";

pub enum Status {
    Ok,
    AssumptionViolated(String),
    Failed(String),
}

pub struct Run {
    pub command: &'static str,
    pub digest: String,
    pub seeds: Vec<u64>,
    pub parameters: Value,
    pub config: Option<Value>,
    pub outputs: Value,
    pub table: Option<Table>,
    pub status: Status,
}

impl Run {
    fn with_config(command: &'static str, cfg: &SystemConfig, parameters: Value) -> Self {
        Self {
            command,
            digest: cfg.digest(),
            seeds: Vec::new(),
            parameters,
            config: Some(cfg.to_value()),
            outputs: Value::Null,
            table: None,
            status: Status::Ok,
        }
    }

    fn without_config(command: &'static str, parameters: Value) -> Self {
        Self {
            command,
            digest: digest_value(&parameters),
            seeds: Vec::new(),
            parameters,
            config: None,
            outputs: Value::Null,
            table: None,
            status: Status::Ok,
        }
    }
}

fn load(g: &Globals) -> Result<SystemConfig> {
    let Some(path) = &g.config else {
        bail!("this command needs --config");
    };
    let mut cfg = SystemConfig::load(path)?;
    if let Some(hbar) = g.hbar {
        cfg.hbar = hbar;
    }
    Ok(cfg)
}

fn params<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

/// Closed-form moments when the generator is diagonalizable, quadrature otherwise.
fn stats(traj: &Trajectory, psi: &arrival_core::linops::StateVector) -> Result<ArrivalStats> {
    let method = if traj.system().factorization().is_some() {
        MomentMethod::ClosedForm
    } else {
        MomentMethod::Quadrature
    };
    Ok(stats_from_trajectory(traj, psi, method)?)
}

fn apply_tol(mut r: UncertaintyReport, tol: Option<f64>) -> UncertaintyReport {
    if let Some(tol) = tol {
        let holds = r.assumption_residual <= tol;
        r.assumption_holds = holds;
        r.variance_relation = holds.then_some(r.stats.ratio_var > 1.0);
        r.mean_relation = holds.then_some(r.stats.ratio_mean >= 1.0 - RELATION_SLACK);
    }
    r
}

pub fn report(g: &Globals) -> Result<Run> {
    let cfg = load(g)?;
    let (sys, psi) = cfg.build()?;
    let r = apply_tol(uncertainty_report(&sys, &psi)?, g.tol);
    let s = &r.stats;
    let hbar = sys.hbar();
    let mut run = Run::with_config("report", &cfg, json!({ "tol": g.tol }));

    let mut table = Table::new(&["quantity", "value", "unit"]);
    for (name, value, unit) in [
        ("p", s.p, "1"),
        ("mean_t", s.mean_t, TIME),
        ("std_t", s.std_t, TIME),
        ("mean_e", s.mean_e, ENERGY),
        ("std_e", s.std_e, ENERGY),
        ("std_t*std_e", s.std_t * s.std_e / hbar, "hbar"),
        ("mean_t*std_e", s.mean_t * s.std_e / hbar, "hbar"),
        ("ratio_var", s.ratio_var, "1"),
        ("ratio_mean", s.ratio_mean, "1"),
        ("assumption_residual", r.assumption_residual, "1"),
    ] {
        table.push(vec![json!(name), json!(value), json!(unit)]);
    }
    run.outputs = json!({
        "report": r,
        "std_t_std_e_over_hbar": s.std_t * s.std_e / hbar,
        "mean_t_std_e_over_hbar": s.mean_t * s.std_e / hbar,
        "hbar": hbar,
    });
    run.table = Some(table);
    if !r.assumption_holds {
        run.status = Status::AssumptionViolated(format!(
            "|D psi|/|D| = {:.3e}; the relations do not apply",
            r.assumption_residual
        ));
    } else if !r.relations_hold() {
        run.status = Status::Failed(format!(
            "relation violated: ratio_var = {}, ratio_mean = {}",
            s.ratio_var, s.ratio_mean
        ));
    }
    Ok(run)
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    #[arg(long, default_value_t = 0.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
}

const MAX_ROWS: usize = 10_000_000;

pub fn density(g: &Globals, a: &DensityArgs) -> Result<Run> {
    if !(a.t_min >= 0.0 && a.t_max >= a.t_min && a.step > 0.0) {
        bail!("need 0 <= t_min <= t_max and step > 0");
    }
    let span = (a.t_max - a.t_min) / a.step;
    let points = (span + 1e-9).floor() as usize + 1;
    if points > MAX_ROWS {
        bail!("{points} rows requested, at most {MAX_ROWS}");
    }
    let cfg = load(g)?;
    let (sys, psi) = cfg.build()?;
    // Validates the system and p before tabulating.
    density_at(&sys, &psi, a.t_min)?;
    let traj = sys.trajectory(&psi)?;
    let p = traj.absorption_probability();

    let rows: Vec<[f64; 3]> = (0..points)
        .into_par_iter()
        .map(|i| {
            let t = a.t_min + i as f64 * a.step;
            [t, traj.absorption_rate(t) / p, traj.survival(t)]
        })
        .collect();
    let peak = rows.iter().fold(rows[0], |m, r| if r[1] > m[1] { *r } else { m });

    let mut run = Run::with_config("density", &cfg, params(a));
    let mut table = Table::new(&["t [hbar/E]", "P [E/hbar]", "S [1]"]);
    for r in &rows {
        table.push(r.iter().map(|&x| json!(x)).collect());
    }
    run.outputs = json!({ "p": p, "rows": points, "peak_t": peak[0], "peak_density": peak[1] });
    run.table = Some(table);
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// γ/Ω of a two_level model.
    Ratio,
    /// Ω₂₃ of an ion model.
    Omega23,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "ratio")]
    pub param: SweepParam,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

struct SweepPoint {
    x: f64,
    ratio: f64,
    mean_product: f64,
    var_product: f64,
}

fn sweep_point(cfg: &SystemConfig, param: SweepParam, x: f64) -> Result<SweepPoint> {
    let mut cfg = cfg.clone();
    let ratio = match (&mut cfg.model, param) {
        (Model::TwoLevel(m), SweepParam::Ratio) => {
            m.gamma = x * m.omega;
            x
        }
        (Model::Ion(m), SweepParam::Omega23) => {
            m.omega23 = x;
            m.scheme().effective_rate() / m.omega12
        }
        (_, SweepParam::Ratio) => bail!("--param ratio needs a two_level model"),
        (_, SweepParam::Omega23) => bail!("--param omega23 needs an ion model"),
    };
    let (sys, psi) = cfg.build().with_context(|| format!("at {x}"))?;
    let s = uncertainty_report(&sys, &psi)?.stats;
    let hbar = sys.hbar();
    Ok(SweepPoint {
        x,
        ratio,
        mean_product: s.mean_t * s.std_e / hbar,
        var_product: s.std_t * s.std_e / hbar,
    })
}

pub fn sweep(g: &Globals, a: &SweepArgs) -> Result<Run> {
    if !(a.from.is_finite() && a.to.is_finite() && a.to >= a.from && a.points >= 1) {
        bail!("need finite from <= to and points >= 1");
    }
    let cfg = load(g)?;
    let xs: Vec<f64> = if a.points == 1 || a.from == a.to {
        vec![a.from]
    } else {
        (0..a.points)
            .map(|i| a.from + (a.to - a.from) * i as f64 / (a.points - 1) as f64)
            .collect()
    };
    let points: Vec<SweepPoint> = xs
        .par_iter()
        .map(|&x| sweep_point(&cfg, a.param, x))
        .collect::<Result<_>>()?;

    let tol = g.tol.unwrap_or(1e-10);
    let minimum = |objective: fn(&SweepPoint) -> f64| -> Value {
        if points.len() < 3 {
            return json!({ "found": false, "reason": "too few points" });
        }
        let i = (0..points.len())
            .min_by(|&i, &j| objective(&points[i]).total_cmp(&objective(&points[j])))
            .unwrap();
        if i == 0 || i + 1 == points.len() {
            return json!({ "found": false, "reason": "minimum on the edge of the range" });
        }
        let f = |x: f64| sweep_point(&cfg, a.param, x).map(|p| objective(&p)).unwrap_or(f64::INFINITY);
        let (x, value) = golden_section(f, points[i - 1].x, points[i + 1].x, tol);
        match sweep_point(&cfg, a.param, x) {
            Ok(p) => json!({ "found": true, "x": x, "gamma_over_omega": p.ratio, "value": value }),
            Err(e) => json!({ "found": false, "reason": format!("{e:#}") }),
        }
    };
    let mean_min = minimum(|p| p.mean_product);
    let var_min = minimum(|p| p.var_product);

    let columns: &[&str] = match a.param {
        SweepParam::Ratio => &["gamma/omega [1]", "mean_t*std_e [hbar]", "std_t*std_e [hbar]"],
        SweepParam::Omega23 => &["omega23 [E/hbar]", "gamma/omega12 [1]", "mean_t*std_e [hbar]", "std_t*std_e [hbar]"],
    };
    let mut table = Table::new(columns);
    for p in &points {
        let mut row = vec![json!(p.x)];
        if a.param == SweepParam::Omega23 {
            row.push(json!(p.ratio));
        }
        row.push(json!(p.mean_product));
        row.push(json!(p.var_product));
        table.push(row);
    }
    let mut run = Run::with_config("sweep", &cfg, params(a));
    run.outputs = json!({ "points": points.len(), "min_mean_product": mean_min, "min_var_product": var_min });
    run.table = Some(table);
    Ok(run)
}

#[derive(Debug, Args, Serialize)]
pub struct MonteCarloArgs {
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Detection efficiency.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Sampling horizon; defaults to the point where the survival has settled.
    #[arg(long)]
    pub t_max: Option<f64>,
}

pub fn montecarlo(g: &Globals, a: &MonteCarloArgs) -> Result<Run> {
    if a.n < 100 {
        bail!("n = {} is below the minimum of 100 samples", a.n);
    }
    let cfg = load(g)?;
    let (sys, psi) = cfg.build()?;
    let seed = g.seed.unwrap_or(1);
    let t_max = match a.t_max {
        Some(t) => t,
        None => sys.trajectory(&psi)?.horizon()?,
    };
    let samples = quantum_jump_sample(&sys, &psi, a.n, a.q, seed, t_max)?;
    let ks = ks_against_arrival(&sys, &psi, &samples)?;

    let mut run = Run::with_config("montecarlo", &cfg, json!({ "n": a.n, "q": a.q, "t_max": t_max }));
    run.seeds = vec![seed];
    let mut table = Table::new(&["t [hbar/E]"]);
    for &t in &samples.arrival_times {
        table.push(vec![json!(t)]);
    }
    run.outputs = json!({
        "clicks": samples.arrival_times.len(),
        "no_click_count": samples.no_click_count,
        "n_requested": samples.n_requested,
        "q": samples.q,
        "t_max": samples.t_max,
        "ks": ks,
    });
    run.table = Some(table);
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultArg {
    SignFlip,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Number of random systems.
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 2)]
    pub min_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub max_dim: usize,
    #[arg(long, default_value_t = 2000)]
    pub gap_instances: usize,
    /// Skip the L1 certificates.
    #[arg(long)]
    pub no_fits: bool,
    /// Deliberately break a check, to see the suite fail.
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}

pub fn verify(g: &Globals, a: &VerifyArgs) -> Result<Run> {
    if !(2 <= a.min_dim && a.min_dim <= a.max_dim && a.max_dim <= 16) {
        bail!("need 2 <= min_dim <= max_dim <= 16");
    }
    let config = BatteryConfig {
        systems: a.count,
        min_dim: a.min_dim,
        max_dim: a.max_dim,
        gap_instances: a.gap_instances,
        seed: g.seed.unwrap_or(BatteryConfig::default().seed),
        fits: !a.no_fits,
        fault: a.inject_fault.map(|f| match f {
            FaultArg::SignFlip => Fault::RelationSignFlip,
        }),
    };
    let summary = battery::run(&config);
    let mut parameters = params(a);
    parameters["seed"] = json!(config.seed);
    let mut run = Run::without_config("verify", parameters);
    run.seeds = vec![config.seed];
    let mut table = Table::new(&["check", "checked", "violations", "worst_margin"]);
    for c in &summary.checks {
        let margin = if c.worst_margin.is_finite() { json!(c.worst_margin) } else { Value::Null };
        table.push(vec![json!(c.name), json!(c.checked), json!(c.violations), margin]);
    }
    let violations: usize = summary.checks.iter().map(|c| c.violations).sum();
    run.outputs = json!({
        "passed": summary.passed(),
        "violations": violations,
        "errors": summary.errors,
        "first_failures": summary.violations,
    });
    run.table = Some(table);
    if !summary.passed() {
        let detail: Vec<String> = summary
            .violations
            .iter()
            .take(5)
            .map(|v| format!("{} (case {}, dim {}, seed {}): {}", v.check, v.index, v.dim, v.seed, v.detail))
            .collect();
        run.status = Status::Failed(format!(
            "{violations} violations, {} errors\n  {}",
            summary.errors,
            detail.join("\n  ")
        ));
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialArg {
    /// `−d²/dt² + t²` on the line.
    Oscillator,
    /// `−d²/dt² + t` on the half line with a wall at 0.
    Wall,
}

#[derive(Debug, Args, Serialize)]
pub struct GroundStateArgs {
    #[arg(long, value_enum, default_value = "wall")]
    pub potential: PotentialArg,
    /// Number of levels.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Interior grid points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Tabulate the ground-state vector against the Airy profile (wall only).
    #[arg(long)]
    pub profile: bool,
}

pub fn groundstate(_g: &Globals, a: &GroundStateArgs) -> Result<Run> {
    let (potential, default) = match a.potential {
        PotentialArg::Oscillator => (Potential::Oscillator, Grid::oscillator_default()),
        PotentialArg::Wall => (Potential::WallLinear, Grid::wall_default()),
    };
    let grid = Grid::new(
        a.t_min.unwrap_or(default.t_min),
        a.t_max.unwrap_or(default.t_max),
        a.n.unwrap_or(default.n),
    )?;
    let mut run = Run::without_config("groundstate", params(a));
    if a.profile {
        if potential != Potential::WallLinear {
            bail!("--profile is available for the wall potential only");
        }
        let p = wall_linear_ground_state(&grid)?;
        let mut table = Table::new(&["t [1]", "psi [1]", "airy [1]"]);
        for i in 0..p.t.len() {
            table.push(vec![json!(p.t[i]), json!(p.psi[i]), json!(p.airy[i])]);
        }
        run.outputs = json!({ "grid": grid, "max_deviation": p.max_deviation });
        run.table = Some(table);
        return Ok(run);
    }
    let r = spectrum_report(potential, &grid, a.k)?;
    let reference: Vec<f64> = match potential {
        Potential::Oscillator => (0..a.k).map(|n| (2 * n + 1) as f64).collect(),
        Potential::WallLinear => airy_negative_zeros(a.k).iter().map(|z| -z).collect(),
    };
    let mut table = Table::new(&["level", "raw [1]", "refined [1]", "extrapolated [1]", "exact [1]"]);
    for i in 0..a.k {
        table.push(vec![
            json!(i),
            json!(r.raw[i]),
            json!(r.refined[i]),
            json!(r.extrapolated[i]),
            json!(reference[i]),
        ]);
    }
    let worst = r
        .extrapolated
        .iter()
        .zip(&reference)
        .map(|(e, x)| (e - x).abs())
        .fold(0.0, f64::max);
    run.outputs = json!({ "grid": grid, "max_error": worst });
    run.table = Some(table);
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Gaussian,
    Airy,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub kind: FitKind,
}

pub fn fit(g: &Globals, a: &FitArgs) -> Result<Run> {
    let cfg = load(g)?;
    let (sys, psi) = cfg.build()?;
    let traj = sys.trajectory(&psi)?;
    let s = stats(&traj, &psi)?;
    let report = apply_tol(report_from_stats(&sys, &psi, s), g.tol);
    report.require_assumption()?;
    let target = fit_target(&traj, &s)?;
    let kinds: &[MinimalKind] = match a.kind {
        FitKind::Gaussian => &[MinimalKind::Gaussian],
        FitKind::Airy => &[MinimalKind::Airy],
        FitKind::Both => &MinimalKind::ALL,
    };
    let fits = kinds
        .iter()
        .map(|&kind| fit_minimal(&target, kind, s.epsilon(kind)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&[
        "kind",
        "scale [E/hbar]",
        "shift [hbar/E]",
        "distance [1]",
        "epsilon [1]",
        "gamma [1]",
        "bound [1]",
        "certified",
    ]);
    for f in &fits {
        table.push(vec![
            json!(f.kind.name()),
            json!(f.scale),
            json!(f.shift),
            json!(f.distance),
            json!(f.epsilon),
            json!(f.gamma),
            json!(f.bound),
            json!(f.certified),
        ]);
    }
    let mut run = Run::with_config("fit", &cfg, params(a));
    run.outputs = json!({ "stats": s, "fits": fits });
    run.table = Some(table);
    if let Some(f) = fits.iter().find(|f| !f.certified) {
        run.status = Status::Failed(format!(
            "{} fit distance {} exceeds the bound {}",
            f.kind.name(),
            f.distance,
            f.bound
        ));
    }
    Ok(run)
}
