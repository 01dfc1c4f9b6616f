use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const OPTIMAL: &str = r#"{"model": "two_level", "omega": 2, "gamma": 2.8284271247461903}"#;
const CONSTANT: &str = r#"{"model": "constant", "h": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]], "alpha": 0.5, "psi": [[1, 0], [0, 0]]}"#;
const NEGATIVE_D: &str = r#"{"h": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]], "d": [[[0, 0], [0, 0]], [[0, 0], [-1, 0]]], "psi": [[1, 0], [0, 0]]}"#;
const ION: &str = r#"{"model": "ion", "omega12": 628318.5307179586, "omega23": 10869910.581363013, "gamma34": 133203528.51220521}"#;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Output {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn arrival(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_arrival"));
    cmd.args(args);
    for key in ["ARRIVAL_CONFIG", "ARRIVAL_OUT", "ARRIVAL_FORMAT", "ARRIVAL_HBAR", "ARRIVAL_SEED", "ARRIVAL_TOL"] {
        cmd.env_remove(key);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Output {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn report_optimal() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    let out = arrival(&["report", "--config", s(&cfg)], &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = out.json();
    let r = &v["outputs"]["report"];
    assert!((f(&r["stats"]["ratio_mean"]) - 1.0277).abs() < 1e-4);
    assert!((f(&v["outputs"]["std_t_std_e_over_hbar"]) - 1.0 / SQRT_2).abs() < 1e-9);
    assert!((f(&v["outputs"]["mean_t_std_e_over_hbar"]) - SQRT_2).abs() < 1e-9);
    assert_eq!(r["assumption_holds"], Value::Bool(true));
    assert_eq!(v["command"], "report");
    assert!(v["config_digest"].as_str().unwrap().starts_with("sha256:"));
    assert!(f(&v["wall_time_s"]) >= 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let neg = write(&dir, "neg.json", NEGATIVE_D);
    let out = arrival(&["report", "--config", s(&neg)], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("not positive semidefinite"), "{}", out.stderr);

    let constant = write(&dir, "constant.json", CONSTANT);
    let out = arrival(&["report", "--config", s(&constant)], &[]);
    assert_eq!(out.code, 2, "{}", out.stderr);
    assert!(out.stderr.contains("assumption violated"));
    // The statistics are still emitted, flagged.
    assert_eq!(out.json()["outputs"]["report"]["assumption_holds"], Value::Bool(false));
    assert_eq!(out.json()["outputs"]["report"]["variance_relation"], Value::Null);

    let out = arrival(&["fit", "--config", s(&constant)], &[]);
    assert_eq!(out.code, 2, "{}", out.stderr);

    let broken = write(&dir, "broken.json", "{\n \"model\": \"two_level\",\n \"omega\": 2,\n \"gamma\": [1, }\n");
    let out = arrival(&["report", "--config", s(&broken)], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("line 4"), "{}", out.stderr);
    let typo = write(&dir, "typo.json", r#"{"model": "two_level", "omega": 2, "gama": 1}"#);
    let out = arrival(&["report", "--config", s(&typo)], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("gama"), "{}", out.stderr);
    let out = arrival(&["report"], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("--config"));
}

#[test]
fn tolerance_flag_controls_the_assumption() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "constant.json", CONSTANT);
    // Forcing the check through exposes the relations to a state they do
    // not cover: the mean-time relation then fails.
    let out = arrival(&["report", "--config", s(&cfg), "--tol", "2"], &[]);
    assert_eq!(out.code, 1, "{}", out.stderr);
    let r = &out.json()["outputs"]["report"];
    assert_eq!(r["assumption_holds"], Value::Bool(true));
    assert_eq!(r["mean_relation"], Value::Bool(false));
    assert!(out.stderr.contains("relation violated"));

    let optimal = write(&dir, "optimal.json", OPTIMAL);
    let out = arrival(&["report", "--config", s(&optimal)], &[("ARRIVAL_TOL", "1e-14")]);
    assert_eq!(out.code, 0, "{}", out.stderr);
}

#[test]
fn density_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    let out = arrival(&["density", "--config", s(&cfg), "--format", "csv", "--t-max", "8", "--step", "0.01"], &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let digest = out.stdout.lines().find(|l| l.starts_with("# config_digest: sha256:")).unwrap();
    assert!(digest.len() > 30);
    let mut lines = out.stdout.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "t [hbar/E],P [E/hbar],S [1]");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 801);
    assert_eq!(rows[0], vec![0.0, 0.0, 1.0]);
    assert!(rows.windows(2).all(|w| w[1][2] <= w[0][2]));
    let exact = |t: f64| 4.0 * SQRT_2 * (-SQRT_2 * t).exp() * (t / SQRT_2).sin().powi(2);
    assert!(rows.iter().all(|r| (r[1] - exact(r[0])).abs() < 1e-12));
    let peak = rows.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert!((peak[0] - PI / (2.0 * SQRT_2)).abs() <= 0.01);

    let out = arrival(&["density", "--config", s(&cfg), "--step", "0"], &[]);
    assert_eq!(out.code, 1);
}

#[test]
fn sweep_finds_the_optimum() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    let out = arrival(&["sweep", "--config", s(&cfg), "--from", "0.5", "--to", "4", "--points", "200"], &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = out.json();
    let m = &v["outputs"]["min_mean_product"];
    assert_eq!(m["found"], Value::Bool(true));
    assert!((f(&m["x"]) - 1.41421).abs() < 1e-3);
    assert!((f(&m["value"]) - 1.41421).abs() < 1e-4);
    let m = &v["outputs"]["min_var_product"];
    assert!((f(&m["x"]) - SQRT_2).abs() < 1e-3);
    assert!((f(&m["value"]) - 1.0 / SQRT_2).abs() < 1e-6);
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 200);
    assert_eq!(v["table"]["columns"][1], "mean_t*std_e [hbar]");

    let out = arrival(&["sweep", "--config", s(&cfg), "--from", "1", "--to", "1"], &[]);
    assert_eq!(out.code, 0);
    let v = out.json();
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 1);
    assert_eq!(v["outputs"]["min_mean_product"]["found"], Value::Bool(false));

    let out = arrival(&["sweep", "--config", s(&cfg), "--param", "omega23", "--from", "1", "--to", "2"], &[]);
    assert_eq!(out.code, 1);
}

#[test]
fn ion_sweep_lands_near_the_quoted_drive() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "ion.json", ION);
    let from = (2.0 * PI * 1.0e6).to_string();
    let to = (2.0 * PI * 2.5e6).to_string();
    let out = arrival(&["sweep", "--config", s(&cfg), "--param", "omega23", "--from", &from, "--to", &to, "--points", "31"], &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let m = &out.json()["outputs"]["min_mean_product"];
    let mhz = f(&m["x"]) / (2.0 * PI * 1e6);
    assert!((mhz - 1.73).abs() / 1.73 < 5e-3, "{mhz}");
    assert!((f(&m["gamma_over_omega"]) - SQRT_2).abs() < 1e-4);
}

#[test]
fn montecarlo_verdicts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    for q in ["1", "0.5"] {
        let out = arrival(&["montecarlo", "--config", s(&cfg), "--n", "100000", "--q", q, "--seed", "8"], &[]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let v = out.json();
        assert_eq!(v["outputs"]["ks"]["verdict"], "pass", "q = {q}");
        assert_eq!(v["seeds"][0], 8);
        let times = v["table"]["rows"].as_array().unwrap();
        let clicks = v["outputs"]["clicks"].as_u64().unwrap() as usize;
        assert_eq!(times.len(), clicks);
        assert_eq!(clicks + v["outputs"]["no_click_count"].as_u64().unwrap() as usize, 100_000);
        assert!(times.windows(2).all(|w| f(&w[0][0]) <= f(&w[1][0])));
    }
    let out = arrival(&["montecarlo", "--config", s(&cfg), "--n", "100"], &[]);
    assert_eq!(out.json()["outputs"]["ks"]["verdict"], "inconclusive");
    let out = arrival(&["montecarlo", "--config", s(&cfg), "--n", "50"], &[]);
    assert_eq!(out.code, 1);
    let out = arrival(&["montecarlo", "--config", s(&cfg), "--n", "1000", "--t-max", "1"], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("try t_max >="), "{}", out.stderr);
}

#[test]
fn montecarlo_is_reproducible_from_the_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    let run = |seed: &str| {
        let mut v = arrival(&["montecarlo", "--config", s(&cfg), "--n", "2000", "--seed", seed], &[]).json();
        v.as_object_mut().unwrap().remove("wall_time_s");
        v
    };
    assert_eq!(run("3"), run("3"));
    assert_ne!(run("3")["table"], run("4")["table"]);
}

#[test]
fn verify_small_battery_and_fault() {
    let args = ["verify", "--count", "12", "--gap-instances", "50", "--seed", "5"];
    let out = arrival(&args, &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let mut a = out.json();
    assert_eq!(a["outputs"]["passed"], Value::Bool(true));
    let names: Vec<&str> = a["table"]["rows"].as_array().unwrap().iter().map(|r| r[0].as_str().unwrap()).collect();
    for n in ["variance_relation", "mean_relation", "dilation_identity", "airy_certificate", "gap_trace_norm"] {
        assert!(names.contains(&n), "{names:?}");
    }
    let mut b = arrival(&args, &[]).json();
    a.as_object_mut().unwrap().remove("wall_time_s");
    b.as_object_mut().unwrap().remove("wall_time_s");
    assert_eq!(a, b);

    let out = arrival(&["verify", "--count", "5", "--gap-instances", "5", "--no-fits", "--inject-fault", "sign-flip"], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("variance_relation"), "{}", out.stderr);
    assert_eq!(out.json()["outputs"]["passed"], Value::Bool(false));
}

#[test]
fn groundstate_levels() {
    let out = arrival(&["groundstate", "--potential", "oscillator", "--k", "2"], &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows = out.json()["table"]["rows"].clone();
    assert!((f(&rows[0][3]) - 1.0).abs() < 1e-4 && (f(&rows[1][3]) - 3.0).abs() < 1e-4);
    let out = arrival(&["groundstate", "--potential", "wall", "--k", "2"], &[]);
    let rows = out.json()["table"]["rows"].clone();
    assert!((f(&rows[0][3]) - 2.33811).abs() < 1e-5 && (f(&rows[1][3]) - 4.08795).abs() < 1e-5);
    let out = arrival(&["groundstate", "--profile"], &[]);
    assert!(f(&out.json()["outputs"]["max_deviation"]) <= 1e-4);
    let out = arrival(&["groundstate", "--potential", "oscillator", "--n", "100", "--k", "30"], &[]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("grid too coarse"), "{}", out.stderr);
}

#[test]
fn fit_optimal() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    let out = arrival(&["fit", "--config", s(&cfg), "--kind", "airy"], &[]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let fit = &out.json()["outputs"]["fits"][0];
    assert_eq!(fit["kind"], "airy");
    assert!(f(&fit["distance"]) <= 0.314 && f(&fit["distance"]) <= f(&fit["bound"]));
    assert_eq!(fit["certified"], Value::Bool(true));
}

#[test]
fn emitted_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    let first = arrival(&["report", "--config", s(&cfg), "--hbar", "0.7"], &[]).json();
    let emitted = write(&dir, "emitted.json", &first["config"].to_string());
    let second = arrival(&["report", "--config", s(&emitted)], &[]).json();
    assert_eq!(first["config_digest"], second["config_digest"]);
    assert_eq!(first["outputs"], second["outputs"]);
}

#[test]
fn environment_mirrors_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "optimal.json", OPTIMAL);
    let out_path = dir.path().join("out.csv");
    let env = [
        ("ARRIVAL_CONFIG", s(&cfg)),
        ("ARRIVAL_HBAR", "2"),
        ("ARRIVAL_FORMAT", "csv"),
        ("ARRIVAL_OUT", s(&out_path)),
    ];
    let out = arrival(&["report"], &env);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("# hbar: 2.0"), "{text}");

    // A flag wins over the environment.
    let out = arrival(&["report", "--hbar", "1", "--format", "json"], &[("ARRIVAL_CONFIG", s(&cfg)), ("ARRIVAL_HBAR", "2")]);
    let v = out.json();
    assert_eq!(f(&v["outputs"]["hbar"]), 1.0);
    let flagged = arrival(&["report", "--config", s(&cfg)], &[]).json();
    assert_eq!(v["config_digest"], flagged["config_digest"]);
    // The named model carries Ω and γ as rates, so ħ scales the energies
    // and leaves times and the products over ħ alone.
    let scaled = arrival(&["report", "--config", s(&cfg), "--hbar", "2"], &[]).json();
    assert_ne!(scaled["config_digest"], flagged["config_digest"]);
    let stat = |v: &Value, k: &str| f(&v["outputs"]["report"]["stats"][k]);
    assert!((stat(&scaled, "mean_t") / stat(&flagged, "mean_t") - 1.0).abs() < 1e-12);
    assert!((stat(&scaled, "std_e") / stat(&flagged, "std_e") - 2.0).abs() < 1e-12);
    assert!((f(&scaled["outputs"]["mean_t_std_e_over_hbar"]) - SQRT_2).abs() < 1e-9);
}
