use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nullctl"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin().args(args).arg(cfg).arg("--out").arg(out).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"
[problem]
domain = [0.0, 1.0]
horizon = 0.25
omega = [0.3, 0.7]

[grid]
nx = 39
nt = 40

[coefficients]
a = [[0, 0], [1, 0]]

[initial]
y0 = ["sin(pi*x)", "sin(pi*x)"]

[sweep]
ks = [1e2, 1e4, 1e6]

[observability]
samples = 5
seed = 7

[verify]
levels = [[31, 32], [63, 64]]
samples = [["0", "0"]]
"#;

#[test]
fn benchmark_pipeline_has_no_control_outside_omega() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["pipeline"], &configs().join("theorem1.toml"), out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["support_violation"].as_f64(), Some(0.0));
    assert!(report["terminal_norm"].as_f64().unwrap() < 1e-3);
    assert!(out.path().join("y.csv").exists() && out.path().join("u.csv").exists());
}

#[test]
fn decoupled_system_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["check"], &configs().join("decoupled.toml"), out.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("not controllable by Theorem 1 (necessity)"));
}

#[test]
fn check_reports_pivot() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["check"], &configs().join("theorem1.toml"), out.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("Theorem 1 applies, i0=1"));
}

#[test]
fn malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[problem]\ndomain = [0.0, 1.0]\nhorizon = \"soon\"\n");
    let o = run(&["check"], &bad, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    let missing = run(&["check"], &dir.path().join("nope.toml"), dir.path());
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_exits_1() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_are_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = bin().args(["weights", "--seed", "11"]).arg(&cfg).arg("--out").arg(out).env("NULLCTL_THREADS", threads).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = bin().arg("hum").arg(&cfg).arg("--out").arg(out).env("NULLCTL_THREADS", threads).output().unwrap();
        assert!(o.status.success());
    }
    for f in ["observability.csv", "weights.csv", "control.csv", "state.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    bin().args(["weights", "--seed", "12"]).arg(&cfg).arg("--out").arg(&c).output().unwrap();
    assert_ne!(std::fs::read(a.join("observability.csv")).unwrap(), std::fs::read(c.join("observability.csv")).unwrap());
}

#[test]
fn sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let o = run(&["sweep"], &cfg, dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(csv.lines().next(), Some("k,terminal_norm,J_k,iterations"));
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1] && w[1][2] >= w[0][2]));
}

#[test]
fn zero_sample_gives_zero_identity_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let o = run(&["verify-identity"], &cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("identity.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[4], 0.0);
    }
}

#[test]
fn binary_format_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", &format!("{SMALL}\n[output]\nformat = \"binary\"\n"));
    let o = run(&["hum"], &cfg, dir.path());
    assert!(o.status.success());
    let grid = nullctl::Grid::new(nullctl::Interval::new(0.0, 1.0), 0.25, 39, 40).unwrap();
    let traj = nullctl::Trajectory::read_binary(&std::fs::read(dir.path().join("state.bin")).unwrap(), &grid).unwrap();
    assert_eq!(traj.m, 2);
    let csv = dir.path().join("csv");
    let plain = write(dir.path(), "plain.toml", SMALL);
    assert!(run(&["hum"], &plain, &csv).status.success());
    let text = std::fs::read_to_string(csv.join("state.csv")).unwrap();
    let last: f64 = text.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(last, traj.get(40, 1, 39));
}

#[test]
fn poincare_without_coupling_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    assert!(run(&["poincare"], &cfg, dir.path()).status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("poincare.json")).unwrap()).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}
