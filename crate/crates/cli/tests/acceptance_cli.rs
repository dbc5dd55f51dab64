//! CLI-level acceptance: determinism of report/sweep outputs (byte-identical
//! across identical manifests), the exit-code contract, and the DSL
//! system-file path end to end.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psvf"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("spawn psvf");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).to_string(),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("reading {}: {e}", p.display()))
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut failures: Vec<String> = Vec::new();

    // verify: identical manifests, two runs, byte-identical JSON reports.
    for (i, name) in ["a.json", "b.json"].iter().enumerate() {
        let path = dir.path().join(name);
        let (code, _, err) = run(&[
            "verify",
            "--suite",
            "theorem-a",
            "--lambda",
            "-0.05",
            "--samples",
            "40",
            "--seed",
            "42",
            "--out",
            path.to_str().unwrap(),
        ]);
        if code != 0 {
            failures.push(format!("verify run {i} exited {code}: {err}"));
        }
    }
    let (a, b) = (read(&dir.path().join("a.json")), read(&dir.path().join("b.json")));
    if a != b {
        failures.push("verify reports differ between identical runs".into());
    }
    if a.is_empty() {
        failures.push("verify report is empty".into());
    }

    // sweep: identical manifests, byte-identical CSV.
    for name in ["s1.csv", "s2.csv"] {
        let path = dir.path().join(name);
        let (code, _, err) = run(&[
            "sweep",
            "--lambda-range",
            "-0.06:0.06:0.03",
            "--samples",
            "15",
            "--seed",
            "42",
            "--out",
            path.to_str().unwrap(),
        ]);
        if code != 0 {
            failures.push(format!("sweep exited {code}: {err}"));
        }
    }
    let (s1, s2) = (read(&dir.path().join("s1.csv")), read(&dir.path().join("s2.csv")));
    if s1 != s2 {
        failures.push("sweep outputs differ between identical runs".into());
    }

    // resume over a complete file adds nothing and leaves bytes unchanged.
    let path = dir.path().join("s1.csv");
    let (code, _, err) = run(&[
        "sweep",
        "--lambda-range",
        "-0.06:0.06:0.03",
        "--samples",
        "15",
        "--seed",
        "42",
        "--resume",
        "--out",
        path.to_str().unwrap(),
    ]);
    if code != 0 {
        failures.push(format!("resume sweep exited {code}: {err}"));
    }
    if read(&path) != s1 {
        failures.push("resume over a complete file changed the output".into());
    }

    if failures.is_empty() {
        println!("[PASS] criterion 8: deterministic outputs");
    } else {
        println!("[FAIL] criterion 8: deterministic outputs");
        panic!("criterion 8 failed:\n{}", failures.join("\n"));
    }
}

#[test]
fn classify_exit_codes_and_output() {
    let (code, out, _) = run(&[
        "classify",
        "--builtin",
        "a=-1,b=-1,c=1,d=-2,lambda=0",
        "--point",
        "1,0,0",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("Sliding"), "{out}");

    let (code, out, _) = run(&["classify", "--point", "0,0,0"]);
    assert_eq!(code, 0);
    assert!(out.contains("Tangential: CuspFold"), "{out}");

    // Malformed point: manifest error.
    let (code, _, _) = run(&["classify", "--point", "1,0"]);
    assert_eq!(code, 2);

    // Off-plane point: classification error.
    let (code, _, _) = run(&["classify", "--point", "0,0,0.5"]);
    assert_eq!(code, 1);
}

#[test]
fn classify_grid_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let (code, _, _) = run(&[
        "classify",
        "--grid",
        "-0.5:0.5:5,-0.5:0.5:5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x,y,region,"));
    assert_eq!(text.lines().count(), 26);
}

#[test]
fn return_map_complex_branch_is_data_not_failure() {
    let (code, out, _) = run(&["return-map", "--point", "0,0.1", "--lambda", "0"]);
    assert_eq!(code, 0);
    assert!(out.contains("complex branch"), "{out}");

    let (code, out, _) = run(&["return-map", "--point", "0,0", "--lambda", "0.05"]);
    assert_eq!(code, 0);
    assert!(out.contains("(0, 0)"), "{out}");
}

#[test]
fn verify_suite_gating() {
    let (code, _, err) = run(&["verify", "--suite", "curve-images", "--lambda", "0.1"]);
    assert_eq!(code, 2);
    assert!(err.contains("requires lambda = 0"), "{err}");

    let (code, _, _) = run(&["verify", "--suite", "curve-images", "--lambda", "0"]);
    assert_eq!(code, 0);
}

#[test]
fn simulate_with_system_file() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("t.csv");
    let system = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../systems/cuspfold.psvf");
    let (code, _, err) = run(&[
        "simulate",
        "--system",
        system.to_str().unwrap(),
        "--p0",
        "1,-1,0",
        "--t-max",
        "8",
        "--out",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&traj).unwrap();
    assert!(text.starts_with("t,x,y,z,mode,event\n"));
    // The DSL-defined system reproduces the closed-form crossing at t = 3.
    let cross = text
        .lines()
        .find(|l| l.contains("CrossSigma"))
        .expect("a crossing event row");
    let t: f64 = cross.split(',').next().unwrap().parse().unwrap();
    assert!((t - 3.0).abs() < 1e-5, "{cross}");
}

#[test]
fn simulate_zero_time_budget() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("t0.csv");
    let (code, _, _) = run(&[
        "simulate",
        "--p0",
        "0.5,0.5,0.5",
        "--t-max",
        "0",
        "--out",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&traj).unwrap();
    // Header plus the single initial sample.
    assert_eq!(text.lines().count(), 2, "{text}");
}

#[test]
fn simulate_escape_split_writes_both_branches() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("esc.csv");
    let summary = dir.path().join("esc.json");
    let (code, _, _) = run(&[
        "simulate",
        "--p0",
        "-1,-2,0",
        "--t-max",
        "5",
        "--out",
        traj.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(traj.exists());
    assert!(dir.path().join("esc.branch1.csv").exists());
    let text = fs::read_to_string(&summary).unwrap();
    assert!(text.contains("EscapeSplit"));
}

#[test]
fn sweep_empty_range_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    let (code, _, _) = run(&[
        "sweep",
        "--lambda-range",
        "0.1:0.0:0.02",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text, "lambda,a,b,c,d,verdict,delta3,sliding_eig1,sliding_eig2,delta2,xi_plus,xi_minus,error\n");
}

#[test]
fn sweep_verdict_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mono.csv");
    let (code, _, _) = run(&[
        "sweep",
        "--lambda-range",
        "-0.1:0.1:0.02",
        "--samples",
        "10",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    for line in fs::read_to_string(&path).unwrap().lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let lambda: f64 = cols[0].parse().unwrap();
        let verdict = cols[5];
        if lambda < 0.0 {
            assert_ne!(verdict, "AsymptoticallyStable", "{line}");
        } else {
            assert_ne!(verdict, "NotLyapunovStable", "{line}");
        }
    }
}

#[test]
fn sweep_regime_violation_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    // a + b*d <= 0 violates the regime; the row records the error.
    let (code, _, _) = run(&[
        "sweep",
        "--builtin",
        "a=-3,b=-1,c=1,d=-2",
        "--lambda-range",
        "0:0:1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("regime"), "{text}");
}

#[test]
fn builtin_and_system_conflict() {
    let (code, _, _) = run(&[
        "classify",
        "--builtin",
        "a=-1",
        "--system",
        "systems/cuspfold.psvf",
        "--point",
        "0,0,0",
    ]);
    assert_eq!(code, 2);
}
