use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gauge-rig"))
        .args(args)
        .env_remove("GAUGE_RIG_TOL")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_reference_and_variants() {
    let out = run(&["analyze", "--input", path_str(&fixture("reference.json"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("gauge dimension: 1; self-stress: (3,3,3,-1,-1,-1)"), "{}", stdout(&out));
    assert!(stdout(&out).contains("rank: 5 of 6"));

    let out = run(&["analyze", "--input", path_str(&fixture("five_rods.json"))]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("gauge dimension: 0"));

    let out = run(&["analyze", "--input", path_str(&fixture("triangle.json")), "--omega", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("gauge dimension: 0"));
    assert!(stdout(&out).contains("tensions: (0.33333333333333"));
}

#[test]
fn analyze_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = run(&[
        "analyze",
        "--input",
        path_str(&fixture("reference.json")),
        "--omega",
        "1",
        "--out",
        path_str(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["rank"], 5);
    assert_eq!(v["gauge_dimension"], 1);
    assert_eq!(v["solvable"], true);
    assert_eq!(v["matrix"].as_array().unwrap().len(), 6);
    assert_eq!(v["matrix"][3][3].as_f64().unwrap() * v["reference_normalization"].as_f64().unwrap(), 12.0);
    assert_eq!(v["self_stress"][0].as_array().unwrap().len(), 6);
    assert_eq!(v["edges"][0], "1-2");

    let out = run(&["analyze", "--input", path_str(&fixture("reference.json")), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rank"], 5);
}

#[test]
fn malformed_input_fails_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"vertices\": [\n  {\"id\": \"1\", \"mass\": 1.0},\n  oops\n]}").unwrap();
    let out = run(&["analyze", "--input", path_str(&bad)]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = run(&["analyze", "--input", path_str(&dir.path().join("missing.json"))]);
    assert!(!out.status.success());
}

// t_end is truncated on purpose: the run ends slightly short of a full turn
#[allow(clippy::approx_constant)]
#[test]
fn simulate_one_period_and_reduce() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("run.csv");
    let out = run(&[
        "simulate",
        "--input",
        path_str(&fixture("reference.json")),
        "--omega",
        "1",
        "--lambda",
        "0",
        "--xi",
        "0",
        "--t-end",
        "6.283185",
        "--step",
        "1e-3",
        "--out",
        path_str(&traj),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("energy drift"));
    assert!(stdout(&out).contains("constraint drift"));

    let text = std::fs::read_to_string(&traj).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let t = last[col("t")];
    assert!((t - 6.283185).abs() < 1e-12);
    // q2 is on the rotating circle at angle t from (0, 1)
    assert!((last[col("q_2_x")] + t.sin()).abs() < 1e-6);
    assert!((last[col("q_2_y")] - t.cos()).abs() < 1e-6);
    assert!(last[col("q_2_x")].hypot(last[col("q_2_y")] - 1.0) < 1e-5);

    let reduced = dir.path().join("reduced.csv");
    let out = run(&[
        "reduce",
        "--input",
        path_str(&fixture("reference.json")),
        "--trajectory",
        path_str(&traj),
        "--out",
        path_str(&reduced),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&reduced).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x,y,theta,p_x,p_y,p_theta,H_R");
    for line in text.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((cols[6] - 3.0).abs() < 1e-10, "{line}");
        assert!((cols[7] - 1.5).abs() < 1e-10, "{line}");
    }
}

#[test]
fn simulate_gauge_changes_only_tensions() {
    let dir = tempfile::tempdir().unwrap();
    let go = |xi: &str, name: &str| {
        let path = dir.path().join(name);
        let out = run(&[
            "simulate",
            "--input",
            path_str(&fixture("reference.json")),
            "--omega",
            "1",
            "--xi",
            xi,
            "--t-end",
            "1",
            "--out",
            path_str(&path),
            "--format",
            "json",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        serde_json::from_str::<serde_json::Value>(&std::fs::read_to_string(path).unwrap()).unwrap()
    };
    let a = go("0", "a.json");
    let b = go("cos", "b.json");
    let (sa, sb) = (a["samples"].as_array().unwrap(), b["samples"].as_array().unwrap());
    assert_eq!(sa.len(), sb.len());
    let last = sa.len() - 1;
    for k in 0..4 {
        for c in 0..2 {
            let d = sa[last]["q"][k][c].as_f64().unwrap() - sb[last]["q"][k][c].as_f64().unwrap();
            assert!(d.abs() < 1e-9);
        }
    }
    let ta = sa[last]["tension"][0].as_f64().unwrap();
    let tb = sb[last]["tension"][0].as_f64().unwrap();
    assert!((tb - ta - 1f64.sin()).abs() < 1e-6);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = ["one.csv", "two.csv"]
        .iter()
        .map(|name| {
            let path = dir.path().join(name);
            let out = run(&[
                "simulate",
                "--input",
                path_str(&fixture("reference.json")),
                "--omega",
                "0.7",
                "--lambda",
                "0.2",
                "--xi",
                "sin:1,2",
                "--t-end",
                "0.5",
                "--out",
                path_str(&path),
            ]);
            assert!(out.status.success());
            std::fs::read(path).unwrap()
        })
        .collect();
    assert_eq!(files[0], files[1]);
}

#[test]
fn usage_errors() {
    let input = fixture("reference.json");
    let out = run(&["simulate", "--input", path_str(&input), "--step", "0"]);
    assert!(!out.status.success());
    let out = run(&["simulate", "--input", path_str(&input), "--t-end", "-1"]);
    assert!(!out.status.success());
    let out = run(&["simulate", "--input", path_str(&input), "--xi", "tan:1,1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("tan:1,1"));
}

#[test]
fn failed_run_leaves_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("never.csv");
    let out = run(&[
        "simulate",
        "--input",
        path_str(&fixture("reference.json")),
        "--xi",
        "nonsense",
        "--out",
        path_str(&target),
    ]);
    assert!(!out.status.success());
    assert!(!target.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn gauge_fix_reports_zero_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("fixed.csv");
    let out = run(&[
        "gauge-fix",
        "--input",
        path_str(&fixture("reference.json")),
        "--omega",
        "1",
        "--fixed-edge",
        "{1,2}",
        "--fixed-value",
        "0",
        "--t-end",
        "6.283185307179586",
        "--out",
        path_str(&traj),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("induced Xi = 0\n"), "{}", stdout(&out));
    assert!(traj.exists());

    let out = run(&[
        "gauge-fix",
        "--input",
        path_str(&fixture("five_rods.json")),
        "--omega",
        "1",
        "--fixed-edge",
        "1-2",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("gauge dimension is 0"));
}

#[test]
fn gauge_compare_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("cmp.json");
    let out = run(&[
        "gauge-compare",
        "--input",
        path_str(&fixture("reference.json")),
        "--omega",
        "1",
        "--t-end",
        "3.141592653589793",
        "--xi",
        "0",
        "--xi",
        "cos",
        "--xi",
        "0.5",
        "--record-every",
        "50",
        "--out",
        path_str(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["discrepancies"]["positions"].as_f64().unwrap() < 1e-6);
    assert!(v["final_tension_spread"]["1-2"].as_f64().unwrap() > 0.1);
    let traces = v["invariant_functionals"].as_array().unwrap();
    assert_eq!(traces.len(), 5);
    assert_eq!(traces[0]["values"].as_array().unwrap().len(), 3);
    assert_eq!(
        traces[0]["values"][0].as_array().unwrap().len(),
        v["times"].as_array().unwrap().len()
    );
}

#[test]
fn oracle_check_passes() {
    let out = run(&["oracle-check"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().skip(1).all(|l| l.ends_with("PASS")), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn tolerance_override_from_environment() {
    let input = fixture("reference.json");
    let bad = Command::new(env!("CARGO_BIN_EXE_gauge-rig"))
        .args(["analyze", "--input", path_str(&input)])
        .env("GAUGE_RIG_TOL", "rank=banana")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let ok = Command::new(env!("CARGO_BIN_EXE_gauge-rig"))
        .args(["analyze", "--input", path_str(&input)])
        .env("GAUGE_RIG_TOL", "rank=1e-9")
        .output()
        .unwrap();
    assert!(ok.status.success());
}
