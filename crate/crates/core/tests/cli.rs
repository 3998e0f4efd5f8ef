use std::path::PathBuf;
use std::process::Command;

fn hoising(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hoising"))
        .args(args)
        .output()
        .expect("run hoising");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_tmp(name: &str, text: &str) -> String {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Last CSV row of a trace as (a1, a2).
fn final_point(csv: &str) -> (f64, f64) {
    let last = csv.lines().last().unwrap();
    let f: Vec<f64> = last.split(',').map(|x| x.parse().unwrap()).collect();
    (f[1], f[2])
}

#[test]
fn solve_exit_codes() {
    let sat = write_tmp("one-clause.hybrid", "p hybrid 2 1\ncnf 1 -2 0\n");
    let (code, out, _) = hoising(&["solve", &sat, "--seed", "1", "--trials", "5"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["successes"], 5);
    assert_eq!(v["best"]["satisfied"], true);
    assert_eq!(v["ground_energy"], -2.0);
    assert!(v["weak_convexity"]["type-III"].as_f64().unwrap() > 4.0);

    let unsat = write_tmp("contradiction.hybrid", "p hybrid 1 2\nxor 1 0\ncnf -1 0\n");
    let (code, out, _) = hoising(&["solve", &unsat, "--seed", "1", "--trials", "3", "--steps", "20"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["successes"], 0);
    assert_eq!(v["first_success_step"], serde_json::Value::Null);

    let bad = write_tmp("bad.hybrid", "c header follows\np hybrid 2 1\nxor 1 2\n");
    let (code, out, err) = hoising(&["solve", &bad, "--seed", "1"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("line 3") && err.contains("terminating 0"), "{err}");

    let (code, _, _) = hoising(&["solve", "/nonexistent/file.hybrid", "--seed", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn solve_reports_both_targets_off_unit_p() {
    let f = write_tmp("xor.hybrid", "p hybrid 2 1\nxor 1 2 0\n");
    let (_, out, _) = hoising(&["solve", &f, "--seed", "2", "--relaxation", "type-II", "--p", "4", "--trials", "2"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["target_energy"], -2.0 - 2.0 * 16.0);
    assert_eq!(v["target_energy_p1"], -2.0 - 2.0);
}

#[test]
fn trace_examples() {
    let (code, out, _) = hoising(&["trace", "--xor", "--init", "0.4,0.4", "--seed", "1"]);
    assert_eq!(code, 0);
    let (a1, a2) = final_point(&out);
    assert!(a1.hypot(a2) < 1e-3, "({a1}, {a2})");

    let (_, out, _) = hoising(&["trace", "--xor", "--relaxation", "type-II", "--init", "0.4,0.4", "--seed", "1"]);
    let (a1, a2) = final_point(&out);
    assert!((a1 - 1.0).abs() < 0.2 && (a2 - 1.0).abs() < 0.2, "({a1}, {a2})");

    let (_, out, _) = hoising(&["trace", "--xor", "--relaxation", "type-III", "--init", "0.3,-1.1", "--seed", "1"]);
    let (a1, a2) = final_point(&out);
    for a in [a1, a2] {
        assert!(((2.0 * a).cos() + 1.0).abs() < 1e-3, "{a}");
    }
}

#[test]
fn trace_rejects_wide_constraints() {
    let (code, _, err) = hoising(&["trace", "--table", "01101001", "--seed", "1"]);
    assert_eq!(code, 2);
    assert!(err.contains("arity 2"), "{err}");
}

#[test]
fn generated_files_round_trip() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ple-out");
    let dir_s = dir.to_str().unwrap();
    let (code, out, _) = hoising(&["generate-ple", "--n", "6", "--count", "3", "--seed", "11", "--out-dir", dir_s]);
    assert_eq!(code, 0);
    let paths: Vec<&str> = out.lines().collect();
    assert_eq!(paths.len(), 3);
    for p in paths {
        let text = std::fs::read_to_string(p).unwrap();
        let f = hoising::instances::parse(&text).unwrap();
        assert_eq!((f.n, f.constraints.len()), (18, 13));
        assert_eq!(hoising::instances::serialize(&f).unwrap(), text);
        let (code, _, _) = hoising(&["solve", p, "--seed", "4", "--trials", "10"]);
        assert!(code == 0 || code == 1);
    }
}

#[test]
fn jobs_env_var_is_honoured() {
    let args = ["bench", "--n", "4", "--instances", "2", "--trials", "3", "--steps", "20", "--seed", "8"];
    let a = Command::new(env!("CARGO_BIN_EXE_hoising")).args(args).env("HOISING_JOBS", "1").output().unwrap();
    let b = Command::new(env!("CARGO_BIN_EXE_hoising")).args(args).env("HOISING_JOBS", "0").output().unwrap();
    assert!(a.status.success());
    assert_eq!(b.status.code(), Some(2));
    let c = Command::new(env!("CARGO_BIN_EXE_hoising")).args(args).env("HOISING_JOBS", "2").output().unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn bench_csv_shape() {
    let (code, out, err) = hoising(&[
        "bench", "--n", "4,5", "--instances", "2", "--trials", "2", "--steps", "10", "--relaxations", "type-I,type-III",
        "--seed", "3",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# hoising-bench v1"));
    assert_eq!(lines.len(), 2 + 2 * 2 * 10);
    assert!(lines[2].starts_with("4,type-I,exact,1,"));
    let summary: Vec<&str> = err.lines().collect();
    assert!(summary[0].starts_with("# hoising-bench-summary v1"));
    assert_eq!(summary.len(), 2 + 4);
}
