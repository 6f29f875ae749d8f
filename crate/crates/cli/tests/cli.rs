use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radial-opf")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn check_conditions_reports_all_five() {
    let text = stdout(&["check-conditions", "cigre_mv"]);
    for c in ["C1", "C2", "C3", "C4", "C5"] {
        assert!(text.contains(c), "{text}");
    }
    assert!(text.contains("all conditions hold: true"));

    let csv = stdout(&["check-conditions", "ieee34", "--scale", "1.5", "--csv"]);
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "c1_norm,c2_norm,eta5,eta1,eta2,eta,holds");
    assert!(lines[1].ends_with("false"));
}

#[test]
fn solve_recover_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    fs::write(path("cost.txt"), "[import]\nslope = 150\n[bus 3]\np = 50\n").unwrap();

    let solved =
        stdout(&["solve", "threebus", "--cost", &path("cost.txt"), "--pmax-rule", "loadflow", "-o", &path("sol.txt")]);
    assert!(solved.contains("status optimal"), "{solved}");

    let out = run(&[
        "recover",
        &path("sol.txt"),
        "threebus",
        "--pmax-rule",
        "loadflow",
        "--trace",
        &path("trace.csv"),
        "-o",
        &path("rec.txt"),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("converged"));
    assert!(fs::read_to_string(path("trace.csv")).unwrap().starts_with("n,delta_f_norm"));

    let out = run(&["loadflow", "threebus", "--verify", &path("rec.txt")]);
    assert!(out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    let dev: f64 = msg.split_whitespace().rev().nth(1).unwrap().parse().unwrap();
    assert!(dev < 1e-8, "{msg}");
}

#[test]
fn loadflow_csv_follows_the_feeder() {
    let csv = stdout(&["loadflow", "ieee34", "--csv"]);
    let mut seen = vec!["800".to_string()];
    for row in csv.lines().skip(1) {
        let cols: Vec<_> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert!(seen.iter().any(|s| s == cols[1]), "parent {} listed after its child", cols[1]);
        seen.push(cols[0].to_string());
    }
    assert_eq!(seen.len(), 33);
}

#[test]
fn matrices_dump_writes_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let listed = stdout(&["matrices", "dump", "cigre_mv", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(listed.lines().count(), 11);
    let h = fs::read_to_string(dir.path().join("H.csv")).unwrap();
    assert_eq!(h.lines().count(), 10);
}

#[test]
fn bench_threebus_csv_schema() {
    let csv = stdout(&["bench", "threebus"]);
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("case,line,top_a,bottom_a,limit_a"));
    assert_eq!(rows.count(), 9);
}

#[test]
fn bench_compress_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.csv");
    let summary = stdout(&["bench", "compress", "cigre_mv", "--mode", "voltage", "-o", file.to_str().unwrap()]);
    assert!(summary.contains("voltage mode"), "{summary}");
    assert!(fs::read_to_string(file).unwrap().starts_with("bus,voltage_aux,voltage,current_aux,current"));
}

#[test]
fn bad_input_fails_cleanly() {
    assert!(!run(&["check-conditions", "no-such-grid"]).status.success());
    assert!(!run(&["bench", "compress", "cigre_mv", "--mode", "sideways"]).status.success());
    assert!(!run(&["check-conditions", "ieee34", "--pmax-rule", "guess"]).status.success());
}
