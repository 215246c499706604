use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn earverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earverify"))
        .args(["--quiet", "--threads", "1"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = earverify(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, seed: &str) -> String {
    ok(&[
        "synth", "--subjects", "3", "--shots", "1", "--seed", seed, "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn synth_writes_a_verified_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = synth(&a, "4");
    let second = synth(&b, "4");
    assert!(first.contains("subjects 3  rows 90"));
    assert_eq!(first, second);
    assert_eq!(
        fs::read(a.join("features.csv")).unwrap(),
        fs::read(b.join("features.csv")).unwrap()
    );
    let manifest = fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"feature_dim\": 256"));
}

#[test]
fn invalid_arguments_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let out = earverify(&["synth", "--subjects", "2", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("manifest.json").exists());

    let data = tmp.path().join("d");
    synth(&data, "1");
    let report = tmp.path().join("r.json");
    let out = earverify(&[
        "run", "--data", data.to_str().unwrap(), "--r", "1.5", "--nbc", "9", "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!report.exists());

    // --r needs --nbc.
    let out = earverify(&["run", "--data", data.to_str().unwrap(), "--r", "0.3", "--out", "x.json"]);
    assert!(!out.status.success());
}

#[test]
fn missing_inputs_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let gone = tmp.path().join("nope");
    let out = earverify(&["report", "--in", gone.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = earverify(&[
        "run", "--data", gone.to_str().unwrap(), "--out",
        tmp.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_report_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"metadata\": 3}").unwrap();
    let out = earverify(&["report", "--in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_grid_and_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data, "2");
    let d = data.to_str().unwrap();

    let run = tmp.path().join("run.json");
    let table = ok(&["run", "--data", d, "--r", "0.3", "--nbc", "4500", "--scale-nbc", "--out", run.to_str().unwrap()]);
    assert!(table.contains("3 subjects, 6 pairs"));
    assert!(tmp.path().join("run_baseline.csv").exists());
    assert!(tmp.path().join("run_r0.3_n90.csv").exists());

    let base = tmp.path().join("base.json");
    ok(&["run", "--data", d, "--out", base.to_str().unwrap()]);
    let text = fs::read_to_string(&base).unwrap();
    assert!(text.contains("\"conditions\": []"));

    let grid = tmp.path().join("grid.json");
    let csv = tmp.path().join("grid.csv");
    ok(&[
        "grid", "--data", d, "--r-grid", "0.1,0.4", "--nbc-grid", "9,900", "--scale-nbc",
        "--csv", csv.to_str().unwrap(), "--out", grid.to_str().unwrap(),
    ]);
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 5);
    assert!(rows.starts_with("r,n_bc,auc,eer_pct,frr_at_far_0.01,frr_at_far_0.1,frr_at_far_1,star"));

    for f in [&run, &base, &grid] {
        let shown = ok(&["report", "--in", f.to_str().unwrap()]);
        assert!(shown.contains("eer%"));
    }
    let exported = ok(&["report", "--in", grid.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(exported, rows);

    let det_dir = tmp.path().join("det");
    ok(&["report", "--in", grid.to_str().unwrap(), "--format", "det", "--out-dir", det_dir.to_str().unwrap()]);
    let mut names: Vec<String> = fs::read_dir(&det_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["det_baseline.csv", "det_r0.1_n1.csv", "det_r0.1_n18.csv", "det_r0.4_n1.csv", "det_r0.4_n18.csv"]
    );
    let det = fs::read_to_string(det_dir.join("det_baseline.csv")).unwrap();
    assert!(det.starts_with("threshold,far,frr,tar\n"));
    assert!(det.trim_end().ends_with("inf,0,1,0"));
}

#[test]
fn table_rows_follow_eer() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data, "3");
    let grid = tmp.path().join("g.json");
    let table = ok(&[
        "grid", "--data", data.to_str().unwrap(), "--r-grid", "0.1,0.5,0.9", "--nbc-grid", "45",
        "--out", grid.to_str().unwrap(),
    ]);
    let eers: Vec<f64> = table
        .lines()
        .skip(3)
        .map(|l| l.split_whitespace().nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(eers.len(), 3);
    assert!(eers.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn infeasible_single_condition_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data, "5");
    let out = earverify(&[
        "run", "--data", data.to_str().unwrap(), "--r", "0.3", "--nbc", "9000", "--out",
        tmp.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
