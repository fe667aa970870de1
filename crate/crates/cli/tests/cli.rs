use std::path::Path;
use std::process::{Command, Output};

fn trends(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trends"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "stderr: {text}");
    serde_json::from_str(text.trim()).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn usage_errors_exit_2_with_one_json_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["simulate", "--reps", "0"],
        &["simulate", "--setup", "3"],
        &["simulate", "--rule", "aic"],
        &["simulate", "--no-such-flag"],
        &["vintages", "--step", "0"],
        &["synth", "--n-samples", "0"],
        &["corr"],
        &["nowcast", "--catalog", "x"],
        &["--jobs", "0", "vintages"],
        &[],
    ];
    for args in cases {
        let out = trends(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = error_json(&out);
        assert_eq!(err["error"], "usage", "{args:?}");
        assert!(!err["message"].as_str().unwrap().is_empty());
    }
}

#[test]
fn help_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = trends(tmp.path(), &["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("simulate"));
}

#[test]
fn domain_errors_exit_1_with_their_kind() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(trends(tmp.path(), &["synth", "--geo", "BR", "--n-samples", "3"]).status.success());
    let out = trends(tmp.path(), &["corr", "--catalog", "out/catalog", "--geo", "AR"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "catalog");

    std::fs::write(tmp.path().join("2024-01-01.csv"), "not an export\n").unwrap();
    let out = trends(tmp.path(), &["ingest", "--catalog", "cat", "2024-01-01.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "parse");
}

#[test]
fn config_files_fill_in_flags_the_command_line_leaves_out() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("cfg.json"),
        r#"{"command": "vintages", "seed": 4, "n-vintages": 5, "step": 2, "window-months": 30}"#,
    )
    .unwrap();
    let out = trends(tmp.path(), &["vintages", "--config", "cfg.json", "--step", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&read(tmp.path(), "out/vintages.manifest.json")).unwrap();
    assert_eq!(manifest["master_seed"], 4);
    assert_eq!(manifest["config"]["n-vintages"], 5);
    assert_eq!(manifest["config"]["step"], 3);
    let ids: std::collections::BTreeSet<String> = read(tmp.path(), "out/vintages.csv")
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(ids.len(), 5);
    assert!(ids.contains("v12"));

    let out = trends(tmp.path(), &["--config", "cfg.json", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_table_and_per_replication_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = trends(tmp.path(), &["simulate", "--reps", "4", "--n-samples", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(tmp.path(), "out/selection_table.csv");
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "setup,US_1,US_2,US_3,BR_1,BR_2,BR_3");
    assert_eq!(rows.len(), 3);
    for setup in [1, 2] {
        let reps = read(tmp.path(), &format!("out/replications_setup{setup}.csv"));
        assert_eq!(reps.lines().count(), 5);
    }
}

#[test]
fn waves_synth_feeds_a_nowcast() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(trends(tmp.path(), &["synth", "--preset", "waves", "--n-samples", "3"]).status.success());
    let out = trends(
        tmp.path(),
        &[
            "nowcast",
            "--target",
            "out/target_br.csv",
            "--catalog",
            "out/catalog",
            "--train",
            "2020-02-01:2020-05-31",
            "--out-dir",
            "nc",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(tmp.path(), "nc/nowcast_table.csv");
    assert!(table.starts_with("target,proposed,worst,best,average\n"));
    let predictions = read(tmp.path(), "nc/predictions.csv");
    // June 2020: 30 evaluation days
    assert_eq!(predictions.lines().count(), 31);
    assert_eq!(predictions.lines().next().unwrap().split(',').count(), 3 + 3);
}
