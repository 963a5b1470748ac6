use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn intercept(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intercept")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

const MINIMAL_BLOCKED: &str = r#"
version = 1
name = "blocked"

[map]
width = 20.0
height = 10.0

[[static_obstacles]]
polygon = [[6.0, 4.0], [8.0, 4.0], [8.0, 6.0], [6.0, 6.0]]

[robot]
start = [2.0, 5.0, 0.0]

[target]
x0 = [7.0, 5.0, 0.0, 0.0]
"#;

#[test]
fn help_matches_golden() {
    let o = intercept(&["--help"]);
    assert!(o.status.success());
    let got = String::from_utf8(o.stdout).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/help.txt");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(&golden).unwrap());
}

#[test]
fn seeded_runs_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = intercept(&["intercept", "fig3", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let csv = files_with_ext(a.path(), "csv");
    let names: Vec<&str> = csv.iter().map(|(n, _)| n.as_str()).collect();
    for want in ["log.csv", "observations.csv", "obstacles.csv", "path.csv", "profile.csv", "st_graph.csv", "summary.csv", "trace.csv"] {
        assert!(names.contains(&want), "missing {want} in {names:?}");
    }
    assert_eq!(csv, files_with_ext(b.path(), "csv"));
    assert_eq!(files_with_ext(&a.path().join("plots"), "svg"), files_with_ext(&b.path().join("plots"), "svg"));
}

#[test]
fn replotting_from_csv_reproduces_the_figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for cmd in [&["intercept", "minimal", "--out", out][..], &["predict", "--trials", "5", "--out", out][..]] {
        let o = intercept(cmd);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let plots = dir.path().join("plots");
    let before = files_with_ext(&plots, "svg");
    assert_eq!(before.len(), 6);
    fs::remove_dir_all(&plots).unwrap();
    let o = intercept(&["plot", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files_with_ext(&plots, "svg"), before);
}

#[test]
fn exit_codes_distinguish_usage_scenario_and_planning_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let code = |args: &[&str]| intercept(args).status.code();

    assert_eq!(code(&[]), Some(2));
    assert_eq!(code(&["intercept", "minimal", "--track", "teleport"]), Some(2));
    assert_eq!(code(&["intercept", "no_such_scenario", "--out", out]), Some(2));
    assert_eq!(code(&["predict", "--trials", "0", "--out", out]), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, MINIMAL_BLOCKED.replace("[robot]", "[robot]\ntop_speed = 3.0")).unwrap();
    let o = intercept(&["plan", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("top_speed"), "{}", stderr(&o));

    let blocked = dir.path().join("blocked.toml");
    fs::write(&blocked, MINIMAL_BLOCKED).unwrap();
    let o = intercept(&["intercept", blocked.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"));

    assert_eq!(code(&["speed", "minimal", "--out", out]), Some(0));
}

#[test]
fn bench_reports_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = intercept(&["bench", "minimal", "--repeat", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    for stage in ["Prediction", "Path-Planner", "Speed-Planner", "Total"] {
        assert!(table.lines().any(|l| l.starts_with(stage)), "{stage} missing from\n{table}");
    }
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
