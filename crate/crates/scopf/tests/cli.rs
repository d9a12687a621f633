use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(file: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus").join(file).to_string_lossy().into_owned()
}

fn scopf(dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scopf")).args(args).current_dir(dir).output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn rank_prints_descending_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = scopf(dir.path(), &["rank", "--case", &corpus("ieee14.case"), "--con", &corpus("ieee14.con"), "--khat", "3"]);
    assert!(out.status.success());
    let rows: Vec<(String, f64)> = text(&out.stdout)
        .lines()
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.to_string(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], ("G1".to_string(), 3.324));
    assert!(rows.windows(2).all(|w| w[0].1 >= w[1].1));
}

#[test]
fn realtime_without_warm_point_downgrades() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["rank", "--case", &corpus("bus3.case"), "--con", &corpus("bus3.con")];
    let rating = scopf(dir.path(), &args);
    let mut with = args.to_vec();
    with.extend(["--select", "realtime"]);
    let realtime = scopf(dir.path(), &with);
    assert!(realtime.status.success());
    assert!(text(&realtime.stderr).contains("ranking by rating instead"));
    assert_eq!(rating.stdout, realtime.stdout);
}

#[test]
fn realtime_with_warm_point_uses_it() {
    let dir = tempfile::tempdir().unwrap();
    let (case, con) = (corpus("bus3.case"), corpus("bus3.con"));
    let c1 = scopf(dir.path(), &["code1", "--case", &case, "--con", &con, "--out", "s1.txt"]);
    assert_eq!(c1.status.code(), Some(0), "{}", text(&c1.stderr));
    let out = scopf(
        dir.path(),
        &["rank", "--case", &case, "--con", &con, "--select", "realtime", "--warm-point", "s1.txt"],
    );
    assert!(out.status.success());
    assert!(!text(&out.stderr).contains("instead"));
    assert_eq!(text(&out.stdout).lines().count(), 5);
}

#[test]
fn zero_budget_is_degraded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = scopf(
        dir.path(),
        &["code1", "--case", &corpus("bus5.case"), "--con", &corpus("bus5.con"), "--budget", "0"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("solution1.txt").exists());
    assert!(!dir.path().join("solution1.txt.trace.csv").exists());
}

#[test]
fn extensive_method_writes_solution1() {
    let dir = tempfile::tempdir().unwrap();
    let out = scopf(
        dir.path(),
        &["code1", "--case", &corpus("wscc9.case"), "--con", &corpus("wscc9.con"), "--method", "lblc-extensive"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("extensive LP objective"));
}

#[test]
fn broken_case_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("bad.case");
    std::fs::write(&case, "[buses]\n1,0.9,1.1\n").unwrap();
    let out = scopf(dir.path(), &["code1", "--case", case.to_str().unwrap(), "--con", &corpus("bus2.con")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("line 2"));
    assert!(!dir.path().join("solution1.txt").exists());
}

#[test]
fn config_file_applies_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scopf.toml"), "khat = 2\n").unwrap();
    let base = ["--config", "scopf.toml", "rank", "--case", &corpus("bus3.case"), "--con", &corpus("bus3.con")];
    let from_file = scopf(dir.path(), &base);
    assert_eq!(text(&from_file.stdout).lines().count(), 2);
    let mut flagged = base.to_vec();
    flagged.extend(["--khat", "4"]);
    assert_eq!(text(&scopf(dir.path(), &flagged).stdout).lines().count(), 4);
}

#[test]
fn code2_without_solution1_still_writes_solution2() {
    let dir = tempfile::tempdir().unwrap();
    let out = scopf(
        dir.path(),
        &["code2", "--case", &corpus("bus3.case"), "--con", &corpus("bus3.con"), "--solution1", "missing.txt"],
    );
    assert_eq!(out.status.code(), Some(3));
    let body = std::fs::read_to_string(dir.path().join("solution2.txt")).unwrap();
    assert_eq!(body.matches("--contingency,").count(), 5);
}
