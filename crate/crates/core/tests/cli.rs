mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{random_sequence, rng};
use cvkit::pose::{read_pose_file, write_pose_file, PoseFormat};

fn cvkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvkit")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = cvkit(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "convert",
        "triangulate",
        "filter",
        "metric",
        "analyze",
        "pipeline",
        "bench-io",
        "serve",
    ] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cvkit(&[]).status.code(), Some(1));
    assert_eq!(cvkit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cvkit(&["convert", "--input", "a.csv"]).status.code(), Some(1));
    let out = cvkit(&["filter", "kalman", "--input", "a", "--out", "b", "--set", "novalue"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("KEY=VALUE"));
}

#[test]
fn missing_input_exits_two_with_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = cvkit(&[
        "convert",
        "--input",
        p(&dir.path().join("absent.csv")),
        "--out",
        p(&dir.path().join("out.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: "), "{}", stderr(&out));
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn convert_round_trips_through_flat_csv() {
    let dir = tempfile::tempdir().unwrap();
    let seq = random_sequence(&mut rng(1), 30, 4, 3);
    let src = dir.path().join("a.csv");
    let flat = dir.path().join("flat.csv");
    let back = dir.path().join("back.csv");
    write_pose_file(&seq, &src, PoseFormat::Cvkit).unwrap();

    let out = cvkit(&["convert", "--input", p(&src), "--to", "flat_csv", "--out", p(&flat)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = cvkit(&["convert", "--input", p(&flat), "--from", "flat_csv", "--out", p(&back)]);
    assert!(out.status.success(), "{}", stderr(&out));

    assert_eq!(read_pose_file(&back, PoseFormat::Cvkit).unwrap(), seq);
}

#[test]
fn unknown_processor_and_missing_param_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("a.csv");
    write_pose_file(&random_sequence(&mut rng(2), 10, 2, 3), &src, PoseFormat::Cvkit).unwrap();
    let out_path = dir.path().join("f.csv");

    let out = cvkit(&["filter", "median_blur", "--input", p(&src), "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("median_blur"));

    let out = cvkit(&["filter", "velocity_filter", "--input", p(&src), "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("max_speed"), "{}", stderr(&out));

    let out = cvkit(&[
        "filter",
        "velocity_filter",
        "--input",
        p(&src),
        "--out",
        p(&out_path),
        "--set",
        "max_speed=fast",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn filter_dispatches_on_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("a.csv");
    write_pose_file(&random_sequence(&mut rng(3), 10, 2, 2), &src, PoseFormat::Cvkit).unwrap();
    let out_path = dir.path().join("f.csv");

    let out = cvkit(&["filter", "moving_average", "--input", p(&src), "--out", p(&out_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(read_pose_file(&out_path, PoseFormat::Cvkit).unwrap().dims(), 2);

    // the _2d ids are pipeline stages, not CLI filters
    let out = cvkit(&["filter", "moving_average_2d", "--input", p(&src), "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    let out = cvkit(&["filter", "occupancy_map", "--input", p(&src), "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_validate_reports_each_problem() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.pipeline");
    std::fs::write(&good, "name = ok\nsource = in.csv\nsink = out.csv\n\n[stage]\nid = loader\n\n[stage]\nid = kalman\n\n[stage]\nid = saver\n").unwrap();
    let out = cvkit(&["pipeline", "validate", p(&good)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");

    let bad = dir.path().join("bad.pipeline");
    std::fs::write(&bad, "name = bad\nsource = in.csv\n\n[stage]\nid = loader\n\n[stage]\nid = nope\n\n[stage]\nid = moving_average\nwindow = wide\n").unwrap();
    let out = cvkit(&["pipeline", "validate", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("nope"), "{err}");
    assert!(err.contains("window"), "{err}");
}

#[test]
fn metric_prints_csv_report() {
    let dir = tempfile::tempdir().unwrap();
    let seq = random_sequence(&mut rng(4), 20, 3, 3);
    let a = dir.path().join("a.csv");
    write_pose_file(&seq, &a, PoseFormat::Cvkit).unwrap();
    let out = cvkit(&["metric", "mpjpe", "--pred", p(&a), "--gt", p(&a)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("scope,key,value"));
    assert!(text.lines().any(|l| l == "overall,mpjpe,0"), "{text}");
}
