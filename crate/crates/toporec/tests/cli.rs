//! End-to-end tests of the command-line binary: report shape, exit-code
//! families, and determinism of repeated invocations.

use std::path::PathBuf;
use std::process::{Command, Output};

use toporec::report::RunReport;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toporec"))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary should spawn")
}

fn report_of(out: &Output) -> RunReport {
    assert!(
        out.status.success(),
        "expected success, got {:?}; stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    RunReport::from_json(&String::from_utf8_lossy(&out.stdout)).expect("stdout should be a report")
}

#[test]
fn validate_accepts_both_fixtures() {
    for (name, d2, branch_count) in [("gaussian.json", 1, 2), ("trigonal.json", 2, 2)] {
        let out = run(&["validate", "--curve", &fixture(name)]);
        let report = report_of(&out);
        assert_eq!(report.command, "validate");
        let v = report.validation.expect("validate reports validation");
        assert_eq!(v.d2, d2, "{name}");
        assert_eq!(v.branch_points.len(), branch_count, "{name}");
        assert!(v.sheet_count_ok);
        assert!(v.pass);
    }
}

#[test]
fn malformed_curve_file_exits_with_input_error() {
    let dir = std::env::temp_dir().join("toporec-cli-bad");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\"x_num\": 3}").unwrap();
    let out = run(&["validate", "--curve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty(), "no partial report on stdout");

    let out = run(&["validate", "--curve", "/definitely/missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_two_points_returns_the_bergmann_value() {
    let out = run(&[
        "eval",
        "--curve",
        &fixture("gaussian.json"),
        "--k",
        "2",
        "--genus",
        "0",
        "--points",
        "0.3,1.1;-0.7,0.9",
    ]);
    let report = report_of(&out);
    assert_eq!(report.k, Some(2));
    assert_eq!(report.h, Some(0));
    assert_eq!(report.values.len(), 1);
    let v = &report.values[0];
    assert_eq!(v.name, "cubic");
    assert_eq!(v.convention, "reduced-dz");
    // 1 / (z1 - z2)^2 with z1 - z2 = 1 + 0.2i.
    let d = num_complex::Complex::new(1.0, 0.2);
    let want = num_complex::Complex::new(1.0, 0.0) / (d * d);
    assert!((v.re - want.re).abs() < 1e-12);
    assert!((v.im - want.im).abs() < 1e-12);
}

#[test]
fn compare_all_methods_agree_on_the_single_sheet_curve() {
    let out = run(&[
        "eval",
        "--curve",
        &fixture("gaussian.json"),
        "--k",
        "3",
        "--genus",
        "0",
        "--compare",
        "all",
    ]);
    let report = report_of(&out);
    let names: Vec<&str> = report.values.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["cubic", "effective", "diagrams", "onematrix"]);
    assert_eq!(report.diffs.len(), 6, "all pairs are compared");
    for d in &report.diffs {
        assert!(d.rel < 1e-8, "{} vs {} differ by {}", d.a, d.b, d.rel);
    }
}

#[test]
fn compare_all_skips_the_single_sheet_method_on_wider_curves() {
    let out = run(&[
        "eval",
        "--curve",
        &fixture("trigonal.json"),
        "--k",
        "2",
        "--genus",
        "1",
        "--compare",
        "all",
    ]);
    let report = report_of(&out);
    let names: Vec<&str> = report.values.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names, ["cubic", "effective", "diagrams"]);
    for d in &report.diffs {
        assert!(d.rel < 1e-8, "{} vs {} differ by {}", d.a, d.b, d.rel);
    }
}

#[test]
fn branch_point_argument_exits_with_evaluation_error() {
    let out = run(&[
        "eval",
        "--curve",
        &fixture("gaussian.json"),
        "--k",
        "2",
        "--genus",
        "0",
        "--points",
        "1.0,0.0;0.5,0.5",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty(), "no partial report on stdout");
}

#[test]
fn single_sheet_method_on_wider_curve_exits_with_mismatch() {
    let out = run(&[
        "eval",
        "--curve",
        &fixture("trigonal.json"),
        "--k",
        "1",
        "--genus",
        "0",
        "--method",
        "onematrix",
    ]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn malformed_points_exit_with_input_error() {
    for points in ["0.3;1.1", "0.3,1.1;oops,0.9", "0.3,1.1"] {
        let out = run(&[
            "eval",
            "--curve",
            &fixture("gaussian.json"),
            "--k",
            "2",
            "--genus",
            "0",
            "--points",
            points,
        ]);
        assert_eq!(out.status.code(), Some(2), "points = {points}");
    }
}

#[test]
fn diagrams_subcommand_reports_the_cell() {
    let out = run(&["diagrams", "--k", "3", "--genus", "0"]);
    let report = report_of(&out);
    let d = report.diagrams.expect("diagrams command lists diagrams");
    assert_eq!(d.count, 18);
    assert_eq!(d.diagrams.len(), 18);
    assert!(d.diagrams[0].contains("theory: cubic"));
    assert!(d.diagrams[0].contains("vertex: id=v1"));
}

#[test]
fn diagrams_subcommand_reads_the_sheet_count_from_a_curve() {
    let out = run(&[
        "diagrams",
        "--k",
        "1",
        "--genus",
        "1",
        "--theory",
        "effective",
        "--curve",
        &fixture("trigonal.json"),
    ]);
    let report = report_of(&out);
    assert_eq!(report.inputs.d2, Some(2));
    assert!(report.diagrams.unwrap().count > 0);
}

#[test]
fn repeated_invocations_differ_only_in_timing() {
    let args = [
        "eval",
        "--curve",
        &fixture("gaussian.json"),
        "--k",
        "3",
        "--genus",
        "1",
        "--seed",
        "7",
    ];
    let a = report_of(&run(&args));
    let b = report_of(&run(&args));
    assert_eq!(a.with_zeroed_timing(), b.with_zeroed_timing());
    assert_eq!(a.inputs.seed, Some(7));
    assert_eq!(a.inputs.points.len(), 3, "generated points are echoed");
}

#[test]
fn reports_round_trip_through_the_serializer() {
    let out = run(&["validate", "--curve", &fixture("trigonal.json")]);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let report = RunReport::from_json(&text).unwrap();
    assert_eq!(report.to_json(), text);
}

#[test]
fn threaded_diagram_sums_match_the_serial_sum() {
    let base = [
        "eval",
        "--curve",
        &fixture("trigonal.json"),
        "--k",
        "2",
        "--genus",
        "1",
        "--method",
        "diagrams",
        "--seed",
        "3",
    ];
    let serial = report_of(&run(&base));
    let mut threaded_args: Vec<&str> = base.to_vec();
    threaded_args.extend(["--threads", "3"]);
    let threaded = report_of(&run(&threaded_args));
    let a = num_complex::Complex::new(serial.values[0].re, serial.values[0].im);
    let b = num_complex::Complex::new(threaded.values[0].re, threaded.values[0].im);
    assert!((a - b).norm() / a.norm() < 1e-12);
    assert_eq!(threaded.inputs.threads, Some(3));
}
