use std::fs;
use std::process::{Command, Output};

fn leftrs(dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leftrs"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn gen_analyze_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("sys.json");
    let out = leftrs(
        dir.path(),
        &[
            "--seed",
            "4",
            "gen",
            "--cores",
            "2",
            "--tasks-per-core",
            "2",
            "-o",
            sys.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));

    let out = leftrs(
        dir.path(),
        &[
            "--protocols",
            "leftrs,checkpointing",
            "analyze",
            sys.to_str().unwrap(),
            "--json",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["protocol"], "checkpointing");

    let faults = dir.path().join("faults.txt");
    fs::write(&faults, "# task release segment attempt\n0 0 0 1\n").unwrap();
    let out = leftrs(
        dir.path(),
        &[
            "simulate",
            sys.to_str().unwrap(),
            "--faults",
            faults.to_str().unwrap(),
            "--pattern",
            "sporadic:3",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["jobs"].as_u64().unwrap() > 0);
    let trace = fs::read_to_string(dir.path().join("trace.txt")).unwrap();
    assert!(trace.starts_with("0 release"));
}

#[test]
fn sweep_writes_csv_svg_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = leftrs(
        dir.path(),
        &[
            "--systems-per-point",
            "5",
            "sweep",
            "--param",
            "f",
            "--values",
            "0,2",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("param,value,protocol,schedulable,count,fraction\n"));
    for f in ["f_curve.csv", "f_exclusive.csv", "f_curve.json", "f.svg"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let plot = dir.path().join("again.svg");
    let out = leftrs(
        dir.path(),
        &[
            "plot",
            dir.path().join("f_curve.json").to_str().unwrap(),
            "-o",
            plot.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(fs::read_to_string(plot).unwrap().starts_with("<svg"));
    assert!(dir.path().join("again.csv").exists());
}

#[test]
fn table_prints_exclusive_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = leftrs(
        dir.path(),
        &["--systems-per-point", "5", "table", "--values", "1"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.starts_with("param,value,exclA,exclB\nf,1,"), "{s}");
}

#[test]
fn clean_soundness_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = leftrs(
        dir.path(),
        &[
            "sound",
            "--systems",
            "2",
            "--seeds",
            "2",
            "--cores",
            "2",
            "--tasks-per-core",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(dir.path().join("soundness.json").exists());
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"num_cores\": 1}").unwrap();
    assert_eq!(
        leftrs(dir.path(), &["analyze", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(leftrs(dir.path(), &["gen", "--rsf", "3"]).status.code(), Some(2));
    assert_eq!(
        leftrs(dir.path(), &["--systems-per-point", "0", "sweep"])
            .status
            .code(),
        Some(2)
    );
    // clap rejects unknown protocols with its own usage error
    assert_eq!(
        leftrs(dir.path(), &["--protocols", "pcp", "analyze", "x"])
            .status
            .code(),
        Some(2)
    );
}
