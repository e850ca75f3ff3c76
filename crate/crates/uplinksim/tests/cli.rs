//! End-to-end behaviour of the `uplinksim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uplinksim::config;
use uplinksim::export::{read_events, read_summary};
use uplinksim_core::{EventKind, PolicyKind, SimTime};

fn uplinksim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uplinksim")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn arrivals(path: &Path) -> Vec<(u64, u32, u64, u64)> {
    let log = read_events(fs::File::open(path).unwrap(), SimTime::from_millis(5), 0, path).unwrap();
    log.of_kind(EventKind::Arrival).map(|e| (e.time.as_micros(), e.station, e.request, e.bits)).collect()
}

#[test]
fn two_policies_see_identical_arrivals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = uplinksim(&[
        "run",
        "--scenario",
        "canonical",
        "--policy",
        "edf,hedf",
        "--seed",
        "1",
        "--frames",
        "400",
        "--out",
        out,
        "-q",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let rows = read_summary(fs::File::open(dir.path().join("summary.csv")).unwrap(), Path::new("summary")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].policy, PolicyKind::Edf);
    assert_eq!(rows[1].policy, PolicyKind::Hedf);

    let a = arrivals(&dir.path().join("events_canonical_edf_seed1.csv"));
    let b = arrivals(&dir.path().join("events_canonical_hedf_seed1.csv"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn starvation_run_reports_station_b_starving() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = uplinksim(&[
        "run",
        "--scenario",
        "starvation",
        "--policy",
        "edf",
        "--seed",
        "1",
        "--frames",
        "2000",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("starvation"));
    let rows = read_summary(fs::File::open(dir.path().join("summary.csv")).unwrap(), Path::new("summary")).unwrap();
    let b = config::builtin("starvation").unwrap().stations[1].id;
    assert!(rows[0].metrics.stations[&b].max_starvation_window_ms > 0.0);
}

#[test]
fn missing_scenario_file_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fresh");
    let o = uplinksim(&["run", "--scenario", "does/not/exist.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn existing_files_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["run", "--scenario", "canonical", "--policy", "rr", "--frames", "100", "--out", out, "-q"];
    assert_eq!(code(&uplinksim(&args)), 0);
    let o = uplinksim(&args);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&uplinksim(&forced)), 0);
}

#[test]
fn forced_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = [
        "run",
        "--scenario",
        "canonical",
        "--policy",
        "wrr,hedf",
        "--seed",
        "3,4",
        "--frames",
        "300",
        "--out",
        out,
        "-q",
        "--force",
    ];
    assert_eq!(code(&uplinksim(&args)), 0);
    let snapshot = |d: &Path| {
        let mut files: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.into_iter().map(|p| (p.clone(), fs::read(p).unwrap())).collect::<Vec<_>>()
    };
    let first = snapshot(dir.path());
    assert_eq!(first.len(), 5);
    assert_eq!(code(&uplinksim(&args)), 0);
    assert_eq!(first, snapshot(dir.path()));
}

#[test]
fn validate_builtin_prints_effective_config() {
    let o = uplinksim(&["validate", "canonical"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let back = config::parse(&text).unwrap();
    assert_eq!(back, config::builtin("canonical").unwrap());
}

#[test]
fn validate_reports_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = config::to_toml(&config::builtin("canonical").unwrap());
    text = text.replace("ewma_alpha = 0.1", "ewma_alpha = 1.5");
    assert!(text.contains("ewma_alpha = 1.5"));
    let path = dir.path().join("bad.toml");
    fs::write(&path, &text).unwrap();
    let o = uplinksim(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("ewma_alpha"));

    // Duplicate station id on top of the bad alpha: both are listed.
    let mut s = config::parse(&text).unwrap();
    s.stations[1].id = s.stations[0].id;
    fs::write(&path, config::to_toml(&s)).unwrap();
    let o = uplinksim(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("ewma_alpha"), "{err}");
    assert!(err.contains("stations[0]") && err.contains("stations[1]"), "{err}");
}

#[test]
fn run_rejects_invalid_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = uplinksim(&["run", "--frames", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("total_frames"));
    assert!(!out.exists());
}

#[test]
fn unknown_policy_is_a_usage_error() {
    let o = uplinksim(&["run", "--policy", "fifo"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_rederives_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = uplinksim(&[
        "run",
        "--scenario",
        "canonical",
        "--policy",
        "edf,ssbpf_edf",
        "--seed",
        "1,2",
        "--frames",
        "300",
        "--out",
        out,
        "-q",
    ]);
    assert_eq!(code(&o), 0);
    let o = uplinksim(&["report", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("4 of 4 runs re-derived"));

    // Tamper with one event file: report must notice.
    let f = dir.path().join("events_canonical_edf_seed2.csv");
    let text = fs::read_to_string(&f).unwrap();
    let cut: Vec<&str> = text.lines().take(text.lines().count() - 5).collect();
    fs::write(&f, cut.join("\n") + "\n").unwrap();
    let o = uplinksim(&["report", "--out", out]);
    assert_eq!(code(&o), 3);
}

#[test]
fn report_on_missing_directory_is_io_error() {
    let o = uplinksim(&["report", "--out", "/nonexistent/uplinksim/out"]);
    assert_eq!(code(&o), 3);
}
