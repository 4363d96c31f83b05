use std::path::{Path, PathBuf};
use std::process::Command;

use curveflow_cli::output::{read_areas, read_segments};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curveflow"))
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn read(path: &Path) -> std::io::BufReader<std::fs::File> {
    std::io::BufReader::new(std::fs::File::open(path).unwrap())
}

#[test]
fn run_writes_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(
        &conf,
        "mesh.nx = 21\nmesh.ny = 21\nphases.k = 2\nshapes.d = disk 0 0.5 0.5 0.3\nshapes.rest = everywhere 1\n\
         time.dt = 0.005\ntime.K = 3\ntime.M = 6\nmode = bmo_star\noutput.every = 1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["run"]).arg(&conf).arg("--out").arg(&out).arg("--svg").output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let areas = read_areas(read(&out.join("areas.csv"))).unwrap();
    let mut steps: Vec<usize> = areas.iter().map(|r| r.step).collect();
    steps.dedup();
    assert_eq!(steps, (0..=6).collect::<Vec<_>>());
    assert!(read_segments(read(&out.join("segments.csv"))).unwrap().iter().all(|s| s.pair == (0, 1)));
    assert_eq!(std::fs::read_dir(out.join("svg")).unwrap().count(), 7);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("wall clock"));
}

#[test]
fn missing_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, "mesh.ny = 5\nphases.k = 2\n").unwrap();
    let out = bin().arg("run").arg(&conf).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh.nx"));
}

#[test]
fn unreadable_config_fails() {
    let out = bin().args(["run", "/nonexistent/x.conf"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn triple_bubble_areas_stay_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(configs_dir().join("triple_bubble.conf"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let areas = read_areas(read(&dir.path().join("areas.csv"))).unwrap();
    assert_eq!(areas.len(), 61 * 4);
    let worst = areas.iter().map(|r| r.drift.abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-3, "drift {worst}");
}

#[test]
fn validate_frames_passes_and_fault_is_caught() {
    let ok = bin().args(["validate", "--filter", "frames"]).output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("[PASS] frames"));
    let bad = bin().args(["validate", "--filter", "frames", "--inject-frame-fault"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout).contains("[FAIL] frames"));
}

#[test]
fn validate_with_no_match_fails() {
    let out = bin().args(["validate", "--filter", "no-such-check"]).output().unwrap();
    assert!(!out.status.success());
}
