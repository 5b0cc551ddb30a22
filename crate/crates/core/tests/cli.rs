use std::fs;
use std::process::Command;

fn dbsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dbsim"))
}

#[test]
fn single_point_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = dbsim()
        .args(["--model", "free", "--assoc", "rss", "--runs", "1", "--duration", "60", "--warmup", "5"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(matches!(status.code(), Some(0) | Some(3)));
    let point = out.join("free-rss_v2_a4");
    for f in ["config.toml", "packets.csv", "samples.csv", "summary.json", "pairs_near.csv", "cdf_distance.csv"] {
        assert!(point.join(f).exists(), "{f} missing");
    }
    let echoed = fs::read_to_string(point.join("config.toml")).unwrap();
    let cfg = dbsim::SimConfig::from_toml_str(&echoed).unwrap();
    assert_eq!(cfg.run.duration_s, 60.0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(point.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"], 1);
    assert!(summary["seeds"].as_array().unwrap().len() == 1);
}

#[test]
fn sweep_axes_multiply() {
    let dir = tempfile::tempdir().unwrap();
    let status = dbsim()
        .args(["--sweep", "--model", "hov,free", "--speed", "2,4", "--runs", "1", "--duration", "10", "--warmup", "0"])
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(matches!(status.code(), Some(0) | Some(3)));
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["free-rss_v2_a4", "free-rss_v4_a4", "free-throughput_v2_a4", "free-throughput_v4_a4", "hov_v2_a4", "hov_v4_a4"]
    );
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[drone]\nspeed_mps = 4.0\n[run]\nduration_s = 10.0\nwarmup_s = 0.0\nruns = 1\n").unwrap();
    let status = dbsim()
        .arg("--config")
        .arg(&cfg)
        .args(["--speed", "6", "--model", "restricted"])
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(matches!(status.code(), Some(0) | Some(3)));
    assert!(dir.path().join("o/restricted_v6_a4/summary.json").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[run]\nallocation_interval_s = 0.3\n").unwrap();
    let out = dbsim().arg("--config").arg(&bad).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("allocation_interval_s"));

    fs::write(&bad, "[run]\nbogus = 1\n").unwrap();
    let out = dbsim().arg("--config").arg(&bad).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    fs::write(&file, "").unwrap();
    let out = dbsim()
        .args(["--duration", "10", "--warmup", "0", "--runs", "1"])
        .arg("--out")
        .arg(file.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
