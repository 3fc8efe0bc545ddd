use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arthromap::mesh::read_ply;
use serde_json::Value;

fn arthromap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arthromap"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_of(out: &Output) -> (i32, String) {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    (out.status.code().unwrap(), v["error"].as_str().unwrap().to_owned())
}

fn small_config(dir: &Path, scene: &str, frames: usize) -> String {
    let cfg = serde_json::json!({
        "camera": { "width": 64, "height": 64 },
        "fusion": { "voxel_size": 1.5, "truncation": 6.0 },
        "synth": { "scene": scene, "frames": frames, "seed": 3 },
    });
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn eval_ate_of_a_trajectory_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "plane", 5);
    stdout_json(&arthromap(&["--config", &cfg, "synth", "--out", "ds"], dir.path()));
    let traj = "ds/trajectory.txt";
    for align in [false, true] {
        let mut args = vec!["eval-ate", traj, traj];
        if align {
            args.push("--align");
        }
        let rep = stdout_json(&arthromap(&args, dir.path()));
        assert_eq!(rep["rmse_translation"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn sphere_synth_then_fuse_gives_a_closed_labeled_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "sphere", 30);
    let synth = stdout_json(&arthromap(&["--config", &cfg, "synth", "--out", "ds"], dir.path()));
    assert_eq!(synth["frames"], 30);
    let fuse = stdout_json(&arthromap(&["--config", &cfg, "fuse", "--dataset", "ds", "--out", "run"], dir.path()));
    assert_eq!(fuse["watertight"], true);
    assert_eq!(fuse["euler_characteristic"], 2);
    let mesh = read_ply(dir.path().join("run/mesh.ply")).unwrap();
    assert_eq!(mesh.vertex_count() as u64, fuse["vertices"].as_u64().unwrap());
    assert!(mesh.labels.windows(2).all(|w| w[0] == w[1]));
    assert!(dir.path().join("run/volume.tsdf").is_file());
    assert!(dir.path().join("run/fuse.json").is_file());
}

#[test]
fn loss_and_recover_pose_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "knee", 3);
    stdout_json(&arthromap(&["--config", &cfg, "synth", "--out", "ds", "--depth-format", "raw"], dir.path()));
    let loss = stdout_json(&arthromap(
        &["--config", &cfg, "loss", "--dataset", "ds", "--target", "1", "--sources", "0,2", "--stereo"],
        dir.path(),
    ));
    assert!(loss["total"].as_f64().unwrap() >= 0.0);
    assert!(loss["pose"].is_null());
    let with_pose = stdout_json(&arthromap(
        &["--config", &cfg, "loss", "--dataset", "ds", "--target", "0", "--sources", "1", "--pred", "ds/trajectory.txt"],
        dir.path(),
    ));
    assert_eq!(with_pose["pose"]["total"].as_f64().unwrap(), 0.0);

    let rec = stdout_json(&arthromap(
        &["--config", &cfg, "recover-pose", "--dataset", "ds", "--out", "run", "--max-iters", "5"],
        dir.path(),
    ));
    let pairs = rec["pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    for p in pairs {
        let trace: Vec<f64> = p["trace"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }
    let traj = fs::read_to_string(dir.path().join("run/trajectory.txt")).unwrap();
    assert_eq!(traj.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count(), 3);
}

#[test]
fn short_trajectory_is_a_length_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "plane", 4);
    stdout_json(&arthromap(&["--config", &cfg, "synth", "--out", "ds"], dir.path()));
    let path = dir.path().join("ds/trajectory.txt");
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().collect();
    fs::write(&path, kept[..kept.len() - 1].join("\n")).unwrap();
    let out = arthromap(&["--config", &cfg, "fuse", "--dataset", "ds", "--out", "run"], dir.path());
    assert_eq!(error_of(&out), (8, "length_mismatch".into()));
}

#[test]
fn missing_files_and_bad_configs_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = arthromap(&["eval-ate", "nope.txt", "nope.txt"], dir.path());
    assert_eq!(error_of(&out), (4, "missing_file".into()));

    let out = arthromap(&["--config", "absent.json", "fuse"], dir.path());
    assert_eq!(error_of(&out), (4, "missing_file".into()));

    fs::write(dir.path().join("bad.json"), r#"{"camera": {"widht": 64}}"#).unwrap();
    let out = arthromap(&["--config", "bad.json", "fuse"], dir.path());
    assert_eq!(error_of(&out), (3, "config".into()));

    fs::write(dir.path().join("neg.json"), r#"{"fusion": {"voxel_size": -1}}"#).unwrap();
    let out = arthromap(&["--config", "neg.json", "fuse"], dir.path());
    assert_eq!(error_of(&out), (3, "config".into()));

    let out = arthromap(&["frobnicate"], dir.path());
    assert_eq!(error_of(&out), (2, "usage".into()));
}
