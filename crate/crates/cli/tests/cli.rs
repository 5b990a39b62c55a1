use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fitgrasp::geometry::ply::read_ply;
use fitgrasp::io::{read_json, CandidatesFile, TrajectoriesFile};
use fitgrasp::scene::{kettle_handle_scene, KETTLE_SCENE_SIZE};
use nalgebra::Vector3;

fn fitgrasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fitgrasp"))
        .args(args)
        .env_remove("FITGRASP_CONFIG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fitgrasp-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_sphere_lies_on_its_radius() {
    let dir = workdir("sphere");
    let ply = dir.join("sphere.ply");
    let out = fitgrasp(&["synth", "--shape", "sphere", "--size", "0.05", "--out", s(&ply)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cloud = read_ply(&ply).unwrap();
    let center = Vector3::new(0.0, 0.0, 0.05);
    assert!(cloud.len() > 100);
    for (p, n) in cloud.points().iter().zip(cloud.normals()) {
        assert!(((p - center).norm() - 0.05).abs() <= 1e-9);
        assert!((n - (p - center).normalize()).norm() < 1e-9);
    }
}

#[test]
fn synth_partial_view_hides_back_faces() {
    let dir = workdir("view");
    for shape in ["sphere", "box", "cylinder"] {
        let ply = dir.join(format!("{shape}.ply"));
        let out = fitgrasp(&["synth", "--shape", shape, "--view", "0,0,1", "--out", s(&ply)]);
        assert_eq!(code(&out), 0);
        let cloud = read_ply(&ply).unwrap();
        assert!(!cloud.is_empty());
        assert!(cloud.normals().iter().all(|n| n.z >= 0.0), "{shape}");
    }
}

#[test]
fn synth_noise_matches_sigma() {
    let dir = workdir("noise");
    let ply = dir.join("noisy.ply");
    let out = fitgrasp(&["synth", "--shape", "sphere", "--size", "0.05", "--noise", "0.002", "--seed", "3", "--out", s(&ply)]);
    assert_eq!(code(&out), 0);
    let cloud = read_ply(&ply).unwrap();
    let center = Vector3::new(0.0, 0.0, 0.05);
    let ms = cloud.points().iter().map(|p| ((p - center).norm() - 0.05).powi(2)).sum::<f64>() / cloud.len() as f64;
    let rms = ms.sqrt();
    assert!((rms - 0.002).abs() <= 0.2 * 0.002, "rms {rms}");
}

#[test]
fn malformed_ply_exits_with_1() {
    let dir = workdir("bad");
    let ply = dir.join("bad.ply");
    std::fs::write(&ply, "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nend_header\n1\n").unwrap();
    let out = fitgrasp(&["plan", "--scene", s(&ply), "--out", s(&dir.join("c.json"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn usage_and_config_errors_exit_with_1() {
    let dir = workdir("usage");
    assert_eq!(code(&fitgrasp(&["plan"])), 1);
    assert_eq!(code(&fitgrasp(&["synth", "--shape", "torus", "--out", "x.ply"])), 1);
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "schema_version = 1\nnot_a_field = 3\n").unwrap();
    let out = fitgrasp(&["bench", "--scenes", s(&dir), "--config", s(&cfg)]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&fitgrasp(&["--help"])), 0);
}

#[test]
fn missing_candidates_file_exits_with_1() {
    let dir = workdir("missing");
    let out = fitgrasp(&["imagine", "--candidates", s(&dir.join("none.json")), "--out", s(&dir.join("t.json"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn zero_seeds_give_empty_list_and_exit_2() {
    let dir = workdir("zero");
    let ply = dir.join("sphere.ply");
    assert_eq!(code(&fitgrasp(&["synth", "--shape", "sphere", "--out", s(&ply)])), 0);
    let cands = dir.join("c.json");
    let out = fitgrasp(&["plan", "--scene", s(&ply), "--seeds", "0", "--out", s(&cands)]);
    assert_eq!(code(&out), 2);
    let file: CandidatesFile = read_json(&cands).unwrap();
    assert!(file.report.candidates.is_empty());
}

#[test]
fn plan_rank_imagine_on_sphere() {
    let dir = workdir("pipeline");
    let ply = dir.join("sphere.ply");
    assert_eq!(code(&fitgrasp(&["synth", "--shape", "sphere", "--out", s(&ply)])), 0);
    let cands = dir.join("c.json");
    let dump = dir.join("dump");
    let out = fitgrasp(&["plan", "--scene", s(&ply), "--seeds", "10", "--out", s(&cands), "--dump", s(&dump)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file: CandidatesFile = read_json(&cands).unwrap();
    assert_eq!(file.report.candidates.len(), 10);
    assert!(file.report.candidates.iter().any(|c| c.collision_free));
    assert_eq!(std::fs::read_dir(&dump).unwrap().count(), file.report.ranked().count());

    let ranked = dir.join("r.json");
    assert_eq!(code(&fitgrasp(&["rank", "--candidates", s(&cands), "--out", s(&ranked)])), 0);
    assert_eq!(std::fs::read(&ranked).unwrap(), std::fs::read(&cands).unwrap());

    let traj = dir.join("t.json");
    let out = fitgrasp(&["imagine", "--candidates", s(&cands), "--top-k", "2", "--out", s(&traj)]);
    assert!(code(&out) == 0 || code(&out) == 2, "{}", String::from_utf8_lossy(&out.stderr));
    let t: TrajectoriesFile = read_json(&traj).unwrap();
    assert_eq!(t.trajectories.len(), file.report.ranked().count().min(2));
    for r in &t.trajectories {
        assert_eq!(r.samples.len(), 30);
    }
}

#[test]
fn imagine_repairs_the_kettle_handle_grasp() {
    let dir = workdir("kettle");
    let ply = dir.join("kettle.ply");
    let size = KETTLE_SCENE_SIZE.to_string();
    assert_eq!(code(&fitgrasp(&["synth", "--shape", "kettle", "--size", &size, "--out", s(&ply)])), 0);
    // a candidates file holding the scripted handle grasp
    let scene = kettle_handle_scene().unwrap();
    let cands = dir.join("c.json");
    let sphere = dir.join("sphere.ply");
    assert_eq!(code(&fitgrasp(&["synth", "--shape", "sphere", "--out", s(&sphere)])), 0);
    assert_eq!(code(&fitgrasp(&["plan", "--scene", s(&sphere), "--seeds", "1", "--out", s(&cands)])), 0);
    let mut file: CandidatesFile = read_json(&cands).unwrap();
    file.scene = fitgrasp::io::SceneSpec::from_cloud(&ply);
    file.report.candidates.truncate(1);
    file.report.candidates[0].state = scene.grasp.clone();
    file.report.candidates[0].rank = Some(0);
    fitgrasp::io::write_json(&cands, &file).unwrap();

    let traj = dir.join("t.json");
    let out = fitgrasp(&["imagine", "--candidates", s(&cands), "--out", s(&traj)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let t: TrajectoriesFile = read_json(&traj).unwrap();
    assert_eq!(t.trajectories.len(), 1);
    assert!(t.trajectories[0].repaired(t.d_safe));
}

#[test]
fn bench_on_empty_directory() {
    let dir = workdir("bench-empty");
    let report = dir.join("report.json");
    let out = fitgrasp(&["bench", "--scenes", s(&dir), "--out", s(&report)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("cf/total"));
    let r: fitgrasp::pipeline::BenchReport = read_json(&report).unwrap();
    assert!(r.scenes.is_empty());
}

#[test]
fn config_from_environment() {
    let dir = workdir("env");
    let ply = dir.join("sphere.ply");
    assert_eq!(code(&fitgrasp(&["synth", "--shape", "sphere", "--out", s(&ply)])), 0);
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, "schema_version = 1\nseeds = 0\n").unwrap();
    let cands = dir.join("c.json");
    let out = Command::new(env!("CARGO_BIN_EXE_fitgrasp"))
        .args(["plan", "--scene", s(&ply), "--out", s(&cands)])
        .env("FITGRASP_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let file: CandidatesFile = read_json(&cands).unwrap();
    assert_eq!(file.report.num_seeds, 0);
}
