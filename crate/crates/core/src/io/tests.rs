use super::*;
use crate::correspondence::ObjectIndex;
use crate::geometry::ply::write_ply;
use crate::geometry::RigidTransform;
use crate::hand::{default_barrett_like_model, HandState};
use crate::mdisf::{plan_grasps, PlanParams};
use crate::scene::{synthesize, ShapeKind, SynthParams};
use nalgebra::Matrix3;
use proptest::prelude::*;

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Wrapped {
    #[serde(with = "float")]
    v: f64,
}

fn bits_equal(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

#[test]
fn float_codec_handles_non_finite() {
    for v in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY, 0.0, -0.0, 1e-300, 0.1] {
        let text = serde_json::to_string(&Wrapped { v }).unwrap();
        let back: Wrapped = serde_json::from_str(&text).unwrap();
        assert!(bits_equal(v, back.v), "{v} -> {text} -> {}", back.v);
    }
    assert_eq!(serde_json::to_string(&Wrapped { v: f64::INFINITY }).unwrap(), r#"{"v":"inf"}"#);
    assert!(serde_json::from_str::<Wrapped>(r#"{"v":"many"}"#).is_err());
}

proptest! {
    #[test]
    fn float_codec_is_bit_exact(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        let text = serde_json::to_string(&Wrapped { v }).unwrap();
        let back: Wrapped = serde_json::from_str(&text).unwrap();
        prop_assert!(bits_equal(v, back.v));
    }
}

fn small_plan() -> CandidatesFile {
    let model = default_barrett_like_model();
    let object = ObjectIndex::new(synthesize(&SynthParams::new(ShapeKind::Sphere)).unwrap());
    let ground = GroundPlane::horizontal();
    let mut report = plan_grasps(&model, &object, Some(&ground), 3, &PlanParams::default()).unwrap();
    // a failed fit carries NaN errors
    let mut failed = report.candidates[0].clone();
    failed.seed_id = 99;
    failed.fit_error = f64::NAN;
    failed.initial_fit_error = f64::NAN;
    failed.quality = None;
    failed.rank = None;
    report.candidates.push(failed);
    CandidatesFile::new(SceneSpec::from_cloud("sphere.ply"), 7, report)
}

#[test]
fn candidates_file_round_trips_bit_identically() {
    let file = small_plan();
    let text = to_json(&file).unwrap();
    let back: CandidatesFile = from_json(&text).unwrap();
    assert_eq!(to_json(&back).unwrap(), text);
    for (a, b) in file.report.candidates.iter().zip(&back.report.candidates) {
        assert_eq!(a.state, b.state);
        assert_eq!(a.level_trace, b.level_trace);
        assert_eq!(a.quality, b.quality);
        assert!(bits_equal(a.fit_error, b.fit_error));
    }
}

#[test]
fn schema_version_and_unknown_fields_are_checked() {
    let text = to_json(&small_plan()).unwrap();
    let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
    assert!(matches!(from_json::<CandidatesFile>(&bumped), Err(Error::SchemaVersion { found: 2, .. })));
    let extra = text.replacen("\"rng_seed\"", "\"surprise\": 0,\n  \"rng_seed\"", 1);
    assert!(from_json::<CandidatesFile>(&extra).is_err());
    assert!(from_json::<CandidatesFile>("{}").is_err());
}

fn sample_result(worst: f64) -> GtoResult {
    let rot = RigidTransform::from_axis_angle(&Vector3::new(0.3, -1.1, 0.4), Vector3::new(0.1, -0.2, 0.35));
    let start = HandState::new(RigidTransform::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 0.6)), vec![0.2, 1.2, 1.2, 1.2]);
    let end = HandState::new(rot, vec![0.25, 2.0, 1.7, 1.9]);
    let trajectory = Trajectory::interpolate(&start, &end, 12);
    GtoResult {
        initial: trajectory.clone(),
        trajectory,
        status: GtoStatus::CollisionFree,
        outer_iterations: 3,
        penalty: 8.0,
        worst_sd: worst,
        initial_worst_sd: -0.004,
        trace: vec![-0.004, 0.02],
        seconds: 0.125,
    }
}

#[test]
fn trajectory_record_round_trips_and_rebuilds_poses() {
    let result = sample_result(f64::INFINITY);
    let record = TrajectoryRecord::new(4, Some(0), &result);
    assert_eq!(record.samples.iter().map(|s| s.index).collect::<Vec<_>>(), (0..12).collect::<Vec<_>>());
    let file = TrajectoriesFile::new(SceneSpec::from_cloud("kettle.ply"), 5, 0.01, vec![record.clone()]);
    let text = to_json(&file).unwrap();
    assert!(text.contains("\"worst_sd\": \"inf\""));
    let back: TrajectoriesFile = from_json(&text).unwrap();
    assert_eq!(back, file);
    assert_eq!(to_json(&back).unwrap(), text);

    let rebuilt = record.trajectory();
    for s in 0..rebuilt.len() {
        let (a, b) = (&rebuilt.palm_poses[s], &result.trajectory.palm_poses[s]);
        assert!((a.rotation - b.rotation).abs().max() < 1e-12);
        assert_eq!(a.translation, b.translation);
        assert_eq!(rebuilt.joints[s], result.trajectory.joints[s]);
        let q = record.samples[s].quaternion;
        assert!((q.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(record.repaired(0.01));
    let mut unresolved = record;
    unresolved.status = GtoStatus::CollisionUnresolved;
    assert!(!unresolved.repaired(0.01));
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fitgrasp-io-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn scene_spec_files() {
    let dir = temp_dir("scene");
    let cloud = synthesize(&SynthParams::new(ShapeKind::Box)).unwrap();
    write_ply(dir.join("box.ply"), &cloud).unwrap();

    let bare = SceneSpec::load(dir.join("box.ply")).unwrap();
    assert_eq!(bare.ground, Some(GroundPlane::horizontal()));
    assert_eq!(bare.load_cloud().unwrap().len(), cloud.len());

    std::fs::write(dir.join("box.toml"), "cloud = \"box.ply\"\nviewpoint = [0.0, 0.0, 1.0]\n").unwrap();
    let spec = SceneSpec::load(dir.join("box.toml")).unwrap();
    assert_eq!(spec.cloud, dir.join("box.ply"));
    assert_eq!(spec.ground, None);
    let estimated = spec.load_cloud().unwrap();
    let view = Vector3::new(0.0, 0.0, 1.0);
    for (p, n) in estimated.points().iter().zip(estimated.normals()) {
        assert!(n.dot(&(view - p)) >= 0.0);
    }

    std::fs::write(dir.join("mm.toml"), "cloud = \"box.ply\"\nunits = \"mm\"\n").unwrap();
    assert!(SceneSpec::load(dir.join("mm.toml")).is_err());
    std::fs::write(dir.join("tilt.toml"), "cloud = \"box.ply\"\n[ground]\npoint = [0.0, 0.0, 0.0]\nnormal = [0.0, 0.0, 2.0]\n").unwrap();
    assert!(SceneSpec::load(dir.join("tilt.toml")).is_err());
    std::fs::remove_dir_all(dir).unwrap();
}
