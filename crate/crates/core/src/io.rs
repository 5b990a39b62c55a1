//! Scene descriptions and the JSON result files written by the command-line tools.
//!
//! Every result document carries `schema_version`; readers reject other versions.
//! Floats are written in shortest round-trip form, so parse followed by
//! re-serialization reproduces a file byte for byte.

use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ply::read_ply;
use crate::geometry::{estimate_normals, GroundPlane, PointCloud, RigidTransform};
use crate::gto::{GtoResult, GtoStatus, Trajectory};
use crate::mdisf::PlanReport;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// Neighbors used when normals are re-estimated for a scene with a viewpoint.
pub const NORMAL_NEIGHBORS: usize = 10;

/// Serde codec for `f64` fields that may be non-finite: finite values are JSON
/// numbers, the rest the strings `"nan"`, `"inf"` and `"-inf"`.
pub mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(serde::de::Error::custom(format!("expected a number, got '{t}'"))),
            },
        }
    }
}

/// Object cloud plus its surroundings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// ASCII PLY with positions and normals; relative paths resolve against the spec file.
    pub cloud: PathBuf,
    #[serde(default)]
    pub ground: Option<GroundPlane>,
    /// Camera position. When set, normals are re-estimated by PCA and turned toward it.
    #[serde(default)]
    pub viewpoint: Option<[f64; 3]>,
    #[serde(default = "meters")]
    pub units: String,
}

fn meters() -> String {
    "m".into()
}

impl SceneSpec {
    /// Bare cloud resting on the horizontal ground plane.
    pub fn from_cloud(path: impl Into<PathBuf>) -> Self {
        Self { cloud: path.into(), ground: Some(GroundPlane::horizontal()), viewpoint: None, units: meters() }
    }

    /// A `.toml` scene file, or a `.ply` cloud taken as [`SceneSpec::from_cloud`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
            return Ok(Self::from_cloud(path));
        }
        let mut spec: SceneSpec = toml::from_str(&std::fs::read_to_string(path)?)?;
        if spec.cloud.is_relative() {
            if let Some(dir) = path.parent() {
                spec.cloud = dir.join(&spec.cloud);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.units != "m" {
            return Err(Error::Config(format!("scene units must be \"m\", got \"{}\"", self.units)));
        }
        if let Some(g) = &self.ground {
            GroundPlane::new(g.point, g.normal)?;
        }
        Ok(())
    }

    pub fn load_cloud(&self) -> Result<PointCloud> {
        self.validate()?;
        let cloud = read_ply(&self.cloud)?;
        match self.viewpoint {
            None => Ok(cloud),
            Some(v) => Ok(estimate_normals(cloud.points(), NORMAL_NEIGHBORS, &Vector3::from(v))?.cloud),
        }
    }
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
}

fn check_version(text: &str) -> Result<()> {
    let header: Header = serde_json::from_str(text)?;
    if header.schema_version != RESULTS_SCHEMA_VERSION {
        return Err(Error::SchemaVersion { found: header.schema_version, expected: RESULTS_SCHEMA_VERSION });
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Parse a versioned result document.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    check_version(text)?;
    Ok(serde_json::from_str(text)?)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    from_json(&std::fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    Ok(std::fs::write(path, to_json(value)?)?)
}

/// Output of `plan` and input of `imagine` and `rank`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidatesFile {
    pub schema_version: u32,
    pub scene: SceneSpec,
    pub rng_seed: u64,
    pub report: PlanReport,
}

impl CandidatesFile {
    pub fn new(scene: SceneSpec, rng_seed: u64, report: PlanReport) -> Self {
        Self { schema_version: RESULTS_SCHEMA_VERSION, scene, rng_seed, report }
    }
}

/// One trajectory sample: palm pose as a unit quaternion `[w, x, y, z]` and a
/// translation, plus the actuated joint vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySample {
    pub index: usize,
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub q: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub seed_id: usize,
    pub rank: Option<usize>,
    pub status: GtoStatus,
    pub outer_iterations: usize,
    pub penalty: f64,
    /// Smallest interior signed distance of the straight-closing trajectory.
    #[serde(with = "float")]
    pub initial_worst_sd: f64,
    #[serde(with = "float")]
    pub worst_sd: f64,
    pub seconds: f64,
    pub samples: Vec<TrajectorySample>,
}

impl TrajectoryRecord {
    pub fn new(seed_id: usize, rank: Option<usize>, result: &GtoResult) -> Self {
        let samples = (0..result.trajectory.len())
            .map(|s| {
                let pose = &result.trajectory.palm_poses[s];
                let quat = pose.quaternion();
                let t = pose.translation;
                TrajectorySample {
                    index: s,
                    quaternion: [quat.w, quat.i, quat.j, quat.k],
                    translation: [t.x, t.y, t.z],
                    q: result.trajectory.joints[s].clone(),
                }
            })
            .collect();
        Self {
            seed_id,
            rank,
            status: result.status,
            outer_iterations: result.outer_iterations,
            penalty: result.penalty,
            initial_worst_sd: result.initial_worst_sd,
            worst_sd: result.worst_sd,
            seconds: result.seconds,
            samples,
        }
    }

    /// Trajectory rebuilt from the stored samples.
    pub fn trajectory(&self) -> Trajectory {
        let palm_poses = self
            .samples
            .iter()
            .map(|s| {
                let [w, x, y, z] = s.quaternion;
                let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
                RigidTransform::from_quaternion(&q, Vector3::from(s.translation))
            })
            .collect();
        let joints = self.samples.iter().map(|s| s.q.clone()).collect();
        Trajectory { palm_poses, joints }
    }

    /// Straight closing already collided and the optimizer cleared it.
    pub fn repaired(&self, d_safe: f64) -> bool {
        self.status == GtoStatus::CollisionFree && self.initial_worst_sd < d_safe - crate::gto::SAFE_SLACK
    }
}

/// Output of `imagine`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoriesFile {
    pub schema_version: u32,
    pub scene: SceneSpec,
    pub top_k: usize,
    pub d_safe: f64,
    pub trajectories: Vec<TrajectoryRecord>,
}

impl TrajectoriesFile {
    pub fn new(scene: SceneSpec, top_k: usize, d_safe: f64, trajectories: Vec<TrajectoryRecord>) -> Self {
        Self { schema_version: RESULTS_SCHEMA_VERSION, scene, top_k, d_safe, trajectories }
    }
}

#[cfg(test)]
mod tests;
