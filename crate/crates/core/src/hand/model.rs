use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, OrientedBox, RigidTransform};

/// What an actuated joint does; flexion joints open to mid-range in the pregrasp posture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointRole {
    Spread,
    Flex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Palm,
    Proximal,
    Distal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuatedJoint {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub role: JointRole,
}

/// Revolute joint of the kinematic tree. Its angle is `offset + ratio * q[source]`,
/// so passive (coupled) joints are folded onto the actuated vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// Parent joint name; empty for joints attached to the palm.
    #[serde(default)]
    pub parent: String,
    pub origin_xyz: [f64; 3],
    /// Fixed rotation of the joint frame, as an axis-angle vector.
    #[serde(default)]
    pub origin_rot: [f64; 3],
    pub axis: [f64; 3],
    pub source: usize,
    #[serde(default = "one")]
    pub ratio: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

/// Rectangular slab attached to a joint frame (or the palm). The sampled
/// front face lies in the plane through `origin` with outward `normal`; the
/// chart runs `u in [0, length]` along `normal x width_axis` and
/// `v in [-width/2, width/2]` along `width_axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    #[serde(default)]
    pub joint: String,
    pub kind: LinkKind,
    pub origin: [f64; 3],
    pub normal: [f64; 3],
    pub width_axis: [f64; 3],
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    /// Sample grid as `[along length, along width]`.
    pub grid: [usize; 2],
}

/// On-disk hand description (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandModelFile {
    pub name: String,
    pub actuated: Vec<ActuatedJoint>,
    pub joints: Vec<Joint>,
    pub links: Vec<LinkSpec>,
}

/// Surface sample on a link, expressed in the link frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSample {
    pub link: usize,
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Chart coordinates (along length, along width).
    pub chart: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub name: String,
    pub kind: LinkKind,
    /// Index into `HandModel::joints`; `None` for the palm.
    pub joint: Option<usize>,
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub bbox: OrientedBox,
    /// Range of this link's samples in `HandModel::samples`.
    pub samples: std::ops::Range<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct KinJoint {
    pub parent: Option<usize>,
    pub origin: RigidTransform,
    pub axis: Vector3<f64>,
    pub source: usize,
    pub ratio: f64,
    pub offset: f64,
}

/// Validated kinematic hand with precomputed front-surface samples and boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct HandModel {
    pub name: String,
    pub actuated: Vec<ActuatedJoint>,
    pub(crate) joints: Vec<KinJoint>,
    /// Joints on the path from the palm to each joint, root first.
    pub(crate) chains: Vec<Vec<usize>>,
    pub links: Vec<Link>,
    pub samples: Vec<SurfaceSample>,
    file: HandModelFile,
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl HandModel {
    pub fn from_file_spec(spec: HandModelFile) -> Result<Self> {
        let bad = |msg: String| Err(Error::HandModel(msg));
        if spec.actuated.is_empty() {
            return bad("at least one actuated joint is required".into());
        }
        for a in &spec.actuated {
            if !(a.min < a.max) {
                return bad(format!("joint '{}' has min {} >= max {}", a.name, a.min, a.max));
            }
        }
        let joint_index = |name: &str| spec.joints.iter().position(|j| j.name == name);
        let mut joints = Vec::with_capacity(spec.joints.len());
        for (i, j) in spec.joints.iter().enumerate() {
            let parent = if j.parent.is_empty() {
                None
            } else {
                match joint_index(&j.parent) {
                    Some(p) if p < i => Some(p),
                    Some(_) => return bad(format!("joint '{}' must follow its parent '{}'", j.name, j.parent)),
                    None => return bad(format!("joint '{}' has unknown parent '{}'", j.name, j.parent)),
                }
            };
            let axis = vec3(j.axis);
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return bad(format!("joint '{}' axis is not unit", j.name));
            }
            if j.source >= spec.actuated.len() {
                return bad(format!("joint '{}' drives from missing actuator {}", j.name, j.source));
            }
            joints.push(KinJoint {
                parent,
                origin: RigidTransform::from_axis_angle(&vec3(j.origin_rot), vec3(j.origin_xyz)),
                axis,
                source: j.source,
                ratio: j.ratio,
                offset: j.offset,
            });
        }
        let chains = (0..joints.len())
            .map(|i| {
                let mut chain = vec![i];
                let mut cur = joints[i].parent;
                while let Some(p) = cur {
                    chain.push(p);
                    cur = joints[p].parent;
                }
                chain.reverse();
                chain
            })
            .collect();

        let mut links = Vec::with_capacity(spec.links.len());
        let mut samples = Vec::new();
        for l in &spec.links {
            let joint = if l.joint.is_empty() {
                None
            } else {
                Some(joint_index(&l.joint).ok_or_else(|| {
                    Error::HandModel(format!("link '{}' attached to unknown joint '{}'", l.name, l.joint))
                })?)
            };
            if (joint.is_none()) != (l.kind == LinkKind::Palm) {
                return bad(format!("link '{}': only the palm may be attached to the palm frame", l.name));
            }
            if !(l.length > 0.0 && l.width > 0.0 && l.thickness > 0.0) {
                return bad(format!("link '{}' needs positive dimensions", l.name));
            }
            if l.grid[0] == 0 || l.grid[1] == 0 {
                return bad(format!("link '{}' has an empty sample grid", l.name));
            }
            let normal = vec3(l.normal);
            let width_axis = vec3(l.width_axis);
            if (normal.norm() - 1.0).abs() > 1e-9
                || (width_axis.norm() - 1.0).abs() > 1e-9
                || normal.dot(&width_axis).abs() > 1e-9
            {
                return bad(format!("link '{}' needs orthonormal normal and width axes", l.name));
            }
            let length_axis = normal.cross(&width_axis);
            let origin = vec3(l.origin);
            let center = origin + length_axis * (l.length / 2.0) - normal * (l.thickness / 2.0);
            let bbox = OrientedBox::new(
                center,
                Vector3::new(l.thickness / 2.0, l.width / 2.0, l.length / 2.0),
                Matrix3::from_columns(&[normal, width_axis, length_axis]),
                0,
            )?;
            let start = samples.len();
            let [n_len, n_wid] = l.grid;
            for a in 0..n_len {
                let u = (a as f64 + 0.5) * l.length / n_len as f64;
                for b in 0..n_wid {
                    let v = (b as f64 + 0.5) * l.width / n_wid as f64 - l.width / 2.0;
                    samples.push(SurfaceSample {
                        link: links.len(),
                        position: origin + length_axis * u + width_axis * v,
                        normal,
                        chart: [u, v],
                    });
                }
            }
            links.push(Link {
                name: l.name.clone(),
                kind: l.kind,
                joint,
                length: l.length,
                width: l.width,
                thickness: l.thickness,
                bbox,
                samples: start..samples.len(),
            });
        }
        if links.iter().filter(|l| l.kind == LinkKind::Palm).count() != 1 {
            return bad("exactly one palm link is required".into());
        }
        Ok(Self {
            name: spec.name.clone(),
            actuated: spec.actuated.clone(),
            joints,
            chains,
            links,
            samples,
            file: spec,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_file_spec(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(&self.file)?)
    }

    pub fn file_spec(&self) -> &HandModelFile {
        &self.file
    }

    pub fn dof(&self) -> usize {
        self.actuated.len()
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn num_boxes(&self) -> usize {
        self.links.len()
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.actuated.iter().map(|a| a.min).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.actuated.iter().map(|a| a.max).collect()
    }

    /// Clamp `q` into the joint limits.
    pub fn clamp(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.actuated)
            .map(|(v, a)| v.clamp(a.min, a.max))
            .collect()
    }

    pub fn joint_angle(&self, joint: usize, q: &[f64]) -> f64 {
        let j = &self.joints[joint];
        j.offset + j.ratio * q[j.source]
    }

    pub(crate) fn joint_rotation(&self, joint: usize, q: &[f64]) -> Matrix3<f64> {
        rotation_from_axis_angle(&(self.joints[joint].axis * self.joint_angle(joint, q)))
    }

    /// Link index of every sample, in sample order.
    pub fn sample_links(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.link).collect()
    }

    /// Every `stride`-th sample of each link, keeping every link represented.
    pub fn downsample(&self, stride: usize) -> Vec<usize> {
        let stride = stride.max(1);
        self.links
            .iter()
            .flat_map(|l| l.samples.clone().step_by(stride))
            .collect()
    }
}

/// Palm pose and actuated joint vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    pub palm_pose: RigidTransform,
    pub q: Vec<f64>,
}

/// Joint-limit tolerance for state validation.
pub const LIMIT_TOLERANCE: f64 = 1e-9;

impl HandState {
    pub fn new(palm_pose: RigidTransform, q: Vec<f64>) -> Self {
        Self { palm_pose, q }
    }

    pub fn validate(&self, model: &HandModel) -> Result<()> {
        if self.q.len() != model.dof() {
            return Err(Error::JointCount {
                expected: model.dof(),
                got: self.q.len(),
            });
        }
        for (i, (v, a)) in self.q.iter().zip(&model.actuated).enumerate() {
            if !(*v >= a.min - LIMIT_TOLERANCE && *v <= a.max + LIMIT_TOLERANCE) {
                return Err(Error::JointLimit {
                    joint: i,
                    value: *v,
                    min: a.min,
                    max: a.max,
                });
            }
        }
        Ok(())
    }
}
