//! Built-in three-finger hand with Barrett-like proportions.
//!
//! Palm frame: the palm's contact face is the plane z = 0 with normal +z.
//! Fingers 1 and 2 sit at +x and spread symmetrically about z; finger 3 sits at
//! -x and opposes them. At zero flexion a finger lies flat, pointing away from
//! the palm center; flexion raises it and curls it over the palm. The distal
//! joint follows the proximal one through a fixed coupling ratio.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::model::{ActuatedJoint, HandModel, HandModelFile, Joint, JointRole, LinkKind, LinkSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrettDims {
    pub palm_half_size: f64,
    pub palm_thickness: f64,
    /// Finger bases at (+base_x, +-base_y) and (-base_x, 0).
    pub base_x: f64,
    pub base_y: f64,
    pub proximal_length: f64,
    pub distal_length: f64,
    pub finger_width: f64,
    pub finger_thickness: f64,
    pub spread_max: f64,
    pub flex_max: f64,
    pub distal_ratio: f64,
    pub distal_offset: f64,
    pub palm_grid: [usize; 2],
    pub proximal_grid: [usize; 2],
    pub distal_grid: [usize; 2],
}

impl Default for BarrettDims {
    fn default() -> Self {
        Self {
            palm_half_size: 0.045,
            palm_thickness: 0.03,
            base_x: 0.03,
            base_y: 0.025,
            proximal_length: 0.07,
            distal_length: 0.056,
            finger_width: 0.024,
            finger_thickness: 0.018,
            spread_max: PI / 2.0,
            flex_max: 2.44,
            distal_ratio: 1.0 / 3.0,
            distal_offset: 0.35,
            palm_grid: [10, 9],
            proximal_grid: [12, 5],
            distal_grid: [12, 5],
        }
    }
}

impl BarrettDims {
    pub fn file_spec(&self) -> HandModelFile {
        let actuated = vec![
            ActuatedJoint { name: "spread".into(), min: 0.0, max: self.spread_max, role: JointRole::Spread },
            ActuatedJoint { name: "flex1".into(), min: 0.0, max: self.flex_max, role: JointRole::Flex },
            ActuatedJoint { name: "flex2".into(), min: 0.0, max: self.flex_max, role: JointRole::Flex },
            ActuatedJoint { name: "flex3".into(), min: 0.0, max: self.flex_max, role: JointRole::Flex },
        ];
        let mut joints = Vec::new();
        let mut links = vec![LinkSpec {
            name: "palm".into(),
            joint: String::new(),
            kind: LinkKind::Palm,
            origin: [0.0, -self.palm_half_size, 0.0],
            normal: [0.0, 0.0, 1.0],
            width_axis: [1.0, 0.0, 0.0],
            length: 2.0 * self.palm_half_size,
            width: 2.0 * self.palm_half_size,
            thickness: self.palm_thickness,
            grid: self.palm_grid,
        }];
        // (finger, base xy, yaw of the inward axis, spread ratio)
        let fingers = [
            (1, [self.base_x, self.base_y], PI, Some(1.0)),
            (2, [self.base_x, -self.base_y], PI, Some(-1.0)),
            (3, [-self.base_x, 0.0], 0.0, None),
        ];
        for (f, base, yaw, spread) in fingers {
            let flex_parent = match spread {
                Some(ratio) => {
                    joints.push(Joint {
                        name: format!("f{f}_spread"),
                        parent: String::new(),
                        origin_xyz: [base[0], base[1], 0.0],
                        origin_rot: [0.0, 0.0, yaw],
                        axis: [0.0, 0.0, 1.0],
                        source: 0,
                        ratio,
                        offset: 0.0,
                    });
                    (format!("f{f}_spread"), [0.0; 3], [0.0; 3])
                }
                None => (String::new(), [base[0], base[1], 0.0], [0.0, 0.0, yaw]),
            };
            joints.push(Joint {
                name: format!("f{f}_proximal"),
                parent: flex_parent.0,
                origin_xyz: flex_parent.1,
                origin_rot: flex_parent.2,
                axis: [0.0, 1.0, 0.0],
                source: f,
                ratio: 1.0,
                offset: -PI / 2.0,
            });
            joints.push(Joint {
                name: format!("f{f}_distal"),
                parent: format!("f{f}_proximal"),
                origin_xyz: [0.0, 0.0, self.proximal_length],
                origin_rot: [0.0; 3],
                axis: [0.0, 1.0, 0.0],
                source: f,
                ratio: self.distal_ratio,
                offset: self.distal_offset,
            });
            for (kind, suffix, length, grid) in [
                (LinkKind::Proximal, "proximal", self.proximal_length, self.proximal_grid),
                (LinkKind::Distal, "distal", self.distal_length, self.distal_grid),
            ] {
                links.push(LinkSpec {
                    name: format!("f{f}_{suffix}"),
                    joint: format!("f{f}_{suffix}"),
                    kind,
                    origin: [self.finger_thickness / 2.0, 0.0, 0.0],
                    normal: [1.0, 0.0, 0.0],
                    width_axis: [0.0, 1.0, 0.0],
                    length,
                    width: self.finger_width,
                    thickness: self.finger_thickness,
                    grid,
                });
            }
        }
        HandModelFile { name: "barrett-like".into(), actuated, joints, links }
    }

    pub fn build(&self) -> HandModel {
        HandModel::from_file_spec(self.file_spec()).expect("built-in dimensions are valid")
    }
}

/// The shipped hand model file (generated from [`BarrettDims::default`]).
pub const DEFAULT_HAND_TOML: &str = include_str!("../../assets/barrett_like.toml");

/// Three-finger, four-actuator hand with 7 links, 7 boxes and 450 samples.
pub fn default_barrett_like_model() -> HandModel {
    BarrettDims::default().build()
}
