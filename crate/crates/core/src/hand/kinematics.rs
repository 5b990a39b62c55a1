use nalgebra::{Matrix3xX, Vector3};

use super::model::{HandModel, HandState};
use crate::error::Result;
use crate::geometry::{PointCloud, RigidTransform};

/// Forward-kinematics snapshot of one hand state.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub palm_pose: RigidTransform,
    /// Joint frames in the palm frame.
    pub joint_frames: Vec<RigidTransform>,
    /// World pose of every link frame; the palm link pose equals the palm pose.
    pub link_poses: Vec<RigidTransform>,
}

/// Compose joint frames along each chain. Rejects states outside the joint limits.
pub fn forward_kinematics(model: &HandModel, state: &HandState) -> Result<Kinematics> {
    state.validate(model)?;
    Ok(forward_kinematics_unchecked(model, &state.palm_pose, &state.q))
}

pub(crate) fn forward_kinematics_unchecked(
    model: &HandModel,
    palm_pose: &RigidTransform,
    q: &[f64],
) -> Kinematics {
    let mut joint_frames: Vec<RigidTransform> = Vec::with_capacity(model.joints.len());
    for (i, j) in model.joints.iter().enumerate() {
        let parent = j.parent.map_or_else(RigidTransform::identity, |p| joint_frames[p]);
        let local = parent
            .compose(&j.origin)
            .compose(&RigidTransform::from_rotation(model.joint_rotation(i, q)));
        joint_frames.push(local);
    }
    let link_poses = model
        .links
        .iter()
        .map(|l| match l.joint {
            Some(j) => palm_pose.compose(&joint_frames[j]),
            None => *palm_pose,
        })
        .collect();
    Kinematics {
        palm_pose: *palm_pose,
        joint_frames,
        link_poses,
    }
}

impl Kinematics {
    /// `d p / d q` in the palm frame for a palm-frame point rigidly attached to `link`.
    /// Coupled joints contribute through their ratio to the driving actuator's column.
    pub fn palm_point_jacobian(&self, model: &HandModel, link: usize, p_palm: &Vector3<f64>) -> Matrix3xX<f64> {
        let mut jac = Matrix3xX::zeros(model.dof());
        if let Some(joint) = model.links[link].joint {
            for &k in &model.chains[joint] {
                let frame = &self.joint_frames[k];
                let kj = &model.joints[k];
                let axis = frame.rotation * kj.axis;
                let col = axis.cross(&(p_palm - frame.translation)) * kj.ratio;
                let mut c = jac.column_mut(kj.source);
                c += col;
            }
        }
        jac
    }

    /// World-frame Jacobian of a world point rigidly attached to `link`.
    pub fn world_point_jacobian(&self, model: &HandModel, link: usize, p_world: &Vector3<f64>) -> Matrix3xX<f64> {
        let r = &self.palm_pose.rotation;
        let p_palm = r.transpose() * (p_world - self.palm_pose.translation);
        r * self.palm_point_jacobian(model, link, &p_palm)
    }

    /// World position and normal of a surface sample.
    pub fn sample_world(&self, model: &HandModel, index: usize) -> (Vector3<f64>, Vector3<f64>) {
        let s = &model.samples[index];
        let pose = &self.link_poses[s.link];
        (pose.transform_point(&s.position), pose.transform_vector(&s.normal))
    }
}

/// Hand surface in the world frame with the owning link of every sample.
#[derive(Clone, Debug)]
pub struct HandSurface {
    pub cloud: PointCloud,
    pub links: Vec<usize>,
}

/// Map every link-frame sample through its link pose. `weights`, when given,
/// are attached to the cloud (one per sample).
pub fn sample_surface(model: &HandModel, state: &HandState, weights: Option<&[f64]>) -> Result<HandSurface> {
    let kin = forward_kinematics(model, state)?;
    surface_from_kinematics(model, &kin, weights)
}

pub fn surface_from_kinematics(
    model: &HandModel,
    kin: &Kinematics,
    weights: Option<&[f64]>,
) -> Result<HandSurface> {
    let (points, normals): (Vec<_>, Vec<_>) = (0..model.num_samples()).map(|i| kin.sample_world(model, i)).unzip();
    let mut cloud = PointCloud::new(points, normals)?;
    if let Some(w) = weights {
        cloud = cloud.with_weights(w.to_vec())?;
    }
    Ok(HandSurface {
        cloud,
        links: model.sample_links(),
    })
}

/// Palm-frame Jacobian (3 x dof) of surface sample `index`.
pub fn point_jacobian(model: &HandModel, state: &HandState, index: usize) -> Result<Matrix3xX<f64>> {
    let kin = forward_kinematics(model, state)?;
    let s = &model.samples[index];
    let p_palm = kin.palm_pose.inverse().transform_point(&kin.sample_world(model, index).0);
    Ok(kin.palm_point_jacobian(model, s.link, &p_palm))
}
