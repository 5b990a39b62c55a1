use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::transform::RigidTransform;
use crate::error::{Error, Result};

/// Box attached to a parent frame. The faces normal to `contact_axis` are the
/// front (outward normal `+axis`) and back (`-axis`) faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
    pub orientation: Matrix3<f64>,
    pub contact_axis: usize,
}

impl OrientedBox {
    pub fn new(
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
        orientation: Matrix3<f64>,
        contact_axis: usize,
    ) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::HandModel(format!(
                "box half extents must be positive, got {half_extents:?}"
            )));
        }
        if contact_axis > 2 {
            return Err(Error::HandModel(format!("contact axis {contact_axis} out of range")));
        }
        Ok(Self {
            center,
            half_extents,
            orientation,
            contact_axis,
        })
    }

    pub fn axis_aligned(center: Vector3<f64>, half_extents: Vector3<f64>, contact_axis: usize) -> Result<Self> {
        Self::new(center, half_extents, Matrix3::identity(), contact_axis)
    }

    /// Pose of the box frame given the pose of its parent.
    pub fn frame(&self, parent: &RigidTransform) -> RigidTransform {
        parent.compose(&RigidTransform::new(self.orientation, self.center))
    }

    pub fn inflated(&self, margin: f64) -> OrientedBox {
        OrientedBox {
            half_extents: self.half_extents.add_scalar(margin),
            ..self.clone()
        }
    }

    /// Coordinates of a world point in the box frame.
    pub fn to_local(&self, parent: &RigidTransform, p: &Vector3<f64>) -> Vector3<f64> {
        let f = self.frame(parent);
        f.rotation.transpose() * (p - f.translation)
    }

    pub fn contains_local(&self, local: &Vector3<f64>) -> bool {
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }

    /// Outward normal of the front (`true`) or back face, in the box frame.
    pub fn face_normal_local(&self, front: bool) -> Vector3<f64> {
        let mut n = Vector3::zeros();
        n[self.contact_axis] = if front { 1.0 } else { -1.0 };
        n
    }

    /// Orthogonal projection of a box-frame point onto the front or back face plane.
    pub fn project_to_face_local(&self, local: &Vector3<f64>, front: bool) -> Vector3<f64> {
        let mut p = *local;
        let h = self.half_extents[self.contact_axis];
        p[self.contact_axis] = if front { h } else { -h };
        p
    }

    /// The six face normals in the box frame, ordered (+x, -x, +y, -y, +z, -z).
    pub fn face_normals_local() -> [Vector3<f64>; 6] {
        [
            Vector3::x(),
            -Vector3::x(),
            Vector3::y(),
            -Vector3::y(),
            Vector3::z(),
            -Vector3::z(),
        ]
    }
}

/// True iff `p` lies inside `bx` attached to a parent frame at `pose`.
pub fn point_in_box(bx: &OrientedBox, pose: &RigidTransform, p: &Vector3<f64>) -> bool {
    bx.contains_local(&bx.to_local(pose, p))
}

/// Plane through `point` with upward unit `normal`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl GroundPlane {
    pub fn new(point: Vector3<f64>, normal: Vector3<f64>) -> Result<Self> {
        if (normal.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidCloud(format!(
                "ground normal must be unit, has length {}",
                normal.norm()
            )));
        }
        Ok(Self { point, normal })
    }

    /// The plane z = 0 with normal +z.
    pub fn horizontal() -> Self {
        Self {
            point: Vector3::zeros(),
            normal: Vector3::z(),
        }
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        (p - self.point).dot(&self.normal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::transform::rotation_from_axis_angle;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn unit_box() -> OrientedBox {
        OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 0.5, 0.25), 0).unwrap()
    }

    #[test]
    fn center_inside_far_point_outside() {
        let bx = unit_box();
        let pose = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert!(point_in_box(&bx, &pose, &Vector3::new(1.0, 2.0, 3.0)));
        assert!(!point_in_box(&bx, &pose, &Vector3::new(1.0, 3.0, 3.0)));
        assert!(!point_in_box(&bx, &pose, &Vector3::new(3.0, 2.0, 3.0)));
    }

    #[test]
    fn rotated_box_corners() {
        // square of half side 1 in xy rotated 45 degrees about z
        let bx = OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 0.1), 0).unwrap();
        let pose = RigidTransform::from_rotation(rotation_from_axis_angle(&Vector3::new(0.0, 0.0, FRAC_PI_4)));
        // old corner (1, 1) has local coordinates (sqrt2, 0): outside
        assert!(!point_in_box(&bx, &pose, &Vector3::new(1.0, 1.0, 0.0)));
        assert!(!point_in_box(&bx, &pose, &Vector3::new(-1.0, 1.0, 0.0)));
        // points on the rotated axes at distance 0.99 * sqrt2 / ... : (0.7, 0.7) -> local (0.99, 0)
        assert!(point_in_box(&bx, &pose, &Vector3::new(0.7, 0.7, 0.0)));
        // (1, 0) -> local (0.7071, -0.7071): inside
        assert!(point_in_box(&bx, &pose, &Vector3::new(1.0, 0.0, 0.0)));
        assert!(point_in_box(&bx, &pose, &Vector3::new(0.0, -1.0, 0.05)));
        assert!(!point_in_box(&bx, &pose, &Vector3::new(0.0, -1.0, 0.2)));
    }

    #[test]
    fn face_projection() {
        let bx = unit_box();
        let p = Vector3::new(0.3, 0.1, -0.2);
        assert_eq!(bx.project_to_face_local(&p, true), Vector3::new(1.0, 0.1, -0.2));
        assert_eq!(bx.project_to_face_local(&p, false), Vector3::new(-1.0, 0.1, -0.2));
        assert_eq!(bx.face_normal_local(false), -Vector3::x());
        assert!(OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(0.0, 1.0, 1.0), 0).is_err());
    }

    #[test]
    fn ground_plane_distance() {
        let g = GroundPlane::horizontal();
        assert_eq!(g.signed_distance(&Vector3::new(3.0, 1.0, -0.01)), -0.01);
        assert!(GroundPlane::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 2.0)).is_err());
    }

    proptest! {
        #[test]
        fn containment_invariant_under_rigid_motion(
            rx in -3.0..3.0f64, ry in -3.0..3.0f64, rz in -3.0..3.0f64,
            tx in -1.0..1.0f64, ty in -1.0..1.0f64, tz in -1.0..1.0f64,
            px in -1.5..1.5f64, py in -1.5..1.5f64, pz in -1.5..1.5f64,
        ) {
            let bx = OrientedBox::new(
                Vector3::new(0.1, -0.2, 0.05),
                Vector3::new(0.7, 0.4, 0.3),
                rotation_from_axis_angle(&Vector3::new(0.2, 0.1, -0.3)),
                2,
            ).unwrap();
            let pose = RigidTransform::from_axis_angle(&Vector3::new(0.3, -0.2, 0.9), Vector3::new(0.1, 0.0, 0.2));
            let motion = RigidTransform::from_axis_angle(&Vector3::new(rx, ry, rz), Vector3::new(tx, ty, tz));
            let p = Vector3::new(px, py, pz);
            let local = bx.to_local(&pose, &p);
            // skip points numerically on the boundary
            prop_assume!((0..3).all(|i| (local[i].abs() - bx.half_extents[i]).abs() > 1e-9));
            prop_assert_eq!(
                point_in_box(&bx, &pose, &p),
                point_in_box(&bx, &motion.compose(&pose), &motion.transform_point(&p))
            );
        }
    }
}
