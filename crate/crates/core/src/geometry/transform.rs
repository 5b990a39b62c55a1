use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Skew-symmetric matrix of `r`, so that `hat(r) * v == r.cross(&v)`.
pub fn hat(r: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0)
}

/// Exact exponential map from an axis-angle vector to a rotation matrix (Rodrigues).
pub fn rotation_from_axis_angle(r: &Vector3<f64>) -> Matrix3<f64> {
    let theta = r.norm();
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let k = hat(&(r / theta));
    Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Axis-angle vector of a rotation matrix (inverse of [`rotation_from_axis_angle`]).
pub fn axis_angle_from_rotation(rot: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix_unchecked(*rot).scaled_axis()
}

/// Geodesic distance on SO(3): the angle of `a^T b`.
pub fn geodesic_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) * 0.5;
    c.clamp(-1.0, 1.0).acos()
}

/// Nearest rotation matrix in the Frobenius sense.
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Rigid transform `x -> R x + t`, rotation stored as a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    pub fn from_rotation(r: Matrix3<f64>) -> Self {
        Self::new(r, Vector3::zeros())
    }

    pub fn from_axis_angle(r: &Vector3<f64>, t: Vector3<f64>) -> Self {
        Self::new(rotation_from_axis_angle(r), t)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform::new(rt, -(rt * self.translation))
    }

    /// Largest deviation of `R^T R` from identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max()
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, t: Vector3<f64>) -> Self {
        Self::new(q.to_rotation_matrix().into_inner(), t)
    }

    /// Linear interpolation of the translation and geodesic interpolation of the rotation.
    pub fn interpolate(&self, other: &RigidTransform, s: f64) -> RigidTransform {
        let delta = axis_angle_from_rotation(&(self.rotation.transpose() * other.rotation));
        RigidTransform::new(
            self.rotation * rotation_from_axis_angle(&(delta * s)),
            self.translation + (other.translation - self.translation) * s,
        )
    }
}
