//! Rigid transforms, oriented point clouds, nearest-neighbor search and boxes.

mod bbox;
mod cloud;
mod kdtree;
pub mod ply;
mod transform;

pub use bbox::{point_in_box, GroundPlane, OrientedBox};
pub use cloud::{estimate_normals, nearest_neighbors, NormalEstimate, PointCloud, NORMAL_TOLERANCE};
pub use kdtree::KdTree;
pub use transform::{
    axis_angle_from_rotation, geodesic_distance, hat, orthonormalize, rotation_from_axis_angle,
    RigidTransform,
};
