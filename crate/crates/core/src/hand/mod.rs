//! Parametric multi-fingered hand: kinematics, front-surface samples, boxes and fitting weights.

mod barrett;
mod kinematics;
mod model;
mod weights;

pub use barrett::{default_barrett_like_model, BarrettDims, DEFAULT_HAND_TOML};
pub use kinematics::{forward_kinematics, point_jacobian, sample_surface, HandSurface, Kinematics};
pub(crate) use kinematics::forward_kinematics_unchecked;
pub use kinematics::surface_from_kinematics;
pub use model::{
    ActuatedJoint, HandModel, HandModelFile, HandState, Joint, JointRole, Link, LinkKind, LinkSpec,
    SurfaceSample, LIMIT_TOLERANCE,
};
pub use weights::{shape_weights, GraspMode, WeightProfile};
