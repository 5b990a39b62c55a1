use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::correspondence::ObjectIndex;
use crate::geometry::{GroundPlane, OrientedBox, RigidTransform};
use crate::hand::{HandModel, Kinematics};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdTarget {
    /// Object point index.
    Object(usize),
    /// Hand sample index measured against the ground.
    Ground(usize),
}

/// One critical pair: `sd = (p - q) . n` with `p` on the hand and `q` on the obstacle.
#[derive(Clone, Debug, PartialEq)]
pub struct SdPair {
    pub link: usize,
    pub target: SdTarget,
    pub p: Vector3<f64>,
    pub q: Vector3<f64>,
    pub n: Vector3<f64>,
    pub sd: f64,
}

/// Critical pairs of one hand configuration: at most one object pair and one
/// ground pair per link.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdResult {
    pub pairs: Vec<SdPair>,
}

impl SdResult {
    /// Smallest signed distance, `+inf` when nothing is within `d_check`.
    pub fn min(&self) -> f64 {
        self.pairs.iter().map(|p| p.sd).fold(f64::INFINITY, f64::min)
    }

    pub fn is_clear(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Signed distance between box `bx` (posed by `frame`, the box frame) and a
/// point `q` with outward surface normal `n_q`. Returns the closest box point
/// `p` and the unit direction `n` with `sd = (p - q) . n`, or `None` when every
/// face of an interior point is filtered out.
pub fn box_point_distance(
    bx: &OrientedBox,
    frame: &RigidTransform,
    q: &Vector3<f64>,
    n_q: Option<&Vector3<f64>>,
) -> Option<(Vector3<f64>, Vector3<f64>, f64)> {
    let r = &frame.rotation;
    let local = r.transpose() * (q - frame.translation);
    let h = &bx.half_extents;
    let clamped = Vector3::new(
        local.x.clamp(-h.x, h.x),
        local.y.clamp(-h.y, h.y),
        local.z.clamp(-h.z, h.z),
    );
    let gap = local - clamped;
    if gap.norm() > 0.0 {
        // outside: n points from q to the box
        let n_local = -gap / gap.norm();
        let p = frame.transform_point(&clamped);
        let n = r * n_local;
        return Some((p, n, (p - q).dot(&n)));
    }
    let n_local_q = n_q.map(|n| r.transpose() * n);
    let mut best: Option<(f64, usize, f64)> = None;
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let depth = h[axis] - sign * local[axis];
            // q - p_face points along -sign * e_axis
            if let Some(nq) = &n_local_q {
                if -sign * nq[axis] < 0.0 {
                    continue;
                }
            }
            if best.map_or(true, |b| depth < b.0) {
                best = Some((depth, axis, sign));
            }
        }
    }
    let (_, axis, sign) = best?;
    let mut face = local;
    face[axis] = sign * h[axis];
    let mut n_local = Vector3::zeros();
    n_local[axis] = -sign;
    let p = frame.transform_point(&face);
    let n = r * n_local;
    Some((p, n, (p - q).dot(&n)))
}

/// Critical object and ground pairs of every link box for one configuration.
/// Only object points inside the box inflated by `d_check` and hand samples
/// closer than `d_check` to the ground are considered.
pub fn signed_distance(
    model: &HandModel,
    kin: &Kinematics,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    d_check: f64,
) -> SdResult {
    let mut pairs = Vec::new();
    for (l, link) in model.links.iter().enumerate() {
        let bx = &link.bbox;
        let frame = bx.frame(&kin.link_poses[l]);
        let inflated = bx.inflated(d_check);
        let reach = inflated.half_extents.norm();
        let mut best: Option<SdPair> = None;
        for i in object.tree.within_radius(&frame.translation, reach) {
            let q = object.cloud.point(i);
            let local = frame.rotation.transpose() * (q - frame.translation);
            if !inflated.contains_local(&local) {
                continue;
            }
            if let Some((p, n, sd)) = box_point_distance(bx, &frame, q, Some(object.cloud.normal(i))) {
                if best.as_ref().map_or(true, |b| sd < b.sd) {
                    best = Some(SdPair { link: l, target: SdTarget::Object(i), p, q: *q, n, sd });
                }
            }
        }
        pairs.extend(best);
        if let Some(g) = ground {
            let mut best: Option<SdPair> = None;
            for i in link.samples.clone() {
                let (p, _) = kin.sample_world(model, i);
                let sd = g.signed_distance(&p);
                if sd < d_check && best.as_ref().map_or(true, |b| sd < b.sd) {
                    let q = p - g.normal * sd;
                    best = Some(SdPair { link: l, target: SdTarget::Ground(i), p, q, n: g.normal, sd });
                }
            }
            pairs.extend(best);
        }
    }
    SdResult { pairs }
}
