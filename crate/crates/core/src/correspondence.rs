//! Fitting pairs between hand and object surfaces, and box/ground collision pairs.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{GroundPlane, KdTree, OrientedBox, PointCloud, RigidTransform};
use crate::hand::{HandModel, Kinematics};

/// Object cloud with its search tree, built once per scene.
#[derive(Clone, Debug)]
pub struct ObjectIndex {
    pub cloud: PointCloud,
    pub tree: KdTree,
}

impl ObjectIndex {
    pub fn new(cloud: PointCloud) -> Self {
        let tree = KdTree::build(cloud.points());
        Self { cloud, tree }
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Pairs farther apart than this are outliers.
    pub reject_radius: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { reject_radius: 0.025 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitPair {
    /// Index into the hand cloud passed to [`match_pairs`].
    pub sample: usize,
    pub object: usize,
    pub p: Vector3<f64>,
    pub n_p: Vector3<f64>,
    pub q: Vector3<f64>,
    pub n_q: Vector3<f64>,
    pub weight: f64,
    pub distance: f64,
}

/// Nearest object point for every hand sample, minus outliers beyond the
/// reject radius and minus duplicates (only the closest hand sample keeps a
/// shared object point; ties go to the lower sample index). Sorted by sample.
pub fn match_pairs(hand: &PointCloud, object: &ObjectIndex, params: &MatchParams) -> Vec<FitPair> {
    let mut best: Vec<Option<(usize, f64)>> = vec![None; object.len()];
    for (i, p) in hand.points().iter().enumerate() {
        let Some((j, d)) = object.tree.nearest(p) else {
            return Vec::new();
        };
        if d > params.reject_radius {
            continue;
        }
        match best[j] {
            Some((_, bd)) if bd <= d => {}
            _ => best[j] = Some((i, d)),
        }
    }
    let mut pairs: Vec<FitPair> = best
        .iter()
        .enumerate()
        .filter_map(|(j, b)| {
            b.map(|(i, d)| FitPair {
                sample: i,
                object: j,
                p: *hand.point(i),
                n_p: *hand.normal(i),
                q: *object.cloud.point(j),
                n_q: *object.cloud.normal(j),
                weight: hand.weight(i),
                distance: d,
            })
        })
        .collect();
    pairs.sort_by_key(|p| p.sample);
    pairs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// The contact (front) face penetrates.
    Inner,
    /// The back face penetrates; pairs anchor on the back face.
    Outer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollisionKind {
    Object { object: usize },
    Ground { sample: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollisionPair {
    pub kind: CollisionKind,
    /// Box (link) index.
    pub link: usize,
    pub side: Side,
    /// Anchor on the hand, world frame.
    pub p: Vector3<f64>,
    /// Outward normal at the anchor.
    pub n_p: Vector3<f64>,
    /// Object point, or the ground reference point.
    pub q: Vector3<f64>,
    /// Object normal, or the ground normal.
    pub n_q: Vector3<f64>,
    /// Penetration depth (non-negative).
    pub depth: f64,
}

/// Anchor of an object point on the chosen face of box `bx` with parent pose `pose`.
pub fn box_face_anchor(
    bx: &OrientedBox,
    pose: &RigidTransform,
    q: &Vector3<f64>,
    side: Side,
) -> (Vector3<f64>, Vector3<f64>) {
    let frame = bx.frame(pose);
    let front = side == Side::Inner;
    let local = frame.rotation.transpose() * (q - frame.translation);
    let p = frame.transform_point(&bx.project_to_face_local(&local, front));
    let n = frame.rotation * bx.face_normal_local(front);
    (p, n)
}

/// Anchor of a ground pair: the sample itself, or the matching point on the
/// link's back face for outer-side contact.
pub fn ground_anchor(
    bx: &OrientedBox,
    p: &Vector3<f64>,
    n: &Vector3<f64>,
    side: Side,
) -> (Vector3<f64>, Vector3<f64>) {
    match side {
        Side::Inner => (*p, *n),
        Side::Outer => (p - n * (2.0 * bx.half_extents[bx.contact_axis]), -n),
    }
}

/// Collision pairs of the hand against the object points and the ground.
///
/// `boxes[k]` is attached to a frame at `poses[k]`; `hand_links[i]` is the box
/// owning hand sample `i`. The side of every box is decided once from the
/// aggregate alignment of its contact-face normal with the colliding normals.
pub fn detect_collisions(
    boxes: &[OrientedBox],
    poses: &[RigidTransform],
    hand: &PointCloud,
    hand_links: &[usize],
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
) -> Vec<CollisionPair> {
    let mut out = Vec::new();
    for (k, (bx, pose)) in boxes.iter().zip(poses).enumerate() {
        let frame = bx.frame(pose);
        let inside: Vec<usize> = object
            .tree
            .within_radius(&frame.translation, bx.half_extents.norm())
            .into_iter()
            .filter(|&j| bx.contains_local(&(frame.rotation.transpose() * (object.cloud.point(j) - frame.translation))))
            .collect();
        if inside.is_empty() {
            continue;
        }
        let front = frame.rotation * bx.face_normal_local(true);
        let align: f64 = inside.iter().map(|&j| front.dot(object.cloud.normal(j))).sum();
        let side = if align <= 0.0 { Side::Inner } else { Side::Outer };
        for j in inside {
            let q = *object.cloud.point(j);
            let (p, n_p) = box_face_anchor(bx, pose, &q, side);
            out.push(CollisionPair {
                kind: CollisionKind::Object { object: j },
                link: k,
                side,
                p,
                n_p,
                q,
                n_q: *object.cloud.normal(j),
                depth: (p - q).dot(&n_p).max(0.0),
            });
        }
    }
    if let Some(g) = ground {
        for (k, bx) in boxes.iter().enumerate() {
            let below: Vec<usize> = (0..hand.len())
                .filter(|&i| hand_links[i] == k && g.signed_distance(hand.point(i)) < 0.0)
                .collect();
            if below.is_empty() {
                continue;
            }
            let align: f64 = below.iter().map(|&i| hand.normal(i).dot(&g.normal)).sum();
            let side = if align <= 0.0 { Side::Inner } else { Side::Outer };
            for i in below {
                let (p, n_p) = ground_anchor(bx, hand.point(i), hand.normal(i), side);
                out.push(CollisionPair {
                    kind: CollisionKind::Ground { sample: i },
                    link: k,
                    side,
                    p,
                    n_p,
                    q: g.point,
                    n_q: g.normal,
                    depth: (-g.signed_distance(&p)).max(0.0),
                });
            }
        }
    }
    out
}

/// [`detect_collisions`] for a posed hand model, using all of its samples.
pub fn detect_hand_collisions(
    model: &HandModel,
    kin: &Kinematics,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
) -> Vec<CollisionPair> {
    let boxes: Vec<OrientedBox> = model.links.iter().map(|l| l.bbox.clone()).collect();
    let (points, normals): (Vec<_>, Vec<_>) = (0..model.num_samples()).map(|i| kin.sample_world(model, i)).unzip();
    let hand = PointCloud::new(points, normals).expect("posed samples have unit normals");
    detect_collisions(&boxes, &kin.link_poses, &hand, &model.sample_links(), object, ground)
}

/// Sum of squared collision residuals: full distance for object pairs,
/// plane distance for ground pairs.
pub fn collision_energy(pairs: &[CollisionPair]) -> f64 {
    pairs
        .iter()
        .map(|c| match c.kind {
            CollisionKind::Object { .. } => (c.p - c.q).norm_squared(),
            CollisionKind::Ground { .. } => (c.p - c.q).dot(&c.n_q).powi(2),
        })
        .sum()
}
