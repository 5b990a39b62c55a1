//! Grasp wrench space construction from final contacts and the hull-based
//! quality features used for ranking.

mod hull;

pub use hull::{convex_hull, determinant, ConvexHull, Facet};

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::correspondence::{match_pairs, MatchParams, ObjectIndex};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::hand::{forward_kinematics_unchecked, HandModel, HandState};

/// Weights of the three features in `Q_gsp`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QgspCoefficients {
    pub volume: f64,
    pub condition: f64,
    pub inclusion: f64,
}

impl Default for QgspCoefficients {
    fn default() -> Self {
        Self {
            volume: 1.0,
            condition: 3.0,
            inclusion: 11.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityParams {
    /// Hand-object pairs farther apart than this are not contacts (m).
    pub contact_radius: f64,
    /// Pairs whose normals deviate from anti-parallel by more than this are pruned (deg).
    pub align_deg: f64,
    pub max_clusters: usize,
    pub friction: f64,
    pub cone_facets: usize,
    /// Torsional moment per unit normal force, as a fraction of the torque scale.
    pub torsion: f64,
    /// Cone discretization of the Ferrari-Canny reference evaluation.
    pub reference_cone_facets: usize,
    pub coefficients: QgspCoefficients,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            contact_radius: 0.01,
            align_deg: 60.0,
            max_clusters: 8,
            friction: 0.3,
            cone_facets: 8,
            torsion: 0.01,
            reference_cone_facets: 32,
            coefficients: QgspCoefficients::default(),
        }
    }
}

impl QualityParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.contact_radius > 0.0
            && (0.0..=90.0).contains(&self.align_deg)
            && self.max_clusters >= 1
            && self.friction > 0.0
            && self.cone_facets >= 3
            && self.reference_cone_facets >= 3
            && self.torsion >= 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid quality parameters {self:?}")));
        }
        Ok(())
    }
}

/// Contact points with inward unit normals, plus the object frame used for torques.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub points: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    /// Object centroid `o`.
    pub center: Vector3<f64>,
    /// Torque scale `rho`: largest distance of an object point from `o`.
    pub radius: f64,
}

impl ContactSet {
    pub fn new(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>, center: Vector3<f64>, radius: f64) -> Result<Self> {
        if points.is_empty() || points.len() != normals.len() {
            return Err(Error::NoContact(format!("{} points, {} normals", points.len(), normals.len())));
        }
        if normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-6) || !(radius > 0.0) {
            return Err(Error::InvalidCloud("contact normals must be unit and radius positive".into()));
        }
        Ok(Self {
            points,
            normals,
            center,
            radius,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Center and radius of an object cloud for torque normalization.
pub fn object_frame(object: &PointCloud) -> (Vector3<f64>, f64) {
    let c = object.centroid();
    let r = object.points().iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    (c, r.max(1e-9))
}

/// Lloyd iterations from a farthest-point start; returns the label of every point.
pub fn kmeans(points: &[Vector3<f64>], k: usize) -> Vec<usize> {
    let k = k.clamp(1, points.len().max(1));
    if points.is_empty() {
        return Vec::new();
    }
    let mut centers = vec![points[0]];
    while centers.len() < k {
        let (far, _) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, centers.iter().map(|c| (p - c).norm_squared()).fold(f64::INFINITY, f64::min)))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        centers.push(points[far]);
    }
    let nearest = |p: &Vector3<f64>, centers: &[Vector3<f64>]| {
        let mut best = (0, f64::INFINITY);
        for (j, c) in centers.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    };
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..100 {
        for (j, c) in centers.iter_mut().enumerate() {
            let members: Vec<&Vector3<f64>> = points.iter().zip(&labels).filter(|(_, l)| **l == j).map(|(p, _)| p).collect();
            if !members.is_empty() {
                *c = members.iter().fold(Vector3::zeros(), |a, p| a + *p) / members.len() as f64;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Contacts between a posed hand cloud and the object: nearest pairs within the
/// contact radius, normal-alignment pruning, then K-means over the surviving
/// object points. `k = None` uses the number of hand links that keep a pair.
pub fn extract_contacts(
    hand: &PointCloud,
    hand_links: &[usize],
    object: &ObjectIndex,
    k: Option<usize>,
    params: &QualityParams,
) -> Result<ContactSet> {
    if hand.is_empty() || object.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pairs = match_pairs(
        hand,
        object,
        &MatchParams {
            reject_radius: params.contact_radius,
        },
    );
    let limit = -params.align_deg.to_radians().cos();
    let kept: Vec<_> = pairs.iter().filter(|f| f.n_p.dot(&f.n_q) <= limit).collect();
    if kept.is_empty() {
        return Err(Error::NoContact(format!("{} pairs, none aligned", pairs.len())));
    }
    let k = match k {
        Some(k) => k.max(1),
        None => {
            let mut links: Vec<usize> = kept.iter().map(|f| hand_links[f.sample]).collect();
            links.sort_unstable();
            links.dedup();
            links.len().min(params.max_clusters)
        }
    }
    .min(kept.len());
    let qs: Vec<Vector3<f64>> = kept.iter().map(|f| f.q).collect();
    let labels = kmeans(&qs, k);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for j in 0..k {
        let members: Vec<_> = kept.iter().zip(&labels).filter(|(_, l)| **l == j).map(|(f, _)| *f).collect();
        if members.is_empty() {
            continue;
        }
        let c = members.iter().fold(Vector3::zeros(), |a, f| a + f.q) / members.len() as f64;
        let m = members.iter().fold(Vector3::zeros(), |a, f| a + f.n_q);
        let n = if m.norm() > 1e-9 { -m.normalize() } else { -members[0].n_q };
        points.push(c);
        normals.push(n);
    }
    let (center, radius) = object_frame(&object.cloud);
    ContactSet::new(points, normals, center, radius)
}

/// Contacts of a hand state against the object at full sample resolution.
pub fn contacts_of_state(
    model: &HandModel,
    state: &HandState,
    object: &ObjectIndex,
    params: &QualityParams,
) -> Result<ContactSet> {
    let kin = forward_kinematics_unchecked(model, &state.palm_pose, &state.q);
    let (points, normals): (Vec<_>, Vec<_>) = (0..model.num_samples()).map(|i| kin.sample_world(model, i)).unzip();
    let cloud = PointCloud::new(points, normals)?;
    extract_contacts(&cloud, &model.sample_links(), object, None, params)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WrenchSpace {
    /// Wrench primitives `(f, (c - o) x f / rho)`.
    pub primitives: Vec<Vector6<f64>>,
    /// `None` when the primitives do not span six dimensions.
    pub hull: Option<ConvexHull>,
    pub rho: f64,
}

impl WrenchSpace {
    pub fn degenerate(&self) -> bool {
        self.hull.is_none()
    }

    /// Primitives that are hull vertices (all primitives for a degenerate hull).
    pub fn vertex_matrix(&self) -> Vec<Vector6<f64>> {
        match &self.hull {
            Some(h) => h.vertices.iter().map(|&i| self.primitives[i]).collect(),
            None => self.primitives.clone(),
        }
    }
}

fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = n.cross(&helper).normalize();
    (t1, n.cross(&t1))
}

/// Soft-finger primitives: `cone_facets` unit edge forces of the linearized
/// friction cone plus the normal force with a positive and a negative torsional
/// moment, for every contact.
pub fn wrench_primitives(contacts: &ContactSet, friction: f64, cone_facets: usize, torsion: f64) -> Vec<Vector6<f64>> {
    let rho = contacts.radius;
    let mut out = Vec::with_capacity(contacts.len() * (cone_facets + 2));
    let wrench = |f: Vector3<f64>, torque: Vector3<f64>| {
        let mut w = Vector6::zeros();
        w.fixed_rows_mut::<3>(0).copy_from(&f);
        w.fixed_rows_mut::<3>(3).copy_from(&(torque / rho));
        w
    };
    for (c, n) in contacts.points.iter().zip(&contacts.normals) {
        let r = c - contacts.center;
        let (t1, t2) = tangent_basis(n);
        for k in 0..cone_facets {
            let a = std::f64::consts::TAU * k as f64 / cone_facets as f64;
            let f = (n + friction * (a.cos() * t1 + a.sin() * t2)).normalize();
            out.push(wrench(f, r.cross(&f)));
        }
        for s in [1.0, -1.0] {
            out.push(wrench(*n, r.cross(n) + s * torsion * rho * n));
        }
    }
    out
}

pub fn build_gws(contacts: &ContactSet, friction: f64, cone_facets: usize, torsion: f64) -> WrenchSpace {
    let primitives = wrench_primitives(contacts, friction, cone_facets, torsion);
    let pts: Vec<Vec<f64>> = primitives.iter().map(|w| w.iter().copied().collect()).collect();
    WrenchSpace {
        hull: convex_hull(&pts, 6),
        primitives,
        rho: contacts.radius,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityFeatures {
    /// 1 when the origin is strictly inside the hull.
    pub q_in: u8,
    #[serde(with = "crate::io::float")]
    pub q_vol: f64,
    /// Condition number of `W W^T` over the hull vertices.
    #[serde(with = "crate::io::float")]
    pub q_cond: f64,
    #[serde(with = "crate::io::float")]
    pub q_gsp: f64,
    pub degenerate: bool,
    pub num_contacts: usize,
}

/// Origin strictly inside: every facet lies farther than this from it.
pub const INCLUSION_TOLERANCE: f64 = 1e-9;

pub fn q_gsp(q_vol: f64, q_cond: f64, q_in: u8, c: &QgspCoefficients) -> f64 {
    c.volume * q_vol + c.condition / q_cond + c.inclusion * q_in as f64
}

/// `lambda_max / lambda_min` of `W W^T`, over the non-vanishing spectrum when singular.
pub fn condition_number(vertices: &[Vector6<f64>]) -> (f64, bool) {
    let mut g = Matrix6::zeros();
    for w in vertices {
        g += w * w.transpose();
    }
    let ev = g.symmetric_eigenvalues();
    let max = ev.max();
    if max <= 0.0 {
        return (1.0, true);
    }
    let min = ev.iter().copied().filter(|&l| l > 1e-12 * max).fold(f64::INFINITY, f64::min);
    let singular = ev.iter().any(|&l| l <= 1e-12 * max);
    ((max / min).max(1.0), singular)
}

pub fn q_features(ws: &WrenchSpace, num_contacts: usize, coefficients: &QgspCoefficients) -> QualityFeatures {
    let (q_cond, _) = condition_number(&ws.vertex_matrix());
    let (q_in, q_vol) = match &ws.hull {
        Some(h) => ((h.min_offset() > INCLUSION_TOLERANCE) as u8, h.volume),
        None => (0, 0.0),
    };
    QualityFeatures {
        q_in,
        q_vol,
        q_cond,
        q_gsp: q_gsp(q_vol, q_cond, q_in, coefficients),
        degenerate: ws.degenerate(),
        num_contacts,
    }
}

/// Classical epsilon metric: distance from the origin to the nearest facet, 0
/// when the origin is not strictly inside or the hull is degenerate.
pub fn ferrari_canny(ws: &WrenchSpace) -> f64 {
    match &ws.hull {
        Some(h) => {
            let e = h.min_offset();
            if e > INCLUSION_TOLERANCE {
                e
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

/// Features of a contact set under `params`.
pub fn evaluate_contacts(contacts: &ContactSet, params: &QualityParams) -> QualityFeatures {
    let ws = build_gws(contacts, params.friction, params.cone_facets, params.torsion);
    q_features(&ws, contacts.len(), &params.coefficients)
}

/// Ferrari-Canny metric of a contact set on the finely discretized friction cone.
pub fn ferrari_canny_reference(contacts: &ContactSet, params: &QualityParams) -> f64 {
    ferrari_canny(&build_gws(contacts, params.friction, params.reference_cone_facets, params.torsion))
}

/// Order of candidates by descending `q_gsp`, then ascending fit error, then id.
pub fn rank_order(keys: &[(f64, f64, usize)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    let key = |x: f64| if x.is_nan() { f64::NEG_INFINITY } else { x };
    idx.sort_by(|&a, &b| {
        let (qa, fa, ia) = keys[a];
        let (qb, fb, ib) = keys[b];
        key(qb)
            .total_cmp(&key(qa))
            .then(key(-fb).total_cmp(&key(-fa)))
            .then(ia.cmp(&ib))
    });
    idx
}

/// Sort candidates best first and number them; candidates without quality go last, unranked.
pub fn rank(mut candidates: Vec<crate::mdisf::GraspCandidate>) -> Vec<crate::mdisf::GraspCandidate> {
    let keys: Vec<(f64, f64, usize)> = candidates
        .iter()
        .map(|c| (c.quality.map_or(f64::NAN, |q| q.q_gsp), c.fit_error, c.seed_id))
        .collect();
    let order = rank_order(&keys);
    let mut slots: Vec<Option<crate::mdisf::GraspCandidate>> = candidates.drain(..).map(Some).collect();
    let mut out: Vec<_> = order.into_iter().map(|i| slots[i].take().unwrap()).collect();
    let mut r = 0;
    for c in &mut out {
        c.rank = c.quality.map(|_| {
            r += 1;
            r - 1
        });
    }
    out
}
