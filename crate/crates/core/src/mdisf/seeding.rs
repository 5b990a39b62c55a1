use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateStatus, GraspCandidate};
use crate::geometry::{rotation_from_axis_angle, GroundPlane, PointCloud, RigidTransform};
use crate::hand::{HandModel, HandState, JointRole};

pub const NUM_SECTORS: usize = 26;

/// Unit directions of the 26 angular sectors, `{-1, 0, 1}^3` without the origin.
pub fn sector_directions() -> [Vector3<f64>; NUM_SECTORS] {
    let mut out = [Vector3::zeros(); NUM_SECTORS];
    let mut k = 0;
    for x in -1i32..=1 {
        for y in -1i32..=1 {
            for z in -1i32..=1 {
                if (x, y, z) != (0, 0, 0) {
                    out[k] = Vector3::new(x as f64, y as f64, z as f64).normalize();
                    k += 1;
                }
            }
        }
    }
    out
}

/// Sector whose direction is closest in angle to `d` (lowest index on ties).
pub fn sector_of(d: &Vector3<f64>) -> usize {
    let dirs = sector_directions();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in dirs.iter().enumerate() {
        let c = s.dot(d);
        if c > best.1 {
            best = (i, c);
        }
    }
    best.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedParams {
    /// Palm offset range from the object's support plane along the approach
    /// direction (m); negative values start the palm inside the object.
    pub offset_min: f64,
    pub offset_max: f64,
    /// Flexion seed as a fraction of each flex joint's range.
    pub flex_fraction: f64,
    /// Upper end of the random spread as a fraction of its range.
    pub spread_fraction: f64,
    /// Softmax sharpness over sector scores (1/m).
    pub beta: f64,
    /// Share of the sampling mass spread uniformly over feasible sectors.
    pub floor: f64,
    /// Added to the score of candidates that ended in collision (m).
    pub collision_penalty: f64,
    /// Score of candidates that found no contact (m).
    pub failure_score: f64,
}

impl Default for SeedParams {
    fn default() -> Self {
        Self {
            offset_min: -0.05,
            offset_max: -0.01,
            flex_fraction: 0.5,
            spread_fraction: 1.0 / 3.0,
            beta: 200.0,
            floor: 0.2,
            collision_penalty: 0.01,
            failure_score: 0.03,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedPose {
    pub state: HandState,
    /// Sampling probability of the seed's sector.
    pub priority: f64,
    pub sector: usize,
}

/// Sectors the palm may approach from: all of them, or those not below the ground.
pub fn feasible_sectors(ground: Option<&GroundPlane>) -> [bool; NUM_SECTORS] {
    let dirs = sector_directions();
    let mut out = [true; NUM_SECTORS];
    if let Some(g) = ground {
        for (f, d) in out.iter_mut().zip(dirs.iter()) {
            *f = d.dot(&g.normal) >= -1e-12;
        }
    }
    out
}

fn candidate_score(c: &GraspCandidate, params: &SeedParams) -> f64 {
    if c.status == CandidateStatus::FailedNoContact || !c.fit_error.is_finite() {
        return params.failure_score;
    }
    c.fit_error.sqrt() + if c.collision_free { 0.0 } else { params.collision_penalty }
}

/// Sampling probability of every sector given past candidates: a softmax over
/// `-beta * mean score` mixed with a uniform floor. A candidate scores its RMS
/// fitting residual `sqrt(E_fit / |I|)` plus a penalty when it ended in collision. Sectors without history
/// take the mean of the visited ones.
pub fn sector_weights(history: &[GraspCandidate], feasible: &[bool; NUM_SECTORS], params: &SeedParams) -> [f64; NUM_SECTORS] {
    let mut sum = [0.0; NUM_SECTORS];
    let mut count = [0usize; NUM_SECTORS];
    for c in history {
        sum[c.sector] += candidate_score(c, params);
        count[c.sector] += 1;
    }
    let visited: Vec<f64> = (0..NUM_SECTORS)
        .filter(|&i| count[i] > 0 && feasible[i])
        .map(|i| sum[i] / count[i] as f64)
        .collect();
    let n_feasible = feasible.iter().filter(|f| **f).count().max(1);
    let mut out = [0.0; NUM_SECTORS];
    if visited.is_empty() {
        for i in 0..NUM_SECTORS {
            if feasible[i] {
                out[i] = 1.0 / n_feasible as f64;
            }
        }
        return out;
    }
    let prior = visited.iter().sum::<f64>() / visited.len() as f64;
    let scores: Vec<f64> = (0..NUM_SECTORS)
        .map(|i| if count[i] > 0 { sum[i] / count[i] as f64 } else { prior })
        .collect();
    let best = (0..NUM_SECTORS)
        .filter(|&i| feasible[i])
        .map(|i| scores[i])
        .fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    for i in 0..NUM_SECTORS {
        if feasible[i] {
            out[i] = (-params.beta * (scores[i] - best)).exp();
            z += out[i];
        }
    }
    for i in 0..NUM_SECTORS {
        if feasible[i] {
            out[i] = (1.0 - params.floor) * out[i] / z + params.floor / n_feasible as f64;
        }
    }
    out
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            if u < *w {
                return i;
            }
            u -= w;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Uniform random direction inside the angular cell of `sector`.
fn direction_in(sector: usize, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            let d = v / n;
            if sector_of(&d) == sector {
                return d;
            }
        }
    }
}

/// Palm frame whose normal (+z) points along `-d`, rolled by `roll` about it.
fn facing(d: &Vector3<f64>, roll: f64) -> Matrix3<f64> {
    let z = -d;
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z]) * rotation_from_axis_angle(&(Vector3::z() * roll))
}

/// Draw `n` seeds around the object: pick a sector by [`sector_weights`], a
/// direction `d` inside it, and place the palm facing the centroid at a random
/// offset beyond the object's support plane along `d`, with a random roll and
/// half-open fingers.
pub fn guided_sample(
    model: &HandModel,
    object: &PointCloud,
    ground: Option<&GroundPlane>,
    history: &[GraspCandidate],
    n: usize,
    params: &SeedParams,
    rng: &mut ChaCha8Rng,
) -> Vec<SeedPose> {
    if n == 0 || object.is_empty() {
        return Vec::new();
    }
    let feasible = feasible_sectors(ground);
    let weights = sector_weights(history, &feasible, params);
    let centroid = object.centroid();
    (0..n)
        .map(|_| {
            let sector = pick(&weights, rng);
            let d = direction_in(sector, rng);
            let support = object
                .points()
                .iter()
                .map(|p| (p - centroid).dot(&d))
                .fold(f64::NEG_INFINITY, f64::max);
            let offset = rng.gen_range(params.offset_min..=params.offset_max);
            let roll = rng.gen_range(0.0..std::f64::consts::TAU);
            let q = model
                .actuated
                .iter()
                .map(|a| match a.role {
                    JointRole::Spread => a.min + rng.gen_range(0.0..=params.spread_fraction) * (a.max - a.min),
                    JointRole::Flex => a.min + params.flex_fraction * (a.max - a.min),
                })
                .collect();
            let pose = RigidTransform::new(facing(&d, roll), centroid + d * (support + offset));
            SeedPose {
                state: HandState::new(pose, q),
                priority: weights[sector],
                sector,
            }
        })
        .collect()
}
