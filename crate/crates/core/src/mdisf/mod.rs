//! Multi-resolution surface fitting: correspondence matching alternated with
//! IPFO over a pyramid of hand-sample resolutions, plus seeding and batch planning.

mod planner;
mod seeding;

pub use planner::{plan_grasps, PlanParams, PlanReport};
pub use seeding::{
    feasible_sectors, guided_sample, sector_directions, sector_of, sector_weights, SeedParams, SeedPose, NUM_SECTORS,
};

use serde::{Deserialize, Serialize};

use crate::correspondence::{collision_energy, detect_hand_collisions, match_pairs, FitPair, MatchParams, ObjectIndex};
use crate::error::{Error, Result};
use crate::geometry::{GroundPlane, PointCloud};
use crate::hand::{forward_kinematics_unchecked, shape_weights, GraspMode, HandModel, HandState, Kinematics, WeightProfile};
use crate::ipfo::{ipfo, FitParams};
use crate::quality::QualityFeatures;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PyramidParams {
    pub levels: usize,
    /// Iteration cap of the finest level; level `l` gets `i0 / 2^l`.
    pub i0: usize,
    /// Convergence band of the finest level; level `l` gets `2^l eps0`.
    pub eps0: f64,
}

impl Default for PyramidParams {
    fn default() -> Self {
        Self {
            levels: 4,
            i0: 200,
            eps0: 0.02,
        }
    }
}

impl PyramidParams {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 || self.i0 < 1 || !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::Config(format!("invalid pyramid parameters {self:?}")));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, level: usize) -> usize {
        (self.i0 >> level).max(1)
    }

    pub fn band(&self, level: usize) -> f64 {
        self.eps0 * (1u64 << level) as f64
    }
}

/// Everything the fitting loop needs besides the scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdisfParams {
    pub fit: FitParams,
    pub pyramid: PyramidParams,
    pub matching: MatchParams,
    pub mode: GraspMode,
    /// Object points closer than this to a box face are contact, not collision,
    /// when deciding the collision-free flag.
    pub contact_tolerance: f64,
}

impl Default for MdisfParams {
    fn default() -> Self {
        Self {
            fit: FitParams::default(),
            pyramid: PyramidParams::default(),
            matching: MatchParams::default(),
            mode: GraspMode::Power,
            contact_tolerance: 0.002,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStatus {
    Converged,
    /// No correspondence at the coarsest level.
    FailedNoContact,
}

/// Result of fitting one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    pub seed_id: usize,
    pub sector: usize,
    pub mode: GraspMode,
    pub status: CandidateStatus,
    pub state: HandState,
    pub initial_state: HandState,
    /// Average fitting error `E_fit / |I|` at full resolution, unweighted.
    #[serde(with = "crate::io::float")]
    pub fit_error: f64,
    #[serde(with = "crate::io::float")]
    pub initial_fit_error: f64,
    /// Collision error `E_col` at full resolution.
    #[serde(with = "crate::io::float")]
    pub col_error: f64,
    #[serde(with = "crate::io::float")]
    pub initial_col_error: f64,
    pub collision_free: bool,
    /// Pair count behind `fit_error`.
    pub num_pairs: usize,
    /// Accepted IPFO error after every outer iteration, per level (coarse first).
    pub level_trace: Vec<Vec<f64>>,
    pub ipfo_calls: usize,
    pub ipfo_passes: usize,
    pub quality: Option<QualityFeatures>,
    pub rank: Option<usize>,
}

/// Unweighted fit and collision measures of a hand state at full resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateMeasures {
    pub fit_error: f64,
    pub num_pairs: usize,
    pub col_error: f64,
    pub collision_free: bool,
}

fn posed_cloud(model: &HandModel, kin: &Kinematics, samples: &[usize], weights: &[f64]) -> PointCloud {
    let (points, normals): (Vec<_>, Vec<_>) = samples.iter().map(|&i| kin.sample_world(model, i)).unzip();
    PointCloud::new(points, normals)
        .and_then(|c| c.with_weights(samples.iter().map(|&i| weights[i]).collect()))
        .expect("posed samples are valid")
}

/// Full-resolution measures used for reporting and for the collision-free flag.
pub fn measure_state(
    model: &HandModel,
    state: &HandState,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    params: &MdisfParams,
) -> StateMeasures {
    let kin = forward_kinematics_unchecked(model, &state.palm_pose, &state.q);
    let all: Vec<usize> = (0..model.num_samples()).collect();
    let cloud = posed_cloud(model, &kin, &all, &vec![1.0; all.len()]);
    let pairs = match_pairs(&cloud, object, &params.matching);
    let alpha = params.fit.alpha;
    let sum: f64 = pairs
        .iter()
        .map(|f| (f.p - f.q).dot(&f.n_q).powi(2) + alpha * alpha * (f.n_p.dot(&f.n_q) + 1.0).powi(2))
        .sum();
    let fit_error = if pairs.is_empty() { f64::NAN } else { sum / pairs.len() as f64 };
    let collisions = detect_hand_collisions(model, &kin, object, ground);
    StateMeasures {
        fit_error,
        num_pairs: pairs.len(),
        col_error: collision_energy(&collisions),
        collision_free: is_collision_free(model, &kin, object, ground, params.contact_tolerance),
    }
}

/// No object point deeper than `tolerance` inside any box, and no hand sample
/// more than `tolerance` below the ground.
pub fn is_collision_free(
    model: &HandModel,
    kin: &Kinematics,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    tolerance: f64,
) -> bool {
    for (link, pose) in model.links.iter().zip(&kin.link_poses) {
        let bx = &link.bbox;
        if bx.half_extents.iter().any(|h| *h <= tolerance) {
            continue;
        }
        let shrunk = bx.inflated(-tolerance);
        let frame = bx.frame(pose);
        for j in object.tree.within_radius(&frame.translation, shrunk.half_extents.norm()) {
            let local = frame.rotation.transpose() * (object.cloud.point(j) - frame.translation);
            if shrunk.contains_local(&local) {
                return false;
            }
        }
    }
    if let Some(g) = ground {
        for i in 0..model.num_samples() {
            if g.signed_distance(&kin.sample_world(model, i).0) < -tolerance {
                return false;
            }
        }
    }
    true
}

/// Fit one seed through the resolution pyramid.
pub fn mdisf(
    seed: &SeedPose,
    seed_id: usize,
    model: &HandModel,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    params: &MdisfParams,
) -> Result<GraspCandidate> {
    if object.len() < 50 {
        return Err(Error::InvalidCloud(format!("object cloud has {} points, at least 50 required", object.len())));
    }
    params.fit.validate()?;
    params.pyramid.validate()?;
    let weights = shape_weights(model, &WeightProfile::for_mode(params.mode));
    let mut state = HandState::new(seed.state.palm_pose, model.clamp(&seed.state.q));
    let initial = measure_state(model, &state, object, ground, params);
    let mut level_trace = Vec::new();
    let mut ipfo_calls = 0;
    let mut ipfo_passes = 0;
    let mut status = CandidateStatus::Converged;
    'levels: for level in (0..params.pyramid.levels).rev() {
        let cap = params.pyramid.iteration_cap(level);
        let band = params.pyramid.band(level);
        let subset = model.downsample(1 << level);
        let mut e_prev = f64::INFINITY;
        let mut eta = 0.0;
        let mut it = 0;
        let mut trace = Vec::new();
        while !(eta >= 1.0 - band && eta <= 1.0 + band) && it < cap {
            it += 1;
            let kin = forward_kinematics_unchecked(model, &state.palm_pose, &state.q);
            let cloud = posed_cloud(model, &kin, &subset, &weights);
            let fit: Vec<FitPair> = match_pairs(&cloud, object, &params.matching)
                .into_iter()
                .map(|mut f| {
                    f.sample = subset[f.sample];
                    f
                })
                .collect();
            let collisions = detect_hand_collisions(model, &kin, object, ground);
            if fit.is_empty() && level_trace.is_empty() && trace.is_empty() {
                status = CandidateStatus::FailedNoContact;
                break 'levels;
            }
            let result = match ipfo(model, &state, &object.cloud, &fit, &collisions, ground, &params.fit) {
                Ok(r) => r,
                Err(Error::Underdetermined { .. }) => break,
                Err(e) => return Err(e),
            };
            ipfo_calls += 1;
            ipfo_passes += result.steps.len();
            state = result.state;
            let e = result.error.total;
            eta = e / e_prev;
            e_prev = e;
            trace.push(e);
        }
        level_trace.push(trace);
    }
    let last = measure_state(model, &state, object, ground, params);
    Ok(GraspCandidate {
        seed_id,
        sector: seed.sector,
        mode: params.mode,
        status,
        initial_state: seed.state.clone(),
        state,
        fit_error: last.fit_error,
        initial_fit_error: initial.fit_error,
        col_error: last.col_error,
        initial_col_error: initial.col_error,
        collision_free: status == CandidateStatus::Converged && last.collision_free,
        num_pairs: last.num_pairs,
        level_trace,
        ipfo_calls,
        ipfo_passes,
        quality: None,
        rank: None,
    })
}

/// Share of matched pairs at `state` that lie on links of the given kinds.
pub fn pair_share_on(
    model: &HandModel,
    state: &HandState,
    object: &ObjectIndex,
    params: &MatchParams,
    kinds: &[crate::hand::LinkKind],
) -> f64 {
    let kin = forward_kinematics_unchecked(model, &state.palm_pose, &state.q);
    let all: Vec<usize> = (0..model.num_samples()).collect();
    let cloud = posed_cloud(model, &kin, &all, &vec![1.0; all.len()]);
    let pairs = match_pairs(&cloud, object, params);
    if pairs.is_empty() {
        return 0.0;
    }
    let on = pairs
        .iter()
        .filter(|f| kinds.contains(&model.links[model.samples[f.sample].link].kind))
        .count();
    on as f64 / pairs.len() as f64
}
