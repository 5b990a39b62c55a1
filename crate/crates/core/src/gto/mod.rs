//! Finger trajectory optimization from a lifted pregrasp to the final grasp.
//!
//! The palm follows a fixed interpolated path; only the joint samples move.
//! Each outer iteration refreshes the critical point-box pairs, solves a
//! penalized QP in the joint displacements and multiplies the penalty by `mu`.

mod qp;
mod sd;


use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::correspondence::ObjectIndex;
use crate::error::{Error, Result};
use crate::geometry::{geodesic_distance, GroundPlane, RigidTransform};
use crate::hand::{forward_kinematics, HandModel, HandState, JointRole};

pub use qp::{solve_penalized_qp, PenaltyRow, QpProblem, QpSolution};
pub use sd::{box_point_distance, signed_distance, SdPair, SdResult, SdTarget};

/// Height of the pregrasp above the final palm position (m).
pub const PREGRASP_LIFT: f64 = 0.3;

/// Slack on `d_safe` when deciding that a trajectory is collision free.
pub const SAFE_SLACK: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtoParams {
    /// Number of trajectory samples including both endpoints.
    pub samples: usize,
    pub d_check: f64,
    pub d_safe: f64,
    /// Per-joint bound on `|q[s+1] - q[s]|` (rad).
    pub step_bound: Vec<f64>,
    /// Per-joint trust region on one outer iteration's displacement (rad).
    pub trust_region: Vec<f64>,
    pub c0: f64,
    pub mu: f64,
    pub max_outer: usize,
    pub inner_iterations: usize,
    pub inner_tolerance: f64,
}

impl Default for GtoParams {
    fn default() -> Self {
        Self {
            samples: 30,
            d_check: 0.03,
            d_safe: 0.01,
            step_bound: vec![0.4; 4],
            trust_region: vec![0.2, 0.2, 0.2, 0.4],
            c0: 1.0,
            mu: 2.0,
            max_outer: 20,
            inner_iterations: 3000,
            inner_tolerance: 1e-12,
        }
    }
}

impl GtoParams {
    pub fn validate(&self, dof: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.samples < 2 {
            return bad(format!("gto samples must be at least 2, got {}", self.samples));
        }
        if !(self.d_safe >= 0.0 && self.d_safe < self.d_check) {
            return bad(format!("need 0 <= d_safe < d_check, got {} and {}", self.d_safe, self.d_check));
        }
        if !(self.mu > 1.0) || !(self.c0 > 0.0) {
            return bad(format!("need c0 > 0 and mu > 1, got {} and {}", self.c0, self.mu));
        }
        if self.step_bound.len() != dof || self.trust_region.len() != dof {
            return bad(format!(
                "step_bound and trust_region need {dof} entries, got {} and {}",
                self.step_bound.len(),
                self.trust_region.len()
            ));
        }
        if self.step_bound.iter().chain(&self.trust_region).any(|b| !(*b > 0.0)) {
            return bad("step bounds and trust regions must be positive".into());
        }
        Ok(())
    }

    /// Penalty weight after `k` outer iterations.
    pub fn penalty_after(&self, k: usize) -> f64 {
        let mut c = self.c0;
        for _ in 0..k {
            c *= self.mu;
        }
        c
    }
}

/// Sampled finger trajectory. Sample 0 is the pregrasp, the last one the final grasp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub palm_poses: Vec<RigidTransform>,
    pub joints: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Linear joint interpolation; the palm moves linearly in position and
    /// along the geodesic in rotation.
    pub fn interpolate(start: &HandState, end: &HandState, samples: usize) -> Self {
        let n = samples.max(2);
        let mut palm_poses = Vec::with_capacity(n);
        let mut joints = Vec::with_capacity(n);
        for s in 0..n {
            if s == 0 {
                palm_poses.push(start.palm_pose);
                joints.push(start.q.clone());
            } else if s == n - 1 {
                palm_poses.push(end.palm_pose);
                joints.push(end.q.clone());
            } else {
                let t = s as f64 / (n - 1) as f64;
                palm_poses.push(start.palm_pose.interpolate(&end.palm_pose, t));
                joints.push(start.q.iter().zip(&end.q).map(|(a, b)| a + (b - a) * t).collect());
            }
        }
        Self { palm_poses, joints }
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn state(&self, s: usize) -> HandState {
        HandState::new(self.palm_poses[s], self.joints[s].clone())
    }

    /// Largest `|q[s+1][j] - q[s][j]| - bound[j]` over the trajectory (<= 0 when feasible).
    pub fn step_excess(&self, bound: &[f64]) -> f64 {
        self.joints
            .windows(2)
            .flat_map(|w| (0..w[0].len()).map(move |j| (w[1][j] - w[0][j]).abs() - bound[j]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The 24 rotations that map coordinate axes onto signed coordinate axes.
pub fn axis_aligned_rotations() -> Vec<Matrix3<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for signs in 0..8u8 {
            let mut m = Matrix3::zeros();
            for (col, &row) in p.iter().enumerate() {
                m[(row, col)] = if signs >> col & 1 == 1 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

/// Member of `canonical` closest to `rotation` in geodesic distance (first one on ties).
pub fn nearest_rotation(rotation: &Matrix3<f64>, canonical: &[Matrix3<f64>]) -> Matrix3<f64> {
    let mut best = (f64::INFINITY, *rotation);
    for c in canonical {
        let d = geodesic_distance(rotation, c);
        if d < best.0 {
            best = (d, *c);
        }
    }
    best.1
}

/// Lifted, half-closed hand above a final grasp, snapped to an axis-aligned orientation.
pub fn pregrasp_pose(model: &HandModel, final_state: &HandState) -> HandState {
    pregrasp_pose_with(model, final_state, &axis_aligned_rotations())
}

pub fn pregrasp_pose_with(model: &HandModel, final_state: &HandState, canonical: &[Matrix3<f64>]) -> HandState {
    let palm = &final_state.palm_pose;
    let pose = RigidTransform::new(
        nearest_rotation(&palm.rotation, canonical),
        palm.translation + Vector3::z() * PREGRASP_LIFT,
    );
    let q = model
        .actuated
        .iter()
        .zip(&final_state.q)
        .map(|(a, &q)| match a.role {
            JointRole::Flex => 0.5 * (a.min + a.max),
            JointRole::Spread => q,
        })
        .collect();
    HandState::new(pose, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtoStatus {
    CollisionFree,
    CollisionUnresolved,
}

#[derive(Clone, Debug)]
pub struct GtoResult {
    pub trajectory: Trajectory,
    pub initial: Trajectory,
    pub status: GtoStatus,
    /// Number of QP solves.
    pub outer_iterations: usize,
    /// Penalty weight after the last outer iteration, `c0 * mu^outer_iterations`.
    pub penalty: f64,
    /// Smallest signed distance over the interior samples (+inf when clear).
    pub worst_sd: f64,
    pub initial_worst_sd: f64,
    /// Worst interior signed distance before every QP and after the last one.
    pub trace: Vec<f64>,
    pub seconds: f64,
}

/// Critical pairs of every sample of a trajectory.
pub fn trajectory_distances(
    model: &HandModel,
    trajectory: &Trajectory,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    d_check: f64,
) -> Result<Vec<SdResult>> {
    (0..trajectory.len())
        .map(|s| {
            let kin = forward_kinematics(model, &trajectory.state(s))?;
            Ok(signed_distance(model, &kin, object, ground, d_check))
        })
        .collect()
}

fn interior_worst(distances: &[SdResult]) -> f64 {
    let n = distances.len();
    if n <= 2 {
        return f64::INFINITY;
    }
    distances[1..n - 1].iter().map(SdResult::min).fold(f64::INFINITY, f64::min)
}

/// Plan a collision-free finger trajectory from the pregrasp of `final_state` to it.
pub fn gto_optimize(
    model: &HandModel,
    final_state: &HandState,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    params: &GtoParams,
) -> Result<GtoResult> {
    let start = pregrasp_pose(model, final_state);
    gto_between(model, &start, final_state, object, ground, params)
}

/// Same as [`gto_optimize`] with an explicit start state.
pub fn gto_between(
    model: &HandModel,
    start: &HandState,
    end: &HandState,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    params: &GtoParams,
) -> Result<GtoResult> {
    let clock = Instant::now();
    params.validate(model.dof())?;
    start.validate(model)?;
    end.validate(model)?;
    for j in 0..model.dof() {
        let span = (end.q[j] - start.q[j]).abs();
        if span > params.step_bound[j] * (params.samples - 1) as f64 {
            return Err(Error::Config(format!(
                "joint {j} moves {span} rad, more than {} samples of step {} allow",
                params.samples, params.step_bound[j]
            )));
        }
    }
    let initial = Trajectory::interpolate(start, end, params.samples);
    let mut traj = initial.clone();
    let lower = model.lower_limits();
    let upper = model.upper_limits();
    let mut c = params.c0;
    let mut outer = 0;
    let mut trace = Vec::new();
    let mut initial_worst = None;
    let worst = loop {
        let distances = trajectory_distances(model, &traj, object, ground, params.d_check)?;
        let worst = interior_worst(&distances);
        trace.push(worst);
        initial_worst.get_or_insert(worst);
        if worst >= params.d_safe - SAFE_SLACK || outer == params.max_outer {
            break worst;
        }
        let problem = QpProblem::from_trajectory(model, &traj, &distances, params, c, &lower, &upper)?;
        let sol = solve_penalized_qp(&problem, params.inner_iterations, params.inner_tolerance);
        for (s, dq) in sol.displacements.iter().enumerate() {
            for (q, d) in traj.joints[s].iter_mut().zip(dq) {
                *q += d;
            }
        }
        outer += 1;
        c *= params.mu;
    };
    let status = if worst >= params.d_safe - SAFE_SLACK {
        GtoStatus::CollisionFree
    } else {
        GtoStatus::CollisionUnresolved
    };
    Ok(GtoResult {
        trajectory: traj,
        initial,
        status,
        outer_iterations: outer,
        penalty: c,
        worst_sd: worst,
        initial_worst_sd: initial_worst.unwrap_or(f64::INFINITY),
        trace,
        seconds: clock.elapsed().as_secs_f64(),
    })
}
