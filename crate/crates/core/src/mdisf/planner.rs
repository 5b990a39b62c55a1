use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seeding::{guided_sample, SeedParams};
use super::{mdisf, CandidateStatus, GraspCandidate, MdisfParams};
use crate::correspondence::ObjectIndex;
use crate::error::Result;
use crate::geometry::GroundPlane;
use crate::hand::HandModel;
use crate::quality::{contacts_of_state, evaluate_contacts, rank, QualityParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub mdisf: MdisfParams,
    pub seeding: SeedParams,
    pub quality: QualityParams,
    /// Seeds are drawn in this many rounds; each round is guided by all earlier candidates.
    pub rounds: usize,
    pub rng_seed: u64,
}

impl Default for PlanParams {
    fn default() -> Self {
        Self {
            mdisf: MdisfParams::default(),
            seeding: SeedParams::default(),
            quality: QualityParams::default(),
            rounds: 2,
            rng_seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    /// Ranked candidates first (best first), then the rest by seed id.
    pub candidates: Vec<GraspCandidate>,
    pub num_seeds: usize,
    pub num_failed: usize,
    pub num_collision_free: usize,
    pub num_force_closure: usize,
}

impl PlanReport {
    pub fn ranked(&self) -> impl Iterator<Item = &GraspCandidate> {
        self.candidates.iter().filter(|c| c.rank.is_some())
    }
}

/// Fit `n_seeds` guided seeds, score the collision-free results and rank them.
pub fn plan_grasps(
    model: &HandModel,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    n_seeds: usize,
    params: &PlanParams,
) -> Result<PlanReport> {
    params.quality.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let rounds = params.rounds.max(1);
    let per_round = n_seeds.div_ceil(rounds).max(1);
    let mut history: Vec<GraspCandidate> = Vec::with_capacity(n_seeds);
    while history.len() < n_seeds {
        let n = per_round.min(n_seeds - history.len());
        let seeds = guided_sample(model, &object.cloud, ground, &history, n, &params.seeding, &mut rng);
        let base = history.len();
        let batch: Vec<GraspCandidate> = seeds
            .par_iter()
            .enumerate()
            .map(|(i, s)| mdisf(s, base + i, model, object, ground, &params.mdisf))
            .collect::<Result<_>>()?;
        history.extend(batch);
    }
    history.par_iter_mut().filter(|c| c.collision_free).for_each(|c| {
        c.quality = contacts_of_state(model, &c.state, object, &params.quality)
            .ok()
            .map(|contacts| evaluate_contacts(&contacts, &params.quality));
    });
    let num_failed = history.iter().filter(|c| c.status == CandidateStatus::FailedNoContact).count();
    let num_collision_free = history.iter().filter(|c| c.collision_free).count();
    let num_force_closure = history.iter().filter(|c| c.quality.is_some_and(|q| q.q_in == 1)).count();
    Ok(PlanReport {
        candidates: rank(history),
        num_seeds: n_seeds,
        num_failed,
        num_collision_free,
        num_force_closure,
    })
}
