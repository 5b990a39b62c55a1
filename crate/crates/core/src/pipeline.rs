//! Plan, imagine and benchmark runs over scene files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::correspondence::ObjectIndex;
use crate::error::{Error, Result};
use crate::geometry::GroundPlane;
use crate::gto::{gto_optimize, GtoParams, GtoStatus};
use crate::hand::HandModel;
use crate::io::{SceneSpec, TrajectoryRecord, RESULTS_SCHEMA_VERSION};
use crate::mdisf::{plan_grasps, GraspCandidate, PlanReport};

pub struct LoadedScene {
    pub spec: SceneSpec,
    pub object: ObjectIndex,
    pub ground: Option<GroundPlane>,
}

impl LoadedScene {
    pub fn load(spec: SceneSpec) -> Result<Self> {
        let cloud = spec.load_cloud()?;
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let ground = spec.ground;
        Ok(Self { spec, object: ObjectIndex::new(cloud), ground })
    }

    pub fn plan(&self, model: &HandModel, config: &RunConfig) -> Result<PlanReport> {
        plan_grasps(model, &self.object, self.ground.as_ref(), config.seeds, &config.plan_params())
    }

    pub fn imagine(
        &self,
        model: &HandModel,
        candidates: &[GraspCandidate],
        top_k: usize,
        params: &GtoParams,
    ) -> Result<Vec<TrajectoryRecord>> {
        imagine(model, &self.object, self.ground.as_ref(), candidates, top_k, params)
    }
}

/// Trajectories for the `top_k` best ranked candidates, best first. Candidates
/// are optimized in parallel, each one single-threaded.
pub fn imagine(
    model: &HandModel,
    object: &ObjectIndex,
    ground: Option<&GroundPlane>,
    candidates: &[GraspCandidate],
    top_k: usize,
    params: &GtoParams,
) -> Result<Vec<TrajectoryRecord>> {
    let mut ranked: Vec<&GraspCandidate> = candidates.iter().filter(|c| c.rank.is_some()).collect();
    ranked.sort_by_key(|c| c.rank);
    ranked.truncate(top_k);
    ranked
        .par_iter()
        .map(|c| {
            let result = gto_optimize(model, &c.state, object, ground, params)?;
            Ok(TrajectoryRecord::new(c.seed_id, c.rank, &result))
        })
        .collect()
}

/// Scene files of a bench directory: every `*.toml` scene spec, plus every
/// `*.ply` that no spec in the directory names, sorted by file name.
pub fn scene_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut specs = Vec::new();
    let mut clouds = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("toml") => specs.push(path),
            Some("ply") => clouds.push(path),
            _ => {}
        }
    }
    let mut named = Vec::new();
    for s in &specs {
        named.push(std::fs::canonicalize(SceneSpec::load(s)?.cloud).ok());
    }
    let mut out = specs;
    for c in clouds {
        let canon = std::fs::canonicalize(&c).ok();
        if !named.iter().any(|n| n.is_some() && *n == canon) {
            out.push(c);
        }
    }
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()).then(a.cmp(b)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTiming {
    /// Mean planning time per seed (s).
    pub plan_per_grasp: f64,
    /// Mean trajectory optimization time per candidate (s).
    pub gto_per_grasp: Option<f64>,
}

/// One row of the benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub scene: String,
    pub points: usize,
    pub seeds: usize,
    pub collision_free: usize,
    pub failed: usize,
    pub force_closure: usize,
    pub mean_q_gsp: Option<f64>,
    pub best_q_gsp: Option<f64>,
    pub mean_fit_error: Option<f64>,
    pub gto_attempted: usize,
    pub gto_collision_free: usize,
    /// Colliding straight closings turned collision free.
    pub gto_repaired: usize,
    pub mean_gto_iterations: Option<f64>,
    /// Wall-clock times; only present when requested, since they vary between runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<SceneTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub rng_seed: u64,
    pub seeds: usize,
    pub top_k: usize,
    pub scenes: Vec<SceneRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn bench_scene(
    name: &str,
    scene: &LoadedScene,
    model: &HandModel,
    config: &RunConfig,
    timings: bool,
) -> Result<SceneRow> {
    let clock = Instant::now();
    let report = scene.plan(model, config)?;
    let plan_seconds = clock.elapsed().as_secs_f64();
    let records = scene.imagine(model, &report.candidates, config.top_k, &config.gto)?;
    let free: Vec<&GraspCandidate> = report.candidates.iter().filter(|c| c.collision_free).collect();
    let scores = || report.candidates.iter().filter_map(|c| c.quality.map(|q| q.q_gsp));
    Ok(SceneRow {
        scene: name.to_string(),
        points: scene.object.cloud.len(),
        seeds: report.num_seeds,
        collision_free: report.num_collision_free,
        failed: report.num_failed,
        force_closure: report.num_force_closure,
        mean_q_gsp: mean(scores()),
        best_q_gsp: scores().reduce(f64::max),
        mean_fit_error: mean(free.iter().map(|c| c.fit_error).filter(|e| e.is_finite())),
        gto_attempted: records.len(),
        gto_collision_free: records.iter().filter(|r| r.status == GtoStatus::CollisionFree).count(),
        gto_repaired: records.iter().filter(|r| r.repaired(config.gto.d_safe)).count(),
        mean_gto_iterations: mean(records.iter().map(|r| r.outer_iterations as f64)),
        timing: timings.then(|| SceneTiming {
            plan_per_grasp: plan_seconds / report.num_seeds.max(1) as f64,
            gto_per_grasp: mean(records.iter().map(|r| r.seconds)),
        }),
    })
}

/// Run the whole pipeline on every scene of `dir`.
pub fn run_bench(dir: &Path, model: &HandModel, config: &RunConfig, timings: bool) -> Result<BenchReport> {
    let mut scenes = Vec::new();
    for path in scene_files(dir)? {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let scene = LoadedScene::load(SceneSpec::load(&path)?)?;
        scenes.push(bench_scene(&name, &scene, model, config, timings)?);
    }
    Ok(BenchReport {
        schema_version: RESULTS_SCHEMA_VERSION,
        rng_seed: config.rng_seed,
        seeds: config.seeds,
        top_k: config.top_k,
        scenes,
    })
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

/// Fixed-width text table, one line per scene.
pub fn format_table(report: &BenchReport) -> String {
    let mut out = format!(
        "{:<16} {:>7} {:>9} {:>5} {:>9} {:>9} {:>9} {:>7} {:>8} {:>9} {:>9}\n",
        "scene", "points", "cf/total", "FC", "Q_gsp", "best", "fit_err", "GTO", "repaired", "plan_s", "gto_s"
    );
    for r in &report.scenes {
        let t = r.timing.as_ref();
        out += &format!(
            "{:<16} {:>7} {:>9} {:>5} {:>9} {:>9} {:>9} {:>7} {:>8} {:>9} {:>9}\n",
            r.scene,
            r.points,
            format!("{}/{}", r.collision_free, r.seeds),
            r.force_closure,
            cell(r.mean_q_gsp, 3),
            cell(r.best_q_gsp, 3),
            cell(r.mean_fit_error, 5),
            format!("{}/{}", r.gto_collision_free, r.gto_attempted),
            r.gto_repaired,
            cell(t.map(|t| t.plan_per_grasp), 3),
            cell(t.and_then(|t| t.gto_per_grasp), 3),
        );
    }
    out
}
