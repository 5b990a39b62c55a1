//! `fitgrasp`: plan grasps on point clouds, rank them and plan finger trajectories.
//!
//! Exit codes: 0 on success, 1 on any error, 2 when a run produced nothing
//! usable (no collision-free grasp, no collision-free trajectory).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fitgrasp::config::{RunConfig, CONFIG_ENV};
use fitgrasp::geometry::ply::write_ply;
use fitgrasp::geometry::PointCloud;
use fitgrasp::hand::{forward_kinematics, GraspMode, HandModel};
use fitgrasp::io::{read_json, write_json, CandidatesFile, SceneSpec, TrajectoriesFile};
use fitgrasp::pipeline::{format_table, run_bench, LoadedScene};
use fitgrasp::quality::{q_gsp, rank};
use fitgrasp::scene::{synthesize, ShapeKind, SynthParams};
use fitgrasp::Result;

#[derive(Parser)]
#[command(name = "fitgrasp", version, about = "Grasp planning on point clouds by fitting a hand model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Run configuration: a TOML file plus per-field overrides.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, env = CONFIG_ENV, global = true)]
    config: Option<PathBuf>,
    /// Number of seeds per scene.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    #[arg(long, global = true)]
    rng_seed: Option<u64>,
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// Candidates passed to trajectory optimization.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    /// power, precision or uniform.
    #[arg(long, global = true)]
    mode: Option<GraspMode>,
    /// Hand model TOML.
    #[arg(long, global = true)]
    hand: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<(RunConfig, HandModel)> {
        let mut c = RunConfig::resolve(self.config.as_deref())?;
        if let Some(v) = self.seeds {
            c.seeds = v;
        }
        if let Some(v) = self.rng_seed {
            c.rng_seed = v;
        }
        if let Some(v) = self.rounds {
            c.rounds = v;
        }
        if let Some(v) = self.top_k {
            c.top_k = v;
        }
        if let Some(v) = self.mode {
            c.mode = v;
        }
        if let Some(v) = &self.hand {
            c.hand = Some(v.clone());
        }
        let model = c.hand_model()?;
        c.validate(&model)?;
        Ok((c, model))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit seeds on a scene and write every candidate, ranked.
    Plan {
        /// Scene TOML or a PLY cloud resting on z = 0.
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Write the posed hand samples of every ranked candidate here as PLY.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Re-rank a candidates file with the configured quality coefficients.
    Rank {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Plan finger trajectories for the best ranked candidates.
    Imagine {
        #[arg(long)]
        candidates: PathBuf,
        /// Scene to use instead of the one recorded in the candidates file.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a synthetic object cloud as PLY.
    Synth {
        /// sphere, box, cylinder, kettle, plate or blob.
        #[arg(long)]
        shape: ShapeKind,
        /// Characteristic size (m); the shape's default when absent.
        #[arg(long)]
        size: Option<f64>,
        /// Points per square meter.
        #[arg(long, default_value_t = 40_000.0)]
        density: f64,
        /// Gaussian position noise sigma (m).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Keep only points visible from this position, as `x,y,z`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        view: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run plan and imagine on every scene of a directory and report per-scene statistics.
    Bench {
        #[arg(long)]
        scenes: PathBuf,
        /// JSON report; the table always goes to stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Include wall-clock times in the report (makes it run dependent).
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn dump_hands(dir: &Path, model: &HandModel, file: &CandidatesFile) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for c in file.report.ranked() {
        let kin = forward_kinematics(model, &c.state)?;
        let (points, normals) = (0..model.num_samples()).map(|i| kin.sample_world(model, i)).unzip();
        let name = format!("rank{:03}_seed{:03}.ply", c.rank.unwrap_or_default(), c.seed_id);
        write_ply(dir.join(name), &PointCloud::new(points, normals)?)?;
    }
    Ok(())
}

fn plan(scene: &Path, out: &Path, dump: Option<&Path>, config: &ConfigArgs) -> Result<u8> {
    let (config, model) = config.load()?;
    let scene = LoadedScene::load(SceneSpec::load(scene)?)?;
    let report = scene.plan(&model, &config)?;
    eprintln!(
        "{} seeds: {} collision free, {} force closure, {} failed",
        report.num_seeds, report.num_collision_free, report.num_force_closure, report.num_failed
    );
    let free = report.num_collision_free;
    let file = CandidatesFile::new(scene.spec, config.rng_seed, report);
    write_json(out, &file)?;
    if let Some(dir) = dump {
        dump_hands(dir, &model, &file)?;
    }
    Ok(if free > 0 { 0 } else { 2 })
}

fn rerank(candidates: &Path, out: &Path, config: &ConfigArgs) -> Result<u8> {
    let (config, _) = config.load()?;
    let mut file: CandidatesFile = read_json(candidates)?;
    let coefficients = &config.quality.coefficients;
    let mut list = std::mem::take(&mut file.report.candidates);
    for c in &mut list {
        if let Some(q) = &mut c.quality {
            q.q_gsp = q_gsp(q.q_vol, q.q_cond, q.q_in, coefficients);
        }
    }
    file.report.candidates = rank(list);
    for c in file.report.ranked().take(config.top_k) {
        let q = c.quality.expect("ranked candidates carry quality");
        println!("rank {:>3}  seed {:>3}  Q_gsp {:>9.4}  fit {:.5}", c.rank.unwrap_or_default(), c.seed_id, q.q_gsp, c.fit_error);
    }
    let any = file.report.ranked().next().is_some();
    write_json(out, &file)?;
    Ok(if any { 0 } else { 2 })
}

fn imagine(candidates: &Path, scene: Option<&Path>, out: &Path, config: &ConfigArgs) -> Result<u8> {
    let (config, model) = config.load()?;
    let file: CandidatesFile = read_json(candidates)?;
    let spec = match scene {
        Some(p) => SceneSpec::load(p)?,
        None => file.scene.clone(),
    };
    let scene = LoadedScene::load(spec)?;
    let records = scene.imagine(&model, &file.report.candidates, config.top_k, &config.gto)?;
    for r in &records {
        eprintln!(
            "seed {:>3}: {:?} after {} iterations, sd {:.4} -> {:.4}",
            r.seed_id, r.status, r.outer_iterations, r.initial_worst_sd, r.worst_sd
        );
    }
    let d_safe = config.gto.d_safe;
    let any = records.iter().any(|r| r.status == fitgrasp::gto::GtoStatus::CollisionFree);
    write_json(out, &TrajectoriesFile::new(scene.spec, config.top_k, d_safe, records))?;
    Ok(if any { 0 } else { 2 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Plan { scene, out, dump, config } => plan(&scene, &out, dump.as_deref(), &config),
        Command::Rank { candidates, out, config } => rerank(&candidates, &out, &config),
        Command::Imagine { candidates, scene, out, config } => imagine(&candidates, scene.as_deref(), &out, &config),
        Command::Synth { shape, size, density, noise, view, seed, out } => {
            let mut params = SynthParams::new(shape);
            if let Some(s) = size {
                params.size = s;
            }
            params.density = density;
            params.noise = noise;
            params.viewpoint = match view.as_deref() {
                None => None,
                Some(&[x, y, z]) => Some([x, y, z]),
                Some(v) => return Err(fitgrasp::Error::Config(format!("--view needs x,y,z, got {} values", v.len()))),
            };
            params.seed = seed;
            let cloud = synthesize(&params)?;
            write_ply(&out, &cloud)?;
            eprintln!("{} points written to {}", cloud.len(), out.display());
            Ok(0)
        }
        Command::Bench { scenes, out, timings, config } => {
            let (config, model) = config.load()?;
            let report = run_bench(&scenes, &model, &config, timings)?;
            print!("{}", format_table(&report));
            if let Some(out) = out {
                write_json(out, &report)?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
