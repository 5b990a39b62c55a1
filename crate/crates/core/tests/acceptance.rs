//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the run;
//! every other failure exits non-zero.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use fitgrasp::config::RunConfig;
use fitgrasp::correspondence::{detect_hand_collisions, match_pairs, MatchParams, ObjectIndex};
use fitgrasp::geometry::ply::write_ply;
use fitgrasp::geometry::{GroundPlane, RigidTransform};
use fitgrasp::gto::{gto_optimize, pregrasp_pose, trajectory_distances, GtoParams, GtoStatus, SAFE_SLACK};
use fitgrasp::hand::{default_barrett_like_model, forward_kinematics, point_jacobian, sample_surface, HandModel, HandState};
use fitgrasp::io::{from_json, to_json, CandidatesFile, SceneSpec};
use fitgrasp::ipfo::{box_least_squares, ipfo, palm_optimize, ColTerm, ColTermKind, FitParams, FitTerm, Snapshot};
use fitgrasp::mdisf::{guided_sample, mdisf, plan_grasps, CandidateStatus, MdisfParams, PlanParams, PlanReport, SeedParams};
use fitgrasp::pipeline::{format_table, run_bench};
use fitgrasp::quality::{
    build_gws, contacts_of_state, evaluate_contacts, ferrari_canny_reference, object_frame, q_gsp, ContactSet,
    QualityParams,
};
use fitgrasp::scene::{kettle_handle_scene, synthesize, ShapeKind, SynthParams};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_FAILURES: &[usize] = &[8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() < 1.0 {
            return v.normalize();
        }
    }
}

fn vec3(rng: &mut ChaCha8Rng, s: f64) -> Vector3<f64> {
    Vector3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s))
}

fn random_state(model: &HandModel, rng: &mut ChaCha8Rng) -> HandState {
    let pose = RigidTransform::from_axis_angle(&vec3(rng, 3.0), vec3(rng, 1.0));
    HandState::new(pose, model.actuated.iter().map(|a| rng.gen_range(a.min..a.max)).collect())
}

fn ground() -> GroundPlane {
    GroundPlane::horizontal()
}

// 1. every accepted IPFO iteration is a descent step
fn ipfo_descent() -> Outcome {
    let clock = Instant::now();
    let model = default_barrett_like_model();
    let shapes = [ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Kettle, ShapeKind::Plate, ShapeKind::Blob];
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut scenes, mut steps, mut violations) = (0, 0, 0);
    while scenes < 200 {
        let mut sp = SynthParams::new(shapes[scenes % shapes.len()]);
        sp.size *= rng.gen_range(0.8..1.25);
        sp.density = 20_000.0;
        sp.noise = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.002) } else { 0.0 };
        sp.seed = rng.gen();
        let object = ObjectIndex::new(synthesize(&sp).unwrap());
        let seed = &guided_sample(&model, &object.cloud, Some(&ground()), &[], 1, &SeedParams::default(), &mut rng)[0];
        let surf = sample_surface(&model, &seed.state, None).unwrap();
        let fit = match_pairs(&surf.cloud, &object, &MatchParams::default());
        let kin = forward_kinematics(&model, &seed.state).unwrap();
        let col = detect_hand_collisions(&model, &kin, &object, Some(&ground()));
        let Ok(r) = ipfo(&model, &seed.state, &object.cloud, &fit, &col, Some(&ground()), &FitParams::default()) else {
            // too few rows for the palm step: no iteration is accepted
            continue;
        };
        scenes += 1;
        for s in &r.steps {
            steps += 1;
            violations += (s.after.total > s.before.total) as usize;
        }
        violations += r.trace.windows(2).filter(|w| w[1] > w[0]).count();
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(violations == 0 && secs < 120.0, format!("{scenes} scenes, {steps} iterations, {violations} violations, {secs:.1} s"))
}

fn random_snapshot(rng: &mut ChaCha8Rng) -> Snapshot {
    let dof = 4;
    let jac = |rng: &mut ChaCha8Rng| Matrix3xX::from_fn(dof, |_, _| rng.gen_range(-0.1..0.1));
    let fit = (0..rng.gen_range(3..40))
        .map(|_| FitTerm { p: vec3(rng, 0.1), n_p: unit(rng), q: vec3(rng, 0.1), n_q: unit(rng), weight: rng.gen_range(0.1..1.0), jac: jac(rng) })
        .collect();
    let mut col = Vec::new();
    for _ in 0..rng.gen_range(0..5) {
        col.push(ColTerm { kind: ColTermKind::Object, p: vec3(rng, 0.1), q: vec3(rng, 0.1), n: unit(rng), jac: jac(rng) });
    }
    for _ in 0..rng.gen_range(0..5) {
        col.push(ColTerm { kind: ColTermKind::Ground, p: vec3(rng, 0.1), q: Vector3::zeros(), n: Vector3::z(), jac: jac(rng) });
    }
    Snapshot { dof, fit, col }
}

/// Full-column-rank least squares by Householder QR.
fn qr_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let qr = a.clone().qr();
    qr.r().solve_upper_triangular(&(qr.q().transpose() * b)).expect("full column rank")
}

/// Residuals of the error under the small-rotation model `p + r x p + t`.
fn linearized_residuals(snap: &Snapshot, params: &FitParams, x: &Vector6<f64>) -> Vec<f64> {
    let r = Vector3::new(x[0], x[1], x[2]);
    let t = Vector3::new(x[3], x[4], x[5]);
    let mv = |p: &Vector3<f64>| p + r.cross(p) + t;
    let mut out = Vec::new();
    for f in &snap.fit {
        let s = f.weight.sqrt();
        out.push(s * (mv(&f.p) - f.q).dot(&f.n_q));
        out.push(s * params.alpha * ((f.n_p + r.cross(&f.n_p)).dot(&f.n_q) + 1.0));
    }
    for c in &snap.col {
        let d = mv(&c.p) - c.q;
        match c.kind {
            ColTermKind::Object => out.extend(d.iter().map(|v| params.w * v)),
            ColTermKind::Ground => out.push(params.w * d.dot(&c.n)),
        }
    }
    out
}

// 2. palm step against a dense least-squares solve of the linearized error
fn palm_step() -> Outcome {
    let params = FitParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let snap = random_snapshot(&mut rng);
        let r0 = linearized_residuals(&snap, &params, &Vector6::zeros());
        let m = r0.len();
        let a = DMatrix::from_fn(m, 6, |i, j| linearized_residuals(&snap, &params, &Vector6::ith(j, 1.0))[i] - r0[i]);
        let oracle = qr_solve(&a, &-DVector::from_vec(r0));
        let x = palm_optimize(&snap, &params).unwrap().x;
        worst = worst.max((DVector::from_column_slice(x.as_slice()) - &oracle).norm() / oracle.norm().max(1e-12));
    }
    outcome(worst <= 1e-8, format!("1000 instances, worst relative error {worst:.2e}"))
}

/// Exact box-constrained least squares over all lower/upper/free assignments.
fn enumerate_box_ls(c: &DMatrix<f64>, d: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    let n = c.ncols();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut x = DVector::zeros(n);
        let mut free = Vec::new();
        let mut k = code;
        for i in 0..n {
            match k % 3 {
                0 => x[i] = lo[i],
                1 => x[i] = hi[i],
                _ => free.push(i),
            }
            k /= 3;
        }
        if !free.is_empty() {
            let cf = DMatrix::from_fn(c.nrows(), free.len(), |r, j| c[(r, free[j])]);
            let sol = qr_solve(&cf, &(d - c * &x));
            for (j, &i) in free.iter().enumerate() {
                x[i] = sol[j];
            }
        }
        if (0..n).all(|i| x[i] >= lo[i] - 1e-12 && x[i] <= hi[i] + 1e-12) {
            best = best.min((c * &x - d).norm_squared());
        }
    }
    best
}

// 3. finger step against the enumerated constrained optimum
fn finger_step() -> Outcome {
    let params = FitParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst, mut outside): (f64, usize) = (0.0, 0);
    for _ in 0..500 {
        let rows = rng.gen_range(4..30);
        let c = DMatrix::from_fn(rows, 4, |_, _| rng.gen_range(-1.0..1.0));
        let d = DVector::from_fn(rows, |_, _| rng.gen_range(-1.0..1.0));
        let (c, d) = (&c / c.norm(), &d / d.norm());
        let lo = DVector::from_fn(4, |_, _| -rng.gen_range(0.0..0.5));
        let hi = DVector::from_fn(4, |_, _| rng.gen_range(0.0..0.5));
        let r = box_least_squares(&c, &d, &lo, &hi, params.finger_iterations, params.finger_tolerance);
        outside += (0..4).filter(|&i| r.x[i] < lo[i] || r.x[i] > hi[i]).count();
        worst = worst.max((r.objective - enumerate_box_ls(&c, &d, &lo, &hi)).abs());
    }
    outcome(worst <= 1e-4 && outside == 0, format!("500 problems, worst objective gap {worst:.2e}, {outside} bound violations"))
}

// 4. point Jacobians against central differences
fn jacobians() -> Outcome {
    let model = default_barrett_like_model();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let state = random_state(&model, &mut rng);
        let kin = |q: &[f64]| forward_kinematics(&model, &HandState::new(state.palm_pose, q.to_vec()));
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for j in 0..model.dof() {
            let mut qp = state.q.clone();
            let mut qm = state.q.clone();
            qp[j] += h;
            qm[j] -= h;
            // stay inside the limits
            let a = &model.actuated[j];
            let shift = (qp[j] - a.max).max(0.0) - (a.min - qm[j]).max(0.0);
            qp[j] -= shift;
            qm[j] -= shift;
            plus.push(kin(&qp).unwrap());
            minus.push(kin(&qm).unwrap());
        }
        for i in 0..model.num_samples() {
            // palm-frame Jacobian against differences of world points rotated into the palm frame
            let jac = point_jacobian(&model, &state, i).unwrap();
            let world = Matrix3xX::from_fn(model.dof(), |r, j| (plus[j].sample_world(&model, i).0[r] - minus[j].sample_world(&model, i).0[r]) / (2.0 * h));
            let fd = state.palm_pose.rotation.transpose() * world;
            worst = worst.max((&jac - fd).norm() / jac.norm().max(1e-3));
        }
    }
    outcome(worst < 1e-4, format!("{} samples x 100 states, worst relative error {worst:.2e}", model.num_samples()))
}

// 5. fitting and collision error reduction on the blob
fn mdisf_reduction() -> Outcome {
    let model = default_barrett_like_model();
    let object = ObjectIndex::new(synthesize(&SynthParams::new(ShapeKind::Blob)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let seeds = guided_sample(&model, &object.cloud, Some(&ground()), &[], 50, &SeedParams::default(), &mut rng);
    let clock = Instant::now();
    let cands: Vec<_> = seeds
        .iter()
        .enumerate()
        .map(|(i, s)| mdisf(s, i, &model, &object, Some(&ground()), &MdisfParams::default()).unwrap())
        .collect();
    let per_seed = clock.elapsed().as_secs_f64() / seeds.len() as f64;
    let conv: Vec<_> = cands.iter().filter(|c| c.status == CandidateStatus::Converged).collect();
    let n = conv.len() as f64;
    let fit0 = conv.iter().map(|c| c.initial_fit_error).sum::<f64>() / n;
    let fit1 = conv.iter().map(|c| c.fit_error).sum::<f64>() / n;
    let col0 = conv.iter().map(|c| c.initial_col_error.abs()).sum::<f64>() / n;
    let col1 = conv.iter().map(|c| c.col_error.abs()).sum::<f64>() / n;
    let (fr, cr) = (fit1 / fit0, col1 / col0);
    outcome(
        fr <= 0.45 && cr <= 0.15 && per_seed <= 2.0,
        format!("{} of 50 converged, fit ratio {fr:.3}, collision ratio {cr:.3}, {per_seed:.2} s/seed", conv.len()),
    )
}

struct PlannerRuns {
    /// (shape, rng seed, report) with 10 seeds each.
    runs: Vec<(ShapeKind, u64, PlanReport)>,
    objects: Vec<(ShapeKind, ObjectIndex)>,
}

fn planner_runs() -> &'static PlannerRuns {
    static RUNS: OnceLock<PlannerRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let model = default_barrett_like_model();
        let shapes = [ShapeKind::Sphere, ShapeKind::Cylinder, ShapeKind::Box];
        let objects: Vec<_> = shapes.iter().map(|&s| (s, ObjectIndex::new(synthesize(&SynthParams::new(s)).unwrap()))).collect();
        let mut runs = Vec::new();
        for rng_seed in 0..8u64 {
            for (shape, object) in &objects {
                let params = PlanParams { rng_seed, ..PlanParams::default() };
                runs.push((*shape, rng_seed, plan_grasps(&model, object, Some(&ground()), 10, &params).unwrap()));
            }
        }
        PlannerRuns { runs, objects }
    })
}

// 6. collision-free yield per scene
fn yield_per_scene() -> Outcome {
    let runs = planner_runs();
    let default_seed = PlanParams::default().rng_seed;
    let picked: Vec<_> = runs.runs.iter().filter(|(_, s, _)| *s == default_seed).collect();
    let counts: Vec<String> = picked.iter().map(|(shape, _, r)| format!("{shape} {}/10", r.num_collision_free)).collect();
    let pass = picked.len() == 3 && picked.iter().all(|(_, _, r)| r.num_collision_free >= 3);
    outcome(pass, counts.join(", "))
}

/// Force closure: the origin is a strictly positive combination of the
/// primitive wrenches and they span six dimensions.
fn lp_force_closure(w: &[Vector6<f64>]) -> bool {
    let m = DMatrix::from_fn(6, w.len(), |r, c| w[c][r]);
    if w.is_empty() || m.rank(1e-9) < 6 {
        return false;
    }
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let s = p.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    let lam: Vec<_> = (0..w.len()).map(|_| p.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for r in 0..6 {
        let row: Vec<_> = lam.iter().enumerate().map(|(c, v)| (*v, w[c][r])).collect();
        p.add_constraint(row.as_slice(), ComparisonOp::Eq, 0.0);
    }
    let sum: Vec<_> = lam.iter().map(|v| (*v, 1.0)).collect();
    p.add_constraint(sum.as_slice(), ComparisonOp::Eq, 1.0);
    for v in &lam {
        p.add_constraint(&[(*v, 1.0), (s, -1.0)], ComparisonOp::Ge, 0.0);
    }
    p.solve().map(|sol| sol.objective() > 1e-7).unwrap_or(false)
}

// 7. force closure among collision-free grasps, pooled over RNG seeds
fn force_closure() -> Outcome {
    let model = default_barrett_like_model();
    let runs = planner_runs();
    let qp = QualityParams::default();
    let (mut free, mut closed) = (0, 0);
    for (shape, _, report) in &runs.runs {
        let object = &runs.objects.iter().find(|(s, _)| s == shape).unwrap().1;
        for c in report.candidates.iter().filter(|c| c.collision_free) {
            free += 1;
            if let Ok(contacts) = contacts_of_state(&model, &c.state, object, &qp) {
                closed += lp_force_closure(&build_gws(&contacts, qp.friction, qp.cone_facets, qp.torsion).primitives) as usize;
            }
        }
    }
    let share = closed as f64 / free.max(1) as f64;
    outcome(free > 0 && share >= 0.8, format!("{closed}/{free} = {:.1}% over 8 RNG seeds x 3 shapes x 10 seeds", 100.0 * share))
}

fn random_contact_set(cloud: &fitgrasp::geometry::PointCloud, rng: &mut ChaCha8Rng) -> ContactSet {
    let (center, radius) = object_frame(cloud);
    let k = rng.gen_range(3..=4);
    let idx: Vec<usize> = (0..k).map(|_| rng.gen_range(0..cloud.len())).collect();
    ContactSet::new(
        idx.iter().map(|&i| *cloud.point(i)).collect(),
        idx.iter().map(|&i| -cloud.normal(i)).collect(),
        center,
        radius,
    )
    .unwrap()
}

// 8. Q_gsp ranking against the Ferrari-Canny metric
fn ranking_fidelity() -> Outcome {
    let qp = QualityParams::default();
    let clouds: Vec<_> = [ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::Sphere, ShapeKind::Blob]
        .iter()
        .map(|&s| synthesize(&SynthParams::new(s)).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (mut top1, mut top3) = (0, 0);
    let (mut t_gsp, mut t_fc) = (0.0, 0.0);
    for set in 0..50 {
        let cloud = &clouds[set % clouds.len()];
        let mut scored = Vec::new();
        for _ in 0..20 {
            let contacts = random_contact_set(cloud, &mut rng);
            let clock = Instant::now();
            let q = evaluate_contacts(&contacts, &qp).q_gsp;
            t_gsp += clock.elapsed().as_secs_f64();
            let clock = Instant::now();
            let fc = ferrari_canny_reference(&contacts, &qp);
            t_fc += clock.elapsed().as_secs_f64();
            scored.push((q, fc));
        }
        let best_fc = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
        top1 += (scored[order[0]].1 == best_fc) as usize;
        top3 += order[..3].iter().any(|&i| scored[i].1 == best_fc) as usize;
    }
    let speedup = t_fc / t_gsp;
    outcome(
        top1 >= 30 && top3 as f64 >= 0.85 * 50.0 && speedup >= 10.0,
        format!("top-1 {top1}/50, top-3 {top3}/50, Q_gsp {speedup:.1}x faster than Ferrari-Canny"),
    )
}

// 9. trajectory repair on the kettle handle
fn gto_repair() -> Outcome {
    let model = default_barrett_like_model();
    let scene = kettle_handle_scene().unwrap();
    let object = ObjectIndex::new(scene.cloud);
    let params = GtoParams::default();
    let r = gto_optimize(&model, &scene.grasp, &object, Some(&scene.ground), &params).unwrap();
    let interior_min = |t: &fitgrasp::gto::Trajectory| {
        let d = trajectory_distances(&model, t, &object, Some(&scene.ground), params.d_check).unwrap();
        d[1..d.len() - 1].iter().map(|s| s.min()).fold(f64::INFINITY, f64::min)
    };
    let before = interior_min(&r.initial);
    let after = interior_min(&r.trajectory);
    let start = pregrasp_pose(&model, &scene.grasp);
    let n = r.trajectory.len();
    let endpoints = r.trajectory.joints[0] == start.q
        && r.trajectory.joints[n - 1] == scene.grasp.q
        && r.trajectory.palm_poses[0] == start.palm_pose
        && r.trajectory.palm_poses[n - 1] == scene.grasp.palm_pose;
    let excess = r.trajectory.step_excess(&params.step_bound);
    let pass = before < 0.0
        && after >= params.d_safe - SAFE_SLACK
        && r.status == GtoStatus::CollisionFree
        && endpoints
        && excess <= 1e-12
        && r.outer_iterations <= 20
        && r.seconds <= 2.0;
    outcome(
        pass,
        format!(
            "sd {before:.4} -> {after:.4} m, {} iterations, endpoints fixed: {endpoints}, step excess {excess:.1e}, {:.2} s",
            r.outer_iterations, r.seconds
        ),
    )
}

// 10. Q_gsp recomputed from stored features; coefficients from the frozen config
fn qgsp_exactness() -> Outcome {
    let frozen = RunConfig::from_toml(include_str!("fixtures/default_config.toml")).unwrap();
    let c = frozen.quality.coefficients;
    let coefficients_ok = (c.volume, c.condition, c.inclusion) == (1.0, 3.0, 11.0) && c == QualityParams::default().coefficients;
    let (mut checked, mut mismatched) = (0, 0);
    for (_, seed, report) in &planner_runs().runs {
        let text = to_json(&CandidatesFile::new(SceneSpec::from_cloud("scene.ply"), *seed, report.clone())).unwrap();
        let stored: CandidatesFile = from_json(&text).unwrap();
        for q in stored.report.candidates.iter().filter_map(|c| c.quality) {
            checked += 1;
            mismatched += (q_gsp(q.q_vol, q.q_cond, q.q_in, &c).to_bits() != q.q_gsp.to_bits()) as usize;
        }
    }
    outcome(
        coefficients_ok && checked > 0 && mismatched == 0,
        format!("{checked} grasps, {mismatched} mismatches, coefficients ({}, {}, {})", c.volume, c.condition, c.inclusion),
    )
}

// 11. bench reruns give identical reports
fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("fitgrasp-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    for shape in [ShapeKind::Sphere, ShapeKind::Box] {
        write_ply(dir.join(format!("{shape}.ply")), &synthesize(&SynthParams::new(shape)).unwrap()).unwrap();
    }
    let model = default_barrett_like_model();
    let config = RunConfig { seeds: 6, top_k: 2, ..RunConfig::default() };
    let a = run_bench(&dir, &model, &config, false).unwrap();
    let b = run_bench(&dir, &model, &config, false).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    let (ja, jb) = (to_json(&a).unwrap(), to_json(&b).unwrap());
    let same = ja == jb && format_table(&a) == format_table(&b);
    outcome(same && a.scenes.len() == 2, format!("{} scenes, {} report bytes, identical: {same}", a.scenes.len(), ja.len()))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "IPFO descent", ipfo_descent),
        (2, "palm step oracle", palm_step),
        (3, "finger step oracle", finger_step),
        (4, "Jacobian finite differences", jacobians),
        (5, "MDISF error reduction", mdisf_reduction),
        (6, "collision-free yield", yield_per_scene),
        (7, "force-closure prevalence", force_closure),
        (8, "quality ranking fidelity", ranking_fidelity),
        (9, "GTO repair", gto_repair),
        (10, "Q_gsp exactness", qgsp_exactness),
        (11, "bench determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let clock = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let known = KNOWN_FAILURES.contains(&id);
        let verdict = match (result.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {name:<28} {verdict:<12} {} [{:.1} s]", result.detail, clock.elapsed().as_secs_f64());
        if !result.pass && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
