//! Penalized surface fitting under a fixed correspondence: closed-form palm
//! steps alternating with box-constrained finger steps.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Matrix6, RowVector6, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::correspondence::{box_face_anchor, ground_anchor, CollisionKind, CollisionPair, FitPair};
use crate::error::{Error, Result};
use crate::geometry::{hat, rotation_from_axis_angle, GroundPlane, PointCloud, RigidTransform};
use crate::hand::{forward_kinematics_unchecked, HandModel, HandState, Kinematics};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitParams {
    /// Scale of the normal-alignment term.
    pub alpha: f64,
    /// Collision penalty weight.
    pub w: f64,
    /// Minimum error decrease per accepted iteration.
    pub delta: f64,
    pub t_max: usize,
    /// Projected-gradient iteration cap of the finger step.
    pub finger_iterations: usize,
    pub finger_tolerance: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            alpha: 0.03,
            w: 10.0,
            delta: 1e-5,
            t_max: 20,
            finger_iterations: 200,
            finger_tolerance: 1e-8,
        }
    }
}

impl FitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.w >= 0.0 && self.delta > 0.0 && self.t_max >= 1 && self.finger_tolerance > 0.0) {
            return Err(Error::Config(format!("invalid fit parameters {self:?}")));
        }
        Ok(())
    }
}

/// One fitting pair, linearized at the current hand state (world frame).
#[derive(Clone, Debug)]
pub struct FitTerm {
    pub p: Vector3<f64>,
    pub n_p: Vector3<f64>,
    pub q: Vector3<f64>,
    pub n_q: Vector3<f64>,
    pub weight: f64,
    pub jac: Matrix3xX<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColTermKind {
    Object,
    Ground,
}

/// One collision pair, linearized at the current hand state. For ground
/// terms `q` is the ground point and `n` the ground normal.
#[derive(Clone, Debug)]
pub struct ColTerm {
    pub kind: ColTermKind,
    pub p: Vector3<f64>,
    pub q: Vector3<f64>,
    pub n: Vector3<f64>,
    pub jac: Matrix3xX<f64>,
}

/// Fitting and collision terms sampled at one hand state.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub dof: usize,
    pub fit: Vec<FitTerm>,
    pub col: Vec<ColTerm>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    /// Weighted fitting error including the normal-alignment term.
    pub fit: f64,
    /// Collision error without the penalty weight.
    pub col: f64,
    /// `fit + w^2 col`.
    pub total: f64,
}

impl Snapshot {
    /// Sample every pair at the hand state `kin`. Object collision anchors are
    /// re-projected onto their box face; ground anchors follow their sample.
    pub fn sample(
        model: &HandModel,
        kin: &Kinematics,
        object: &PointCloud,
        fit: &[FitPair],
        collisions: &[CollisionPair],
        ground: Option<&GroundPlane>,
    ) -> Self {
        let fit = fit
            .iter()
            .map(|f| {
                let (p, n_p) = kin.sample_world(model, f.sample);
                FitTerm {
                    p,
                    n_p,
                    q: *object.point(f.object),
                    n_q: *object.normal(f.object),
                    weight: f.weight,
                    jac: kin.world_point_jacobian(model, model.samples[f.sample].link, &p),
                }
            })
            .collect();
        let col = collisions
            .iter()
            .filter_map(|c| {
                let bx = &model.links[c.link].bbox;
                let (kind, p, q, n) = match c.kind {
                    CollisionKind::Object { object: j } => {
                        let q = *object.point(j);
                        let (p, _) = box_face_anchor(bx, &kin.link_poses[c.link], &q, c.side);
                        (ColTermKind::Object, p, q, *object.normal(j))
                    }
                    CollisionKind::Ground { sample } => {
                        let g = ground?;
                        let (ps, ns) = kin.sample_world(model, sample);
                        let (p, _) = ground_anchor(bx, &ps, &ns, c.side);
                        (ColTermKind::Ground, p, g.point, g.normal)
                    }
                };
                Some(ColTerm {
                    kind,
                    p,
                    q,
                    n,
                    jac: kin.world_point_jacobian(model, c.link, &p),
                })
            })
            .collect();
        Self { dof: model.dof(), fit, col }
    }

    pub fn palm_rows(&self) -> usize {
        2 * self.fit.len() + self.col.iter().map(|c| if c.kind == ColTermKind::Object { 3 } else { 1 }).sum::<usize>()
    }
}

/// Overall error with the palm increment `(R, t)` and finger displacement `dq`
/// applied through the linearized point model `R p + t + R J dq`.
pub fn fitting_error(
    snap: &Snapshot,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    dq: &DVector<f64>,
    params: &FitParams,
) -> ErrorBreakdown {
    let moved = |p: &Vector3<f64>, jac: &Matrix3xX<f64>| rotation * (p + jac * dq) + translation;
    let mut fit = 0.0;
    for f in &snap.fit {
        let point = (moved(&f.p, &f.jac) - f.q).dot(&f.n_q);
        let normal = (rotation * f.n_p).dot(&f.n_q) + 1.0;
        fit += f.weight * (point * point + params.alpha * params.alpha * normal * normal);
    }
    let mut col = 0.0;
    for c in &snap.col {
        let r = moved(&c.p, &c.jac) - c.q;
        col += match c.kind {
            ColTermKind::Object => r.norm_squared(),
            ColTermKind::Ground => r.dot(&c.n).powi(2),
        };
    }
    ErrorBreakdown {
        fit,
        col,
        total: fit + params.w * params.w * col,
    }
}

/// Rows of the palm least-squares system `min |A x - b|`, `x = (r, t)`.
fn palm_rows(snap: &Snapshot, params: &FitParams, mut emit: impl FnMut(RowVector6<f64>, f64)) {
    let row = |a: Vector3<f64>, b: Vector3<f64>| RowVector6::new(a.x, a.y, a.z, b.x, b.y, b.z);
    for f in &snap.fit {
        let s = f.weight.sqrt();
        emit(row(f.p.cross(&f.n_q), f.n_q) * s, -(f.p - f.q).dot(&f.n_q) * s);
        emit(
            row(f.n_p.cross(&f.n_q) * params.alpha, Vector3::zeros()) * s,
            -params.alpha * (f.n_p.dot(&f.n_q) + 1.0) * s,
        );
    }
    let w = params.w;
    for c in &snap.col {
        match c.kind {
            ColTermKind::Object => {
                let h = -hat(&c.p);
                for k in 0..3 {
                    let mut e = Vector3::zeros();
                    e[k] = 1.0;
                    emit(row(h.row(k).transpose(), e) * w, -w * (c.p[k] - c.q[k]));
                }
            }
            ColTermKind::Ground => emit(row(c.p.cross(&c.n), c.n) * w, -w * (c.p - c.q).dot(&c.n)),
        }
    }
}

/// Dense `(A, b)` of the palm step.
pub fn palm_system(snap: &Snapshot, params: &FitParams) -> (DMatrix<f64>, DVector<f64>) {
    let n = snap.palm_rows();
    let mut a = DMatrix::zeros(n, 6);
    let mut b = DVector::zeros(n);
    let mut i = 0;
    palm_rows(snap, params, |r, v| {
        a.set_row(i, &r);
        b[i] = v;
        i += 1;
    });
    (a, b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PalmStep {
    /// `(r, t)` stacked.
    pub x: Vector6<f64>,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// `A^T A` was rank deficient and a ridge term was added.
    pub degenerate: bool,
}

/// Solve the normal equations `A^T A x = A^T b` for a 6-row-or-taller system.
pub fn solve_palm_normal_equations(ata: &Matrix6<f64>, atb: &Vector6<f64>) -> (Vector6<f64>, bool) {
    let eig = SymmetricEigen::new(*ata);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let degenerate = !(max > 0.0) || min <= 1e-12 * max;
    let m = if degenerate {
        let lambda = (1e-9 * ata.trace()).max(f64::MIN_POSITIVE);
        ata + Matrix6::identity() * lambda
    } else {
        *ata
    };
    let x = match m.cholesky() {
        Some(ch) => ch.solve(atb),
        None => Vector6::zeros(),
    };
    (x, degenerate)
}

/// Closed-form palm increment under the small-angle model, mapped back to
/// SO(3) through the exact exponential.
pub fn palm_optimize(snap: &Snapshot, params: &FitParams) -> Result<PalmStep> {
    let rows = snap.palm_rows();
    if rows < 6 {
        return Err(Error::Underdetermined { rows });
    }
    let mut ata = Matrix6::zeros();
    let mut atb = Vector6::zeros();
    palm_rows(snap, params, |r, v| {
        ata += r.transpose() * r;
        atb += r.transpose() * v;
    });
    let (x, degenerate) = solve_palm_normal_equations(&ata, &atb);
    Ok(PalmStep {
        x,
        rotation: rotation_from_axis_angle(&x.fixed_rows::<3>(0).into_owned()),
        translation: x.fixed_rows::<3>(3).into_owned(),
        degenerate,
    })
}

/// Dense `(C, d)` of the finger step for a fixed palm increment.
pub fn finger_system(
    snap: &Snapshot,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    params: &FitParams,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = snap.fit.len()
        + snap.col.iter().map(|c| if c.kind == ColTermKind::Object { 3 } else { 1 }).sum::<usize>();
    let mut c_mat = DMatrix::zeros(n, snap.dof);
    let mut d = DVector::zeros(n);
    let mut i = 0;
    for f in &snap.fit {
        let s = f.weight.sqrt();
        let rn = rotation.transpose() * f.n_q;
        c_mat.set_row(i, &((rn.transpose() * &f.jac) * s));
        d[i] = -(rotation * f.p + translation - f.q).dot(&f.n_q) * s;
        i += 1;
    }
    let w = params.w;
    for c in &snap.col {
        let moved = rotation * c.p + translation - c.q;
        match c.kind {
            ColTermKind::Object => {
                let rj = rotation * &c.jac * w;
                for k in 0..3 {
                    c_mat.set_row(i, &rj.row(k));
                    d[i] = -w * moved[k];
                    i += 1;
                }
            }
            ColTermKind::Ground => {
                let rn = rotation.transpose() * c.n;
                c_mat.set_row(i, &((rn.transpose() * &c.jac) * w));
                d[i] = -w * moved.dot(&c.n);
                i += 1;
            }
        }
    }
    (c_mat, d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxLsResult {
    pub x: DVector<f64>,
    /// `|C x - d|^2` at the solution.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after initialization and after every gradient step and clamp.
    pub trace: Vec<f64>,
}

fn clamp_into(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    x.zip_zip_map(lo, hi, |v, l, h| v.max(l).min(h))
}

/// `min |C x - d|^2` subject to `lo <= x <= hi` (with `lo <= 0 <= hi`), by
/// projected gradient from the clamped unconstrained solution, step size
/// `0.1 n / trace(C^T C)`, then a reduced solve on the final active set.
pub fn box_least_squares(
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> BoxLsResult {
    let n = c.ncols();
    let g = c.transpose() * c;
    let h = c.transpose() * d;
    let dd = d.norm_squared();
    let f = |x: &DVector<f64>| (x.dot(&(&g * x)) - 2.0 * h.dot(x) + dd).max(0.0);
    let trace_g = g.trace();
    let zero = DVector::zeros(n);
    if !(trace_g > 0.0) {
        return BoxLsResult {
            objective: f(&zero),
            x: zero,
            iterations: 0,
            trace: vec![dd],
        };
    }
    let ridge = DMatrix::identity(n, n) * (1e-12 * trace_g);
    let unconstrained = match g.clone().cholesky() {
        Some(ch) => ch.solve(&h),
        None => (&g + &ridge).cholesky().map(|ch| ch.solve(&h)).unwrap_or_else(|| zero.clone()),
    };
    let mut x = clamp_into(&unconstrained, lo, hi);
    let mut fx = f(&x);
    let f0 = f(&zero);
    if fx > f0 {
        x = zero;
        fx = f0;
    }
    let gamma = 0.1 * n as f64 / trace_g;
    let mut trace = vec![fx];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let grad = &g * &x - &h;
        let next = clamp_into(&(&x - grad * gamma), lo, hi);
        let step = (&next - &x).norm();
        x = next;
        fx = f(&x);
        trace.push(fx);
        if step < tol {
            break;
        }
    }
    // reduced solve on the active set found by the gradient iteration
    let at_bound = |i: usize, x: &DVector<f64>| x[i] <= lo[i] + 1e-12 || x[i] >= hi[i] - 1e-12;
    let free: Vec<usize> = (0..n).filter(|&i| !at_bound(i, &x)).collect();
    if !free.is_empty() && free.len() < n + 1 {
        let gf = DMatrix::from_fn(free.len(), free.len(), |a, b| g[(free[a], free[b])]);
        let rhs = DVector::from_fn(free.len(), |a, _| {
            h[free[a]] - (0..n).filter(|j| !free.contains(j)).map(|j| g[(free[a], j)] * x[j]).sum::<f64>()
        });
        if let Some(ch) = gf.cholesky() {
            let sol = ch.solve(&rhs);
            let mut cand = x.clone();
            for (a, &i) in free.iter().enumerate() {
                cand[i] = sol[a];
            }
            let cand = clamp_into(&cand, lo, hi);
            let fc = f(&cand);
            if fc < fx {
                x = cand;
                fx = fc;
                trace.push(fx);
            }
        }
    }
    BoxLsResult {
        x,
        objective: fx,
        iterations,
        trace,
    }
}

/// Box-constrained finger step for the fixed palm increment `(R*, t*)`; the
/// bounds keep `q + dq` inside the joint limits.
pub fn finger_optimize(
    snap: &Snapshot,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    model: &HandModel,
    q: &[f64],
    params: &FitParams,
) -> BoxLsResult {
    let (c, d) = finger_system(snap, rotation, translation, params);
    let lo = DVector::from_fn(model.dof(), |i, _| (model.actuated[i].min - q[i]).min(0.0));
    let hi = DVector::from_fn(model.dof(), |i, _| (model.actuated[i].max - q[i]).max(0.0));
    box_least_squares(&c, &d, &lo, &hi, params.finger_iterations, params.finger_tolerance)
}

/// Error before and after one palm + finger pass, both under the snapshot
/// taken at the start of the pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpfoStep {
    pub before: ErrorBreakdown,
    pub after: ErrorBreakdown,
    pub palm_halvings: usize,
    pub finger_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct IpfoResult {
    pub state: HandState,
    /// Accumulated world-frame palm increment.
    pub palm_increment: RigidTransform,
    /// Accumulated joint displacement.
    pub dq: Vec<f64>,
    /// Error of the accepted configuration.
    pub error: ErrorBreakdown,
    /// Number of accepted iterations.
    pub iterations: usize,
    /// Accepted errors, strictly decreasing.
    pub trace: Vec<f64>,
    /// Every pass that was run, including a final rejected one.
    pub steps: Vec<IpfoStep>,
    pub degenerate: bool,
}

/// Alternate palm and finger steps under fixed fitting pairs `fit` (whose
/// `sample` is a model sample index) and collision pairs, until the accepted
/// error stops decreasing by `delta` or `t_max` passes have run.
pub fn ipfo(
    model: &HandModel,
    state: &HandState,
    object: &PointCloud,
    fit: &[FitPair],
    collisions: &[CollisionPair],
    ground: Option<&GroundPlane>,
    params: &FitParams,
) -> Result<IpfoResult> {
    state.validate(model)?;
    let mut cur = state.clone();
    let mut increment = RigidTransform::identity();
    let mut dq_total = vec![0.0; model.dof()];
    let mut e_prev = f64::INFINITY;
    let mut error = ErrorBreakdown::default();
    let mut trace = Vec::new();
    let mut steps = Vec::new();
    let mut degenerate = false;
    let zero = DVector::zeros(model.dof());
    for _ in 0..params.t_max {
        let kin = forward_kinematics_unchecked(model, &cur.palm_pose, &cur.q);
        let snap = Snapshot::sample(model, &kin, object, fit, collisions, ground);
        let before = fitting_error(&snap, &Matrix3::identity(), &Vector3::zeros(), &zero, params);
        if trace.is_empty() {
            error = before;
        }
        let palm = palm_optimize(&snap, params)?;
        degenerate |= palm.degenerate;
        // the exact rotation can overshoot the small-angle model; halve until no worse
        let mut scale = 1.0;
        let mut halvings = 0;
        let (rotation, translation) = loop {
            let r = rotation_from_axis_angle(&(palm.x.fixed_rows::<3>(0) * scale));
            let t = palm.x.fixed_rows::<3>(3) * scale;
            if fitting_error(&snap, &r, &t, &zero, params).total <= before.total {
                break (r, t);
            }
            halvings += 1;
            if halvings > 30 {
                break (Matrix3::identity(), Vector3::zeros());
            }
            scale *= 0.5;
        };
        let finger = finger_optimize(&snap, &rotation, &translation, model, &cur.q, params);
        let after = fitting_error(&snap, &rotation, &translation, &finger.x, params);
        steps.push(IpfoStep {
            before,
            after,
            palm_halvings: halvings,
            finger_iterations: finger.iterations,
        });
        if e_prev - after.total < params.delta {
            break;
        }
        let step = RigidTransform::new(rotation, translation);
        cur = HandState::new(
            step.compose(&cur.palm_pose),
            model.clamp(&cur.q.iter().zip(finger.x.iter()).map(|(a, b)| a + b).collect::<Vec<_>>()),
        );
        increment = step.compose(&increment);
        for (acc, v) in dq_total.iter_mut().zip(finger.x.iter()) {
            *acc += v;
        }
        e_prev = after.total;
        error = after;
        trace.push(after.total);
    }
    Ok(IpfoResult {
        state: cur,
        palm_increment: increment,
        dq: dq_total,
        error,
        iterations: trace.len(),
        trace,
        steps,
        degenerate,
    })
}
