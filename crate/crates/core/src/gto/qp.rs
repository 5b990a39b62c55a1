use super::{GtoParams, SdResult, Trajectory};
use crate::error::Result;
use crate::hand::{forward_kinematics, HandModel};

/// Linearized pair distance `sd + g . dq_s`, penalized by `c * max(0, d_safe - sd - g . dq_s)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyRow {
    pub sample: usize,
    pub sd: f64,
    pub g: Vec<f64>,
}

/// One penalized subproblem in the displacements `dq_s` of all samples.
/// Endpoint displacements are pinned to zero.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub samples: usize,
    pub dof: usize,
    /// Current joint samples, `samples x dof`.
    pub q: Vec<Vec<f64>>,
    /// Bounds on `dq`, flat `samples * dof` (joint limits intersected with the trust region).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub step_bound: Vec<f64>,
    pub rows: Vec<PenaltyRow>,
    pub c: f64,
    pub d_safe: f64,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub displacements: Vec<Vec<f64>>,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the value at zero.
    pub trace: Vec<f64>,
}

impl QpProblem {
    /// Rows from the critical pairs of the interior samples; bounds from the
    /// joint limits and the trust region.
    pub fn from_trajectory(
        model: &HandModel,
        traj: &Trajectory,
        distances: &[SdResult],
        params: &GtoParams,
        c: f64,
        joint_min: &[f64],
        joint_max: &[f64],
    ) -> Result<Self> {
        let n = traj.len();
        let dof = model.dof();
        let mut rows = Vec::new();
        for s in 1..n.saturating_sub(1) {
            if distances[s].is_clear() {
                continue;
            }
            let kin = forward_kinematics(model, &traj.state(s))?;
            for pair in &distances[s].pairs {
                let jac = kin.world_point_jacobian(model, pair.link, &pair.p);
                let g = (jac.transpose() * pair.n).iter().copied().collect();
                rows.push(PenaltyRow { sample: s, sd: pair.sd, g });
            }
        }
        let mut lower = vec![0.0; n * dof];
        let mut upper = vec![0.0; n * dof];
        for s in 1..n.saturating_sub(1) {
            for j in 0..dof {
                let q = traj.joints[s][j];
                lower[s * dof + j] = (-params.trust_region[j]).max(joint_min[j] - q).min(0.0);
                upper[s * dof + j] = params.trust_region[j].min(joint_max[j] - q).max(0.0);
            }
        }
        Ok(Self {
            samples: n,
            dof,
            q: traj.joints.clone(),
            lower,
            upper,
            step_bound: params.step_bound.clone(),
            rows,
            c,
            d_safe: params.d_safe,
        })
    }

    fn y(&self, x: &[f64], s: usize, j: usize) -> f64 {
        self.q[s][j] + x[s * self.dof + j]
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        for s in 0..self.samples - 1 {
            for j in 0..self.dof {
                let d = self.y(x, s + 1, j) - self.y(x, s, j);
                f += d * d;
            }
        }
        for row in &self.rows {
            let r = self.residual(row, x);
            if r > 0.0 {
                f += self.c * r * r;
            }
        }
        f
    }

    fn residual(&self, row: &PenaltyRow, x: &[f64]) -> f64 {
        let xs = &x[row.sample * self.dof..(row.sample + 1) * self.dof];
        self.d_safe - row.sd - row.g.iter().zip(xs).map(|(g, v)| g * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..self.samples - 1 {
            for j in 0..self.dof {
                let d = 2.0 * (self.y(x, s + 1, j) - self.y(x, s, j));
                out[(s + 1) * self.dof + j] += d;
                out[s * self.dof + j] -= d;
            }
        }
        for row in &self.rows {
            let r = self.residual(row, x);
            if r > 0.0 {
                for (j, g) in row.g.iter().enumerate() {
                    out[row.sample * self.dof + j] -= 2.0 * self.c * r * g;
                }
            }
        }
    }

    /// Largest violation of the bounds and step constraints (<= 0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut v = f64::NEG_INFINITY;
        for (i, xi) in x.iter().enumerate() {
            v = v.max(self.lower[i] - xi).max(xi - self.upper[i]);
        }
        for s in 0..self.samples - 1 {
            for j in 0..self.dof {
                let d = self.y(x, s + 1, j) - self.y(x, s, j);
                v = v.max(d.abs() - self.step_bound[j]);
            }
        }
        v
    }

    fn project_box(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = xi.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Projection onto the step constraints of the segments starting at samples
    /// of the given parity. Segments touching an endpoint move only the free side.
    fn project_steps(&self, x: &mut [f64], parity: usize) {
        let last = self.samples - 1;
        for s in (parity..last).step_by(2) {
            for j in 0..self.dof {
                let d = self.y(x, s + 1, j) - self.y(x, s, j);
                let excess = d.abs() - self.step_bound[j];
                if excess <= 0.0 {
                    continue;
                }
                let shift = excess * d.signum();
                let (a, b) = (s * self.dof + j, (s + 1) * self.dof + j);
                match (s == 0, s + 1 == last) {
                    (true, true) => {}
                    (true, false) => x[b] -= shift,
                    (false, true) => x[a] += shift,
                    (false, false) => {
                        x[a] += 0.5 * shift;
                        x[b] -= 0.5 * shift;
                    }
                }
            }
        }
    }

    /// Euclidean projection onto the feasible set by Dykstra's alternating
    /// projections, followed by a shrink toward zero if round-off leaves a
    /// violation.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let n = z.len();
        let mut x = z.to_vec();
        self.project_box(&mut x);
        if self.violation(&x) <= 0.0 {
            return x;
        }
        x.copy_from_slice(z);
        let mut inc = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for _ in 0..500 {
            let prev = x.clone();
            for (k, inc_k) in inc.iter_mut().enumerate() {
                let mut y: Vec<f64> = x.iter().zip(inc_k.iter()).map(|(a, b)| a + b).collect();
                let before = y.clone();
                match k {
                    0 => self.project_box(&mut y),
                    1 => self.project_steps(&mut y, 0),
                    _ => self.project_steps(&mut y, 1),
                }
                for i in 0..n {
                    inc_k[i] = before[i] - y[i];
                }
                x = y;
            }
            let change = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if change < 1e-14 {
                break;
            }
        }
        self.project_box(&mut x);
        if self.violation(&x) > 0.0 {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let t = 0.5 * (lo + hi);
                let y: Vec<f64> = x.iter().map(|v| v * t).collect();
                if self.violation(&y) <= 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
            }
            x.iter_mut().for_each(|v| *v *= lo);
        }
        x
    }
}

/// Projected gradient with a Barzilai-Borwein trial step and backtracking.
/// Starts from zero displacement; every accepted step lowers the objective.
pub fn solve_penalized_qp(problem: &QpProblem, max_iterations: usize, tolerance: f64) -> QpSolution {
    let n = problem.samples * problem.dof;
    let mut x = vec![0.0; n];
    let mut f = problem.objective(&x);
    let initial_objective = f;
    let mut trace = vec![f];
    let mut g = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    problem.gradient(&x, &mut g);
    let curvature = 4.0 + problem.c * problem.rows.iter().map(|r| r.g.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
    let mut alpha = 1.0 / (2.0 * curvature);
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut step = alpha;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let z = problem.project(&trial);
            let dist2: f64 = z.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 == 0.0 {
                break None;
            }
            let fz = problem.objective(&z);
            if fz <= f - 1e-4 / step * dist2 {
                break Some((z, fz));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((z, fz)) = accepted else { break };
        problem.gradient(&z, &mut g_new);
        let mut sy = 0.0;
        let mut ss = 0.0;
        let mut change: f64 = 0.0;
        for i in 0..n {
            let s = z[i] - x[i];
            sy += s * (g_new[i] - g[i]);
            ss += s * s;
            change = change.max(s.abs());
        }
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e6) } else { (2.0 * step).min(1e6) };
        let decrease = f - fz;
        x = z;
        f = fz;
        std::mem::swap(&mut g, &mut g_new);
        trace.push(f);
        if change < tolerance || decrease <= tolerance * tolerance * (1.0 + f.abs()) {
            break;
        }
    }
    let displacements = x.chunks(problem.dof).map(|c| c.to_vec()).collect();
    QpSolution { displacements, objective: f, initial_objective, iterations, trace }
}
