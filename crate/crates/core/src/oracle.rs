//! Brute-force verifiers for the reformulation and the solvers.
//!
//! Apart from [`fd_gradient_check`], which differentiates the closed-form
//! objective numerically, nothing here uses the eigendecomposition or the
//! closed-form suprema: the inner problem is solved either by gradient ascent
//! or by a direct Cholesky solve of the stationarity condition in the original
//! coordinates, and agent objectives are rebuilt from those.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{deterministic_cost, AgentSpec};
use crate::linalg::{dot, norm, Matrix};
use crate::reformulation::VIProblem;

pub const ARMIJO: f64 = 1e-4;
pub const SHRINK: f64 = 0.5;
pub const DEFAULT_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Largest `|F_k − fd_k| / max(1, |F_k|, |fd_k|)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub step: f64,
}

/// Compares every component of `F(z)` with central differences of the
/// owning agent's objective in its own coordinates.
pub fn fd_gradient_check(problem: &VIProblem, z: &[f64], step: f64) -> Result<GradCheckReport> {
    let layout = problem.layout();
    for (i, floor) in problem.lambda_floors().iter().enumerate() {
        let lambda = z[layout.lambda_index(i)];
        if lambda < floor + 10.0 * step {
            return Err(Error::Infeasible(format!(
                "agent {}: lambda {lambda} closer than 10 steps to its floor {floor}",
                i + 1
            )));
        }
    }
    let f = problem.mapping(z)?;
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_index: 0, step };
    let mut zp = z.to_vec();
    for i in 0..layout.agents {
        let start = i * (layout.n + 1);
        for idx in start..start + layout.n + 1 {
            let orig = zp[idx];
            zp[idx] = orig + step;
            let up = problem.agent_objective(i, &zp)?;
            zp[idx] = orig - step;
            let down = problem.agent_objective(i, &zp)?;
            zp[idx] = orig;
            let fd = (up - down) / (2.0 * step);
            let rel = (fd - f[idx]).abs() / 1f64.max(fd.abs()).max(f[idx].abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentParams {
    /// Stop once `‖∇‖ ≤ tol`.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for AscentParams {
    fn default() -> Self {
        Self { tol: 1e-10, max_steps: DEFAULT_BUDGET }
    }
}

/// `sup_ξ [ξᵀQξ + P(x)ᵀξ − λ‖ξ − ξ_k‖²]` by backtracking gradient ascent
/// started at the sample itself.
pub fn numeric_inner_sup(agent: &AgentSpec, x: &[f64], lambda: f64, k: usize, params: AscentParams) -> Result<f64> {
    require_concave(agent, lambda, 1e-9)?;
    let p = agent.affine_term(x);
    let center = agent.samples.row(k);
    let objective = |xi: &[f64]| {
        let diff: Vec<f64> = xi.iter().zip(center).map(|(a, b)| a - b).collect();
        dot(xi, &agent.q.matvec(xi)) + dot(&p, xi) - lambda * dot(&diff, &diff)
    };
    let gradient = |xi: &[f64]| -> Vec<f64> {
        let qx = agent.q.matvec(xi);
        (0..xi.len()).map(|j| 2.0 * qx[j] + p[j] - 2.0 * lambda * (xi[j] - center[j])).collect()
    };

    let mut xi = center.to_vec();
    let mut value = objective(&xi);
    let mut t = 1.0 / (2.0 * lambda);
    for _ in 0..params.max_steps {
        let g = gradient(&xi);
        let gn2 = dot(&g, &g);
        if gn2.sqrt() <= params.tol {
            break;
        }
        loop {
            let trial: Vec<f64> = xi.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            let tv = objective(&trial);
            if tv >= value + ARMIJO * t * gn2 {
                xi = trial;
                value = tv;
                t *= 2.0;
                break;
            }
            t *= SHRINK;
            if t < 1e-30 {
                return Ok(value);
            }
        }
    }
    Ok(value)
}

/// Confirms `λI − Q − margin·I` is positive definite via Cholesky.
fn require_concave(agent: &AgentSpec, lambda: f64, margin: f64) -> Result<()> {
    let mut shifted = agent.q.clone();
    for r in 0..shifted.rows() {
        for c in 0..shifted.cols() {
            shifted[(r, c)] = -shifted[(r, c)];
        }
        shifted[(r, r)] += lambda - margin;
    }
    if cholesky(&shifted).is_some() {
        Ok(())
    } else {
        Err(Error::InfiniteSupremum { lambda, lambda_max: f64::NAN })
    }
}

/// Lower-triangular Cholesky factor, `None` if not positive definite.
fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Worst-case objective and its gradient in `(x_i, λ_i)`, evaluated without
/// the eigenbasis: each maximiser solves `(λI − Q) ξ* = P/2 + λ ξ_k` and
/// the gradients follow from the envelope theorem.
#[derive(Debug, Clone)]
pub struct DirectEvaluation {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_lambda: f64,
}

pub fn direct_objective(agent: &AgentSpec, x: &[f64], lambda: f64) -> Result<DirectEvaluation> {
    let m = agent.m;
    let mut shifted = Matrix::zeros(m, m);
    for r in 0..m {
        for c in 0..m {
            shifted[(r, c)] = -agent.q[(r, c)];
        }
        shifted[(r, r)] += lambda;
    }
    let chol = cholesky(&shifted).ok_or(Error::InfiniteSupremum { lambda, lambda_max: f64::NAN })?;
    let p = agent.affine_term(x);
    let (f, grad_f) = deterministic_cost(agent, x)?;
    let k = agent.sample_count();

    let mut sup_sum = 0.0;
    let mut xi_sum = vec![0.0; m];
    let mut shift_sq_sum = 0.0;
    for r in 0..k {
        let s = agent.samples.row(r);
        let rhs: Vec<f64> = (0..m).map(|j| 0.5 * p[j] + lambda * s[j]).collect();
        let xi = cholesky_solve(&chol, &rhs);
        let diff: Vec<f64> = xi.iter().zip(s).map(|(a, b)| a - b).collect();
        let dd = dot(&diff, &diff);
        sup_sum += dot(&xi, &agent.q.matvec(&xi)) + dot(&p, &xi) - lambda * dd;
        xi_sum.iter_mut().zip(&xi).for_each(|(a, b)| *a += b);
        shift_sq_sum += dd;
    }
    let kf = k as f64;
    let eps2 = agent.radius * agent.radius;
    let mean_xi: Vec<f64> = xi_sum.iter().map(|v| v / kf).collect();
    let own = agent.a_block(agent.index - 1);
    let grad_x: Vec<f64> = grad_f.iter().zip(own.tr_matvec(&mean_xi)).map(|(a, b)| a + b).collect();
    Ok(DirectEvaluation {
        value: f + lambda * eps2 + sup_sum / kf,
        grad_x,
        grad_lambda: eps2 - shift_sq_sum / kf,
    })
}

/// Closed-form worst case when `Q = 0`: `(mean_k P(x)ᵀξ_k + ε‖P(x)‖, λ* = ‖P‖/(2ε))`.
/// `λ*` is `None` when `ε = 0` or `P(x) = 0`.
pub fn linear_case_value(agent: &AgentSpec, x: &[f64]) -> Result<(f64, Option<f64>)> {
    if agent.q.max_abs() != 0.0 {
        return Err(Error::InvalidParameter("linear case requires Q = 0".into()));
    }
    let p = agent.affine_term(x);
    let k = agent.sample_count() as f64;
    let mean: f64 = (0..agent.sample_count()).map(|r| dot(&p, agent.samples.row(r))).sum::<f64>() / k;
    let pn = norm(&p);
    let eps = agent.radius;
    if eps == 0.0 || pn == 0.0 {
        return Ok((mean + eps * pn, None));
    }
    Ok((mean + eps * pn, Some(pn / (2.0 * eps))))
}

/// Result of a unilateral-deviation descent for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// Own decision then multiplier.
    pub point: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    pub steps: usize,
}

/// Projected gradient descent on `J_i(·, x_{−i})` over `X_i × [floor_i, ∞)`
/// from `start = (x_i, λ_i)`, with Armijo backtracking (the accepted step
/// doubles before the next line search).
pub fn best_response(problem: &VIProblem, z: &[f64], i: usize, start: &[f64], budget: usize) -> Result<BestResponse> {
    let layout = problem.layout();
    let n = layout.n;
    let agent = &problem.game().agents()[i];
    let floor = problem.lambda_floors()[i];
    let mut x = layout.collective_x(z);

    let project = |y: &mut Vec<f64>| {
        agent.local_set.project_in_place(&mut y[..n]);
        y[n] = y[n].max(floor);
    };
    let mut eval_at = |y: &[f64]| -> Result<DirectEvaluation> {
        x[i * n..(i + 1) * n].copy_from_slice(&y[..n]);
        direct_objective(agent, &x, y[n])
    };

    let mut y = start.to_vec();
    project(&mut y);
    let mut cur = eval_at(&y)?;
    let start_value = cur.value;
    let mut t = 1.0;
    let mut steps = 0;
    'outer: while steps < budget {
        let mut g = cur.grad_x.clone();
        g.push(cur.grad_lambda);
        loop {
            let mut trial: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            project(&mut trial);
            let delta: Vec<f64> = trial.iter().zip(&y).map(|(a, b)| a - b).collect();
            if norm(&delta) <= 1e-15 * (1.0 + norm(&y)) {
                break 'outer;
            }
            let next = eval_at(&trial)?;
            if next.value <= cur.value + ARMIJO * dot(&g, &delta) {
                y = trial;
                cur = next;
                t *= 2.0;
                steps += 1;
                break;
            }
            t *= SHRINK;
            if t < 1e-30 {
                break 'outer;
            }
        }
    }
    Ok(BestResponse { point: y, value: cur.value, start_value, steps })
}

/// Per-agent decrease of `J_i` achievable by unilateral deviation from `z`.
pub fn best_response_gap(problem: &VIProblem, z: &[f64], budget: usize) -> Result<Vec<f64>> {
    let layout = problem.layout();
    (0..layout.agents)
        .map(|i| {
            let mut start = layout.x(z, i).to_vec();
            start.push(z[layout.lambda_index(i)]);
            let br = best_response(problem, z, i, &start, budget)?;
            Ok((br.start_value - br.value).max(0.0))
        })
        .collect()
}
