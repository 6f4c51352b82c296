//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain numbers, runs on the calling thread and
//! returns a JSON string. The `*_view` functions hold the logic and are plain
//! Rust, so they are tested natively.

use drne::experiments::{generate, problem_for, worst_case_costs, Cell, Family, ScenarioConfig};
use drne::solver::{agraal_solve, hybrid_solve, MedianProgress, RunReport};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Iteration cap for in-browser solves.
pub const MAX_ITERS: usize = 20_000;
/// Upper bound on plotted points per curve.
pub const MAX_POINTS: usize = 1_500;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub algorithm: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// `(iteration, residual)`, thinned for plotting.
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Serialize)]
pub struct SolveView {
    pub radii: Vec<f64>,
    pub sample_counts: Vec<usize>,
    pub curves: Vec<Curve>,
    /// Worst-case cost per agent at the aGRAAL solution.
    pub costs: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct RadiusRow {
    pub epsilon: f64,
    pub converged: usize,
    /// `[min, median, max]` per agent over the instances.
    pub costs: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub lambda: f64,
    pub cost: f64,
}

fn config(seed: u64, agents: usize, epsilon: f64, k_lo: usize, k_hi: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Family::Illustrative, agents, 2, 2, seed);
    cfg.epsilon = epsilon;
    cfg.sample_range = [k_lo, k_hi];
    cfg.solver.max_iters = MAX_ITERS;
    cfg
}

fn curve(r: &RunReport) -> Curve {
    let stride = r.trace.len().div_ceil(MAX_POINTS).max(1);
    let mut points: Vec<(usize, f64)> = r.trace.iter().step_by(stride).map(|t| (t.iter, t.residual)).collect();
    if let Some(last) = r.trace.last() {
        if points.last().map(|p| p.0) != Some(last.iter) {
            points.push((last.iter, last.residual));
        }
    }
    Curve {
        algorithm: r.algorithm.clone(),
        converged: r.converged,
        iterations: r.iterations,
        final_residual: r.final_residual,
        points,
    }
}

/// Residual curves of both algorithms on one illustrative instance.
pub fn solve_view(seed: u64, agents: usize, epsilon: f64, k_lo: usize, k_hi: usize) -> drne::Result<SolveView> {
    let cfg = config(seed, agents, epsilon, k_lo, k_hi);
    let spec = generate(&cfg, Cell { epsilon, sample_range: [k_lo, k_hi] }, 0)?;
    let radii = spec.agents.iter().map(|a| a.radius).collect();
    let sample_counts = spec.agents.iter().map(|a| a.sample_count()).collect();
    let p = problem_for(&cfg, spec)?;
    let z0 = p.initial_point();
    let a = agraal_solve(&p, &cfg.solver, &z0)?;
    let h = hybrid_solve(&p, &cfg.solver, &z0, &mut MedianProgress::default())?;
    let costs = worst_case_costs(&p, &a.z)?;
    Ok(SolveView { radii, sample_counts, curves: vec![curve(&a), curve(&h)], costs })
}

/// Equilibrium costs across radii over `instances` sample draws.
pub fn radius_view(seed: u64, agents: usize, epsilons: &[f64], instances: usize) -> drne::Result<Vec<RadiusRow>> {
    let mut rows = Vec::new();
    for &epsilon in epsilons {
        let cfg = config(seed, agents, epsilon, 10, 20);
        let mut per_agent = vec![Vec::new(); agents];
        for k in 0..instances {
            let p = problem_for(&cfg, generate(&cfg, Cell { epsilon, sample_range: [10, 20] }, k)?)?;
            let r = hybrid_solve(&p, &cfg.solver, &p.initial_point(), &mut MedianProgress::default())?;
            if r.converged {
                for (v, c) in per_agent.iter_mut().zip(worst_case_costs(&p, &r.z)?) {
                    v.push(c);
                }
            }
        }
        let converged = per_agent[0].len();
        let costs = per_agent
            .into_iter()
            .map(|mut v| {
                v.sort_by(f64::total_cmp);
                match v.len() {
                    0 => [f64::NAN; 3],
                    n => [v[0], drne::experiments::quantile(&v, 0.5), v[n - 1]],
                }
            })
            .collect();
        rows.push(RadiusRow { epsilon, converged, costs });
    }
    Ok(rows)
}

/// Worst-case cost of agent `agent` (0-based) at fixed strategies, for a
/// log-spaced grid of radii. Other data as generated for `seed`.
pub fn worst_case_curve(seed: u64, agent: usize, points: usize) -> drne::Result<Vec<CurvePoint>> {
    let cfg = config(seed, 4, 1e-2, 10, 20);
    let base = generate(&cfg, Cell { epsilon: 1e-2, sample_range: [10, 20] }, 0)?;
    let agent = agent.min(base.num_agents - 1);
    let points = points.max(2);
    let mut out = Vec::with_capacity(points);
    for j in 0..points {
        let epsilon = 10f64.powf(-4.0 + 4.0 * j as f64 / (points - 1) as f64);
        let mut spec = base.clone();
        spec.agents[agent].radius = epsilon;
        let p = problem_for(&cfg, spec)?;
        let x = p.layout().collective_x(&p.initial_point());
        let (lambda, cost) = p.optimal_multiplier(agent, &x)?;
        out.push(CurvePoint { epsilon, lambda, cost });
    }
    Ok(out)
}

fn to_js<T: Serialize>(r: drne::Result<T>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen]
pub fn solve(seed: u32, agents: u32, epsilon: f64, k_lo: u32, k_hi: u32) -> Result<String, JsValue> {
    to_js(solve_view(seed as u64, agents as usize, epsilon, k_lo as usize, k_hi as usize))
}

#[wasm_bindgen]
pub fn radius_sweep(seed: u32, agents: u32, epsilons: Vec<f64>, instances: u32) -> Result<String, JsValue> {
    to_js(radius_view(seed as u64, agents as usize, &epsilons, instances as usize))
}

#[wasm_bindgen]
pub fn worst_case(seed: u32, agent: u32, points: u32) -> Result<String, JsValue> {
    to_js(worst_case_curve(seed as u64, agent as usize, points as usize))
}
