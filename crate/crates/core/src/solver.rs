//! Adaptive golden ratio algorithm (aGRAAL) and its hybrid momentum-switching
//! variant for the variational inequality `F(z*)ᵀ(z − z*) ≥ 0, z ∈ Z`.
//!
//! One iteration, with momentum `φ_k`:
//!
//! ```text
//! τ_k     = min{ ρ τ_{k−1},  α θ_{k−1} ‖z^k − z^{k−1}‖² / (4 τ_{k−1} ‖F(z^k) − F(z^{k−1})‖²),  τ̄ }
//! z̄^k     = ((φ_k − 1) z^k + z̄^{k−1}) / φ_k
//! z^{k+1} = Π_Z(z̄^k − τ_k F(z^k))
//! θ_k     = α τ_k / τ_{k−1}
//! ```
//!
//! with `ρ = 1/α + 1/α²`. aGRAAL keeps `φ_k = α`. The hybrid tries a large
//! momentum `φ̄` whenever its [`SwitchPredicate`] asks for it and, if the
//! predicate then rejects the step taken with `φ̄`, restores the previous
//! iterate, averaged point, stepsize and `θ` before continuing with `α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist_sq;
use crate::reformulation::VIProblem;

/// Iterations recorded unconditionally before thinning kicks in.
pub const DENSE_TRACE_ITERS: usize = 10_000;
/// `‖ΔF‖²` below this makes the curvature candidate infinite.
pub const CURVATURE_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub tau0: f64,
    pub tau_bar: f64,
    /// Golden-ratio parameter, `1 < α ≤ (1 + √5)/2`. At the upper end
    /// `ρ = 1` and the stepsize can never grow past `tau0`.
    pub alpha: f64,
    /// Large momentum for the hybrid, `φ̄ > (1 + √5)/2`.
    pub phi_bar: f64,
    pub max_iters: usize,
    /// Natural-residual stopping tolerance.
    pub tol: f64,
    /// Trace thinning after the first [`DENSE_TRACE_ITERS`] iterations.
    pub record_every: usize,
}

pub const GOLDEN: f64 = 1.618_033_988_749_895;

impl Default for SolverParams {
    fn default() -> Self {
        Self { tau0: 1.0, tau_bar: 1e6, alpha: 1.5, phi_bar: 10.0, max_iters: 200_000, tol: 1e-6, record_every: 10 }
    }
}

impl SolverParams {
    pub fn rho(&self) -> f64 {
        1.0 / self.alpha + 1.0 / (self.alpha * self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.tau0 > 0.0) || !self.tau0.is_finite() {
            return bad("tau0 must be positive");
        }
        if !(self.tau_bar >= self.tau0) {
            return bad("tau_bar must be at least tau0");
        }
        if !(self.alpha > 1.0 && self.alpha <= GOLDEN + 1e-12) {
            return bad("alpha must lie in (1, (1+sqrt5)/2]");
        }
        if !(self.phi_bar > GOLDEN) {
            return bad("phi_bar must exceed (1+sqrt5)/2");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be nonnegative");
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub residual: f64,
    /// Stepsize that produced this iterate.
    pub tau: f64,
    /// Momentum that produced this iterate.
    pub phi: f64,
}

/// Receives trace rows as they are recorded.
pub trait TraceSink {
    fn record(&mut self, row: &TraceRow);
}

impl TraceSink for Vec<TraceRow> {
    fn record(&mut self, row: &TraceRow) {
        self.push(row.clone());
    }
}

struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _row: &TraceRow) {}
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// Hybrid steps undone by the switching predicate.
    pub reverts: usize,
    pub trace: Vec<TraceRow>,
    /// Projected starting point.
    pub z0: Vec<f64>,
    pub z: Vec<f64>,
    /// `J_i(z)` per agent.
    pub costs: Vec<f64>,
    /// Not serialised, so report files stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Solver bookkeeping between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z_curr: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub z_bar: Vec<f64>,
    pub f_curr: Vec<f64>,
    pub f_prev: Vec<f64>,
    /// `τ_{k−1}`, the last accepted stepsize.
    pub tau_prev: f64,
    pub theta: f64,
    /// Momentum used to produce `z_curr`.
    pub phi: f64,
    pub iter: usize,
    /// Whether the next step uses the large momentum.
    pub large_active: bool,
}

/// `τ_k` from the stepsize rule.
pub fn stepsize(params: &SolverParams, tau_prev: f64, theta: f64, dz_sq: f64, df_sq: f64) -> f64 {
    let curvature = if df_sq < CURVATURE_GUARD {
        f64::INFINITY
    } else {
        params.alpha * theta / (4.0 * tau_prev) * dz_sq / df_sq
    };
    (params.rho() * tau_prev).min(curvature).min(params.tau_bar)
}

/// `τ_k` for the current state.
pub fn stepsize_update(params: &SolverParams, state: &SolverState) -> f64 {
    stepsize(
        params,
        state.tau_prev,
        state.theta,
        dist_sq(&state.z_curr, &state.z_prev),
        dist_sq(&state.f_curr, &state.f_prev),
    )
}

struct Proposal {
    tau: f64,
    z_bar: Vec<f64>,
    z_next: Vec<f64>,
    f_next: Vec<f64>,
}

struct Engine<'a> {
    problem: &'a VIProblem,
    params: SolverParams,
    state: SolverState,
    z0: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(problem: &'a VIProblem, params: SolverParams, z0: &[f64]) -> Result<Self> {
        params.validate()?;
        if z0.len() != problem.dimension() {
            return Err(Error::Dimension(format!("z0 has length {}, expected {}", z0.len(), problem.dimension())));
        }
        let z0 = problem.projected(z0);
        let f0 = eval(problem, &z0, 0)?;
        let mut z1: Vec<f64> = z0.iter().zip(&f0).map(|(z, f)| z - params.tau0 * f).collect();
        problem.project(&mut z1);
        let f1 = eval(problem, &z1, 1)?;
        let state = SolverState {
            z_bar: z1.clone(),
            z_curr: z1,
            z_prev: z0.clone(),
            f_curr: f1,
            f_prev: f0,
            tau_prev: params.tau0,
            theta: 1.0,
            phi: params.alpha,
            iter: 1,
            large_active: false,
        };
        Ok(Self { problem, params, state, z0 })
    }

    fn residual(&self) -> f64 {
        self.problem.residual_with(&self.state.z_curr, &self.state.f_curr)
    }

    fn propose(&self, phi: f64) -> Result<Proposal> {
        let s = &self.state;
        let tau = stepsize_update(&self.params, s);
        let z_bar: Vec<f64> = s.z_curr.iter().zip(&s.z_bar).map(|(z, b)| ((phi - 1.0) * z + b) / phi).collect();
        let mut z_next: Vec<f64> = z_bar.iter().zip(&s.f_curr).map(|(b, f)| b - tau * f).collect();
        self.problem.project(&mut z_next);
        let f_next = eval(self.problem, &z_next, s.iter + 1)?;
        Ok(Proposal { tau, z_bar, z_next, f_next })
    }

    fn accept(&mut self, p: Proposal, phi: f64) {
        let s = &mut self.state;
        s.z_prev = std::mem::replace(&mut s.z_curr, p.z_next);
        s.f_prev = std::mem::replace(&mut s.f_curr, p.f_next);
        s.z_bar = p.z_bar;
        s.theta = self.params.alpha * p.tau / s.tau_prev;
        s.tau_prev = p.tau;
        s.phi = phi;
        s.iter += 1;
    }

    fn row(&self, residual: f64) -> TraceRow {
        TraceRow { iter: self.state.iter, residual, tau: self.state.tau_prev, phi: self.state.phi }
    }

    fn should_record(&self) -> bool {
        let k = self.state.iter;
        k <= DENSE_TRACE_ITERS || k.is_multiple_of(self.params.record_every)
    }

    fn finish(self, name: &str, converged: bool, residual: f64, trace: Vec<TraceRow>, reverts: usize, start: Stopwatch) -> Result<RunReport> {
        let costs = self.problem.costs(&self.state.z_curr)?;
        Ok(RunReport {
            algorithm: name.to_string(),
            converged,
            iterations: self.state.iter,
            final_residual: residual,
            reverts,
            trace,
            z0: self.z0,
            z: self.state.z_curr,
            costs,
            wall_time_secs: start.secs(),
        })
    }
}

/// Wall clock; `Instant::now` panics on wasm32-unknown-unknown, where runs
/// report zero time.
#[derive(Clone, Copy)]
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn secs(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

fn eval(problem: &VIProblem, z: &[f64], iter: usize) -> Result<Vec<f64>> {
    let f = problem.mapping(z)?;
    if f.iter().all(|v| v.is_finite()) {
        Ok(f)
    } else {
        Err(Error::NonFinite { iter, z: z.to_vec() })
    }
}

/// Records a row, keeping the last one for the final report.
fn push_row(trace: &mut Vec<TraceRow>, sink: &mut dyn TraceSink, row: TraceRow, keep: bool) {
    if keep {
        sink.record(&row);
        trace.push(row);
    }
}

fn close_trace(trace: &mut Vec<TraceRow>, sink: &mut dyn TraceSink, row: TraceRow) {
    if trace.last().is_none_or(|r| r.iter != row.iter) {
        sink.record(&row);
        trace.push(row);
    }
}

pub fn agraal_solve(problem: &VIProblem, params: &SolverParams, z0: &[f64]) -> Result<RunReport> {
    agraal_solve_with_sink(problem, params, z0, &mut NullSink)
}

pub fn agraal_solve_with_sink(
    problem: &VIProblem,
    params: &SolverParams,
    z0: &[f64],
    sink: &mut dyn TraceSink,
) -> Result<RunReport> {
    let start = Stopwatch::start();
    let mut engine = Engine::new(problem, *params, z0)?;
    let mut trace = Vec::new();
    loop {
        let res = engine.residual();
        let row = engine.row(res);
        let done = res <= params.tol;
        if done || engine.state.iter >= params.max_iters {
            close_trace(&mut trace, sink, row);
            return engine.finish("agraal", done, res, trace, 0, start);
        }
        push_row(&mut trace, sink, row, engine.should_record());
        let p = engine.propose(params.alpha)?;
        engine.accept(p, params.alpha);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Momentum {
    /// Use `α` next; if the step just taken used `φ̄`, undo it.
    Alpha,
    /// Keep the step just taken and use `φ̄` next.
    Large,
}

/// What a switching predicate sees after each tentative step.
#[derive(Debug)]
pub struct SwitchView<'a> {
    pub iter: usize,
    /// Whether the tentative step used `φ̄`.
    pub large_active: bool,
    /// Natural residual at the tentative iterate.
    pub candidate_residual: f64,
    /// Natural residuals of accepted iterates, oldest first.
    pub history: &'a [f64],
}

/// Decides the momentum of the hybrid's next step.
pub trait SwitchPredicate {
    fn decide(&mut self, view: &SwitchView<'_>) -> Momentum;
}

/// Never leaves `α`; the hybrid then reproduces aGRAAL exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverSwitch;

impl SwitchPredicate for NeverSwitch {
    fn decide(&mut self, _view: &SwitchView<'_>) -> Momentum {
        Momentum::Alpha
    }
}

/// Default switching rule.
///
/// A step taken with `φ̄` is kept while its residual does not exceed the
/// median residual of the last `window` accepted iterates. After a rejection
/// the solver runs `cooldown` steps with `α` before trying `φ̄` again.
#[derive(Debug, Clone)]
pub struct MedianProgress {
    pub window: usize,
    pub cooldown: usize,
    alpha_steps: usize,
}

impl MedianProgress {
    pub fn new(window: usize, cooldown: usize) -> Self {
        Self { window: window.max(1), cooldown, alpha_steps: 0 }
    }
}

impl Default for MedianProgress {
    fn default() -> Self {
        Self::new(10, 10)
    }
}

impl SwitchPredicate for MedianProgress {
    fn decide(&mut self, view: &SwitchView<'_>) -> Momentum {
        if view.large_active {
            let tail = &view.history[view.history.len().saturating_sub(self.window)..];
            if tail.is_empty() || view.candidate_residual <= median(tail) {
                Momentum::Large
            } else {
                self.alpha_steps = 0;
                Momentum::Alpha
            }
        } else {
            self.alpha_steps += 1;
            if self.alpha_steps >= self.cooldown {
                self.alpha_steps = 0;
                Momentum::Large
            } else {
                Momentum::Alpha
            }
        }
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn hybrid_solve(
    problem: &VIProblem,
    params: &SolverParams,
    z0: &[f64],
    predicate: &mut dyn SwitchPredicate,
) -> Result<RunReport> {
    hybrid_solve_with_sink(problem, params, z0, predicate, &mut NullSink)
}

pub fn hybrid_solve_with_sink(
    problem: &VIProblem,
    params: &SolverParams,
    z0: &[f64],
    predicate: &mut dyn SwitchPredicate,
    sink: &mut dyn TraceSink,
) -> Result<RunReport> {
    let start = Stopwatch::start();
    let mut engine = Engine::new(problem, *params, z0)?;
    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut reverts = 0;
    let mut res = engine.residual();
    loop {
        let row = engine.row(res);
        let done = res <= params.tol;
        if done || engine.state.iter >= params.max_iters {
            close_trace(&mut trace, sink, row);
            return engine.finish("hybrid", done, res, trace, reverts, start);
        }
        push_row(&mut trace, sink, row, engine.should_record());
        history.push(res);

        let large = engine.state.large_active;
        let phi = if large { params.phi_bar } else { params.alpha };
        let p = engine.propose(phi)?;
        let candidate = problem.residual_with(&p.z_next, &p.f_next);
        let view = SwitchView { iter: engine.state.iter, large_active: large, candidate_residual: candidate, history: &history };
        let decision = predicate.decide(&view);

        if large && decision == Momentum::Alpha {
            // Undo: iterate, averaged point, τ and θ stay at their previous values.
            reverts += 1;
            engine.state.iter += 1;
            engine.state.large_active = false;
            history.pop();
        } else {
            engine.accept(p, phi);
            engine.state.large_active = decision == Momentum::Large;
            res = candidate;
        }
    }
}
