//! Seeded scenario generators and sweep orchestration.
//!
//! Every instance is a pure function of `(config, cell, instance)`. Two
//! substreams of the root seed feed it:
//!
//! - the structure stream (`H`, `c`, `A`, `Q`, radius multipliers), keyed by
//!   agent and, when `vary = all`, by instance as well;
//! - the sample stream (`K_i` and the samples), keyed by instance and agent.
//!
//! Cells of a sweep reuse the same streams, so an instance differs across
//! cells only in the swept quantity.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{validate_game, AgentSpec, GameSpec};
use crate::linalg::Matrix;
use crate::projection::LocalSet;
use crate::reformulation::{VIProblem, DEFAULT_ZETA};
use crate::rng::{Distribution, SeededStream};
use crate::solver::{agraal_solve, hybrid_solve, MedianProgress, RunReport, SolverParams};

const STRUCTURE: u64 = 1;
const SAMPLES: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Illustrative,
    Portfolio,
}

/// Which parts of an instance change between the instances of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vary {
    /// Game data and samples.
    All,
    /// Samples only; the game data is drawn once from the seed.
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub family: Family,
    #[serde(rename = "N")]
    pub num_agents: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Base radius; agent radii are `epsilon · U{multiplier_range}`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Radii swept by `run_sweep`; empty means `[epsilon]`.
    #[serde(default)]
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_sample_range")]
    pub sample_range: [usize; 2],
    /// Sample-count ranges swept by `run_sweep`; empty means `[sample_range]`.
    #[serde(default)]
    pub sample_grid: Vec<[usize; 2]>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub vary: Option<Vary>,
    #[serde(default = "default_multiplier_range")]
    pub multiplier_range: [i64; 2],
    /// Range of the `a_j` coefficients (illustrative family).
    #[serde(default = "unit_range")]
    pub coefficient_range: [f64; 2],
    /// Range of the eigenvalues of `Q_i`.
    #[serde(default = "unit_range")]
    pub eigen_range: [f64; 2],
    /// Multiplies the generated deterministic costs (`H` and `c`); defaults
    /// to 0.01 (illustrative) or 1 (portfolio).
    #[serde(default)]
    pub cost_scale: Option<f64>,
    /// Sample distribution; defaults to `U[0,1]` (illustrative) or
    /// Student-t with 3 degrees of freedom (portfolio).
    #[serde(default)]
    pub distribution: Option<Distribution>,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default)]
    pub solver: SolverParams,
}

fn default_epsilon() -> f64 {
    1e-2
}
fn default_sample_range() -> [usize; 2] {
    [10, 20]
}
fn default_instances() -> usize {
    10
}
fn default_multiplier_range() -> [i64; 2] {
    [1, 5]
}
fn unit_range() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_zeta() -> f64 {
    DEFAULT_ZETA
}

impl ScenarioConfig {
    pub fn new(family: Family, num_agents: usize, n: usize, m: usize, seed: u64) -> Self {
        Self {
            family,
            num_agents,
            n,
            m,
            seed,
            epsilon: default_epsilon(),
            epsilon_grid: Vec::new(),
            sample_range: default_sample_range(),
            sample_grid: Vec::new(),
            instances: default_instances(),
            vary: None,
            multiplier_range: default_multiplier_range(),
            coefficient_range: unit_range(),
            eigen_range: unit_range(),
            cost_scale: None,
            distribution: None,
            zeta: default_zeta(),
            solver: SolverParams::default(),
        }
    }

    pub fn vary(&self) -> Vary {
        self.vary.unwrap_or(match self.family {
            Family::Illustrative => Vary::Samples,
            Family::Portfolio => Vary::All,
        })
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution.unwrap_or(match self.family {
            Family::Illustrative => Distribution::Uniform { a: 0.0, b: 1.0 },
            Family::Portfolio => Distribution::StudentT { dof: 3, scale: 1.0, shift: 0.0 },
        })
    }

    pub fn cost_scale(&self) -> f64 {
        self.cost_scale.unwrap_or(match self.family {
            Family::Illustrative => 0.01,
            Family::Portfolio => 1.0,
        })
    }

    pub fn epsilons(&self) -> Vec<f64> {
        if self.epsilon_grid.is_empty() {
            vec![self.epsilon]
        } else {
            self.epsilon_grid.clone()
        }
    }

    pub fn sample_ranges(&self) -> Vec<[usize; 2]> {
        if self.sample_grid.is_empty() {
            vec![self.sample_range]
        } else {
            self.sample_grid.clone()
        }
    }

    /// Sweep cells, radius-major.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &epsilon in &self.epsilons() {
            for &sample_range in &self.sample_ranges() {
                out.push(Cell { epsilon, sample_range });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_agents == 0 || self.n == 0 || self.m == 0 {
            return bad("N, n and m must be positive".into());
        }
        if self.instances == 0 {
            return bad("instances must be at least 1".into());
        }
        for e in self.epsilons() {
            if !(e >= 0.0) || !e.is_finite() {
                return bad(format!("radius {e} must be finite and nonnegative"));
            }
        }
        for [lo, hi] in self.sample_ranges() {
            if lo == 0 || lo > hi {
                return bad(format!("sample range [{lo}, {hi}] is empty or contains 0"));
            }
        }
        let [a, b] = self.multiplier_range;
        if a < 0 || a > b {
            return bad(format!("multiplier range [{a}, {b}] is invalid"));
        }
        for (name, [lo, hi]) in [("coefficient_range", self.coefficient_range), ("eigen_range", self.eigen_range)] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("{name} [{lo}, {hi}] is invalid"));
            }
        }
        if self.eigen_range[0] < 0.0 {
            return bad("eigen_range must be nonnegative".into());
        }
        if !(self.cost_scale() > 0.0) || !self.cost_scale().is_finite() {
            return bad("cost_scale must be positive".into());
        }
        if !(self.zeta > 0.0) {
            return bad("zeta must be positive".into());
        }
        if self.family == Family::Portfolio && self.m != self.n {
            return bad(format!("portfolio games need m = n (got m = {}, n = {})", self.m, self.n));
        }
        self.distribution().check().map_err(|e| Error::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub epsilon: f64,
    pub sample_range: [usize; 2],
}

impl Cell {
    pub fn label(&self) -> String {
        format!("eps={:e}/K={}-{}", self.epsilon, self.sample_range[0], self.sample_range[1])
    }
}

fn structure_stream(config: &ScenarioConfig, instance: usize, agent: usize) -> SeededStream {
    let mut s = SeededStream::new(config.seed).substream(STRUCTURE);
    if config.vary() == Vary::All {
        s = s.substream(instance as u64);
    }
    s.substream(agent as u64)
}

fn sample_stream(config: &ScenarioConfig, instance: usize, agent: usize) -> SeededStream {
    SeededStream::new(config.seed).substream(SAMPLES).substream(instance as u64).substream(agent as u64)
}

/// `Q = Lᵀ diag(d) L` with `L` a product of seeded plane rotations.
fn random_psd(s: &mut SeededStream, m: usize, range: [f64; 2]) -> Matrix {
    let d: Vec<f64> = (0..m).map(|_| s.uniform(range[0], range[1])).collect();
    let mut l = Matrix::identity(m);
    for p in 0..m {
        for q in p + 1..m {
            let angle = s.uniform(0.0, 2.0 * std::f64::consts::PI);
            let (sin, cos) = angle.sin_cos();
            for c in 0..m {
                let (a, b) = (l[(p, c)], l[(q, c)]);
                l[(p, c)] = cos * a - sin * b;
                l[(q, c)] = sin * a + cos * b;
            }
        }
    }
    l.transpose().matmul(&Matrix::from_diag(&d)).matmul(&l).symmetrized()
}

/// `BBᵀ/n + δI` with `B` uniform on `[−1, 1]`.
fn random_spd(s: &mut SeededStream, n: usize, shift: f64) -> Matrix {
    let b = Matrix::from_vec(n, n, (0..n * n).map(|_| s.uniform(-1.0, 1.0)).collect());
    let mut h = b.matmul(&b.transpose());
    for r in 0..n {
        for c in 0..n {
            h[(r, c)] /= n as f64;
        }
        h[(r, r)] += shift;
    }
    h.symmetrized()
}

fn random_matrix(s: &mut SeededStream, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| scale * s.uniform(-1.0, 1.0)).collect())
}

/// Own-block diagonal shift of the generated quadratic costs.
const COST_SHIFT: f64 = 0.1;

/// Deterministic part shared by both families: own block SPD, cross blocks
/// uniform and scaled by `1/N`.
fn cost_blocks(s: &mut SeededStream, big_n: usize, n: usize, i: usize, scale: f64) -> Vec<Matrix> {
    (0..big_n)
        .map(|j| {
            let mut h = if j == i { random_spd(s, n, COST_SHIFT) } else { random_matrix(s, n, n, 1.0 / big_n as f64) };
            h.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
            h
        })
        .collect()
}

fn draw_samples(
    s: &mut SeededStream,
    config: &ScenarioConfig,
    range: [usize; 2],
) -> Matrix {
    let k = s.discrete_uniform(range[0] as i64, range[1] as i64) as usize;
    let dist = config.distribution();
    Matrix::from_vec(k, config.m, (0..k * config.m).map(|_| s.sample(&dist)).collect())
}

fn radius(s: &mut SeededStream, config: &ScenarioConfig, epsilon: f64) -> f64 {
    let [a, b] = config.multiplier_range;
    epsilon * s.discrete_uniform(a, b) as f64
}

fn gen_illustrative_instance(config: &ScenarioConfig, cell: Cell, instance: usize) -> GameSpec {
    let (big_n, n, m) = (config.num_agents, config.n, config.m);
    let agents = (0..big_n)
        .map(|i| {
            let mut s = structure_stream(config, instance, i);
            let radius = radius(&mut s, config, cell.epsilon);
            let [lo, hi] = config.coefficient_range;
            let coeffs: Vec<f64> = (0..big_n).map(|_| s.uniform(lo, hi)).collect();
            let q = random_psd(&mut s, m, config.eigen_range);
            let h = cost_blocks(&mut s, big_n, n, i, config.cost_scale());
            let c: Vec<f64> = (0..n).map(|_| config.cost_scale() * s.uniform(-1.0, 1.0)).collect();
            let mut a = Matrix::zeros(m, big_n * n);
            for (j, aj) in coeffs.iter().enumerate() {
                for r in 0..m.min(n) {
                    a[(r, j * n + r)] = *aj;
                }
            }
            let samples = draw_samples(&mut sample_stream(config, instance, i), config, cell.sample_range);
            AgentSpec {
                index: i + 1,
                n,
                m,
                h,
                c,
                a,
                b: vec![0.0; m],
                q,
                radius,
                samples,
                local_set: LocalSet::unit_box(n),
            }
        })
        .collect();
    GameSpec { num_agents: big_n, n, m, agents }
}

fn gen_portfolio_instance(config: &ScenarioConfig, cell: Cell, instance: usize) -> GameSpec {
    let (big_n, n, m) = (config.num_agents, config.n, config.m);
    let agents = (0..big_n)
        .map(|i| {
            let mut s = structure_stream(config, instance, i);
            let radius = radius(&mut s, config, cell.epsilon);
            let q = random_psd(&mut s, m, config.eigen_range);
            let h = cost_blocks(&mut s, big_n, n, i, config.cost_scale());
            let c: Vec<f64> = (0..n).map(|_| -config.cost_scale() * s.uniform(0.0, 1.0)).collect();
            let mut a = Matrix::zeros(m, big_n * n);
            for j in 0..big_n {
                for r in 0..n {
                    a[(r, j * n + r)] = 1.0;
                }
            }
            let samples = draw_samples(&mut sample_stream(config, instance, i), config, cell.sample_range);
            AgentSpec { index: i + 1, n, m, h, c, a, b: vec![0.0; m], q, radius, samples, local_set: LocalSet::Simplex }
        })
        .collect();
    GameSpec { num_agents: big_n, n, m, agents }
}

/// Instance `instance` of `cell`.
pub fn generate(config: &ScenarioConfig, cell: Cell, instance: usize) -> Result<GameSpec> {
    config.validate()?;
    Ok(match config.family {
        Family::Illustrative => gen_illustrative_instance(config, cell, instance),
        Family::Portfolio => gen_portfolio_instance(config, cell, instance),
    })
}

fn base_cell(config: &ScenarioConfig) -> Cell {
    Cell { epsilon: config.epsilon, sample_range: config.sample_range }
}

/// First illustrative instance at `config.epsilon` and `config.sample_range`.
pub fn gen_illustrative(config: &ScenarioConfig) -> Result<GameSpec> {
    if config.family != Family::Illustrative {
        return Err(Error::Config("family must be illustrative".into()));
    }
    generate(config, base_cell(config), 0)
}

/// First portfolio instance at `config.epsilon` and `config.sample_range`.
pub fn gen_portfolio(config: &ScenarioConfig) -> Result<GameSpec> {
    if config.family != Family::Portfolio {
        return Err(Error::Config("family must be portfolio".into()));
    }
    generate(config, base_cell(config), 0)
}

/// Builds the VI for a generated game.
pub fn problem_for(config: &ScenarioConfig, spec: GameSpec) -> Result<VIProblem> {
    let n = spec.num_agents;
    VIProblem::with_zeta(validate_game(spec)?, vec![config.zeta; n])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed(RunReport),
    Failed { error: String },
}

impl RunOutcome {
    pub fn report(&self) -> Option<&RunReport> {
        match self {
            RunOutcome::Completed(r) => Some(r),
            RunOutcome::Failed { .. } => None,
        }
    }

    pub fn report_mut(&mut self) -> Option<&mut RunReport> {
        match self {
            RunOutcome::Completed(r) => Some(r),
            RunOutcome::Failed { .. } => None,
        }
    }

    fn converged(&self) -> Option<&RunReport> {
        self.report().filter(|r| r.converged)
    }
}

impl From<Result<RunReport>> for RunOutcome {
    fn from(r: Result<RunReport>) -> Self {
        match r {
            Ok(r) => RunOutcome::Completed(r),
            Err(e) => RunOutcome::Failed { error: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    pub sample_counts: Vec<usize>,
    pub radii: Vec<f64>,
    pub agraal: RunOutcome,
    pub hybrid: RunOutcome,
    /// `min_λ J_i(x*, λ)` at the first converged solution (aGRAAL, then
    /// hybrid); `None` when neither converged.
    pub equilibrium_costs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub agent: usize,
    pub count: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub label: String,
    pub cell: Cell,
    pub instances: Vec<InstanceRecord>,
    pub quantiles: Vec<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ScenarioConfig,
    pub cells: Vec<CellReport>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-agent quantiles over the instances with equilibrium costs.
pub fn aggregate(num_agents: usize, instances: &[InstanceRecord]) -> Vec<Quantiles> {
    (0..num_agents)
        .map(|i| {
            let mut v: Vec<f64> = instances.iter().filter_map(|r| r.equilibrium_costs.as_ref().map(|c| c[i])).collect();
            v.sort_by(f64::total_cmp);
            Quantiles {
                agent: i + 1,
                count: v.len(),
                min: quantile(&v, 0.0),
                q25: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q75: quantile(&v, 0.75),
                max: quantile(&v, 1.0),
            }
        })
        .collect()
}

/// Worst-case cost of every agent at the strategies in `z`, with the
/// multipliers minimised exactly.
pub fn worst_case_costs(problem: &VIProblem, z: &[f64]) -> Result<Vec<f64>> {
    let x = problem.layout().collective_x(z);
    (0..problem.num_agents()).map(|i| problem.optimal_multiplier(i, &x).map(|(_, j)| j)).collect()
}

/// Generates and solves one instance with both algorithms.
pub fn run_instance(config: &ScenarioConfig, cell: Cell, instance: usize) -> Result<InstanceRecord> {
    let spec = generate(config, cell, instance)?;
    let sample_counts = spec.agents.iter().map(|a| a.sample_count()).collect();
    let radii = spec.agents.iter().map(|a| a.radius).collect();
    let problem = problem_for(config, spec)?;
    let z0 = problem.initial_point();
    let agraal: RunOutcome = agraal_solve(&problem, &config.solver, &z0).into();
    let hybrid: RunOutcome = hybrid_solve(&problem, &config.solver, &z0, &mut MedianProgress::default()).into();
    let equilibrium_costs = match agraal.converged().or(hybrid.converged()) {
        Some(r) => Some(worst_case_costs(&problem, &r.z)?),
        None => None,
    };
    Ok(InstanceRecord { instance, sample_counts, radii, agraal, hybrid, equilibrium_costs })
}

/// Solves every instance of every cell. With the `parallel` feature instances
/// run on the rayon pool; the report order is cell-major, then instance.
pub fn run_sweep(config: &ScenarioConfig) -> Result<SweepReport> {
    config.validate()?;
    let cells = config.cells();
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..config.instances).map(move |k| (c, k))).collect();
    let job = |&(c, k): &(usize, usize)| run_instance(config, cells[c], k);
    #[cfg(feature = "parallel")]
    let records: Vec<InstanceRecord> = jobs.par_iter().map(job).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let records: Vec<InstanceRecord> = jobs.iter().map(job).collect::<Result<_>>()?;
    let mut records = records.into_iter();
    let cells = cells
        .into_iter()
        .map(|cell| {
            let instances: Vec<InstanceRecord> = records.by_ref().take(config.instances).collect();
            let quantiles = aggregate(config.num_agents, &instances);
            CellReport { label: cell.label(), cell, instances, quantiles }
        })
        .collect();
    Ok(SweepReport { config: config.clone(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaPoint {
    pub zeta: f64,
    pub converged: bool,
    pub iterations: usize,
    pub z: Vec<f64>,
    pub costs: Vec<f64>,
}

/// Solves the same game for decreasing floor shifts `ζ` to show how the
/// equilibrium settles as `ζ → 0⁺`.
pub fn zeta_sweep(spec: &GameSpec, zetas: &[f64], params: &SolverParams) -> Result<Vec<ZetaPoint>> {
    let game = validate_game(spec.clone())?;
    zetas
        .iter()
        .map(|&zeta| {
            let problem = VIProblem::with_zeta(game.clone(), vec![zeta; spec.num_agents])?;
            let r = agraal_solve(&problem, params, &problem.initial_point())?;
            let costs = worst_case_costs(&problem, &r.z)?;
            Ok(ZetaPoint { zeta, converged: r.converged, iterations: r.iterations, z: r.z, costs })
        })
        .collect()
}
