//! Batch entry point behind the `drne` binary.
//!
//! Every subcommand reads one JSON file and writes data files into an output
//! directory (`--out`, else `$DRNE_OUT_DIR`, else `./out`):
//!
//! | subcommand | files |
//! |------------|-------|
//! | `generate` | `gamespec.json` |
//! | `solve`    | `run_report.json`, `residual_trace_<alg>.csv` |
//! | `sweep`    | `sweep_report.json`, `cost_quantiles.csv`, `traces/<cell>/instance_<k>_<alg>.csv` |
//! | `verify`   | `oracle_report.json` |
//!
//! plus `manifest.json`, which lists every file with a description of the plot
//! it feeds. Trace CSVs have the header `iter,residual,tau,phi`; the quantile
//! table has `agent,cell,min,q25,median,q75,max`. With `--format json` traces
//! are written as JSON arrays instead.
//!
//! `generate`, `sweep` and `verify` take a [`ScenarioConfig`]. `solve` also
//! accepts a bare game (as written by `generate`) or `{"game": …, "solver": …}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{generate, problem_for, run_sweep, Cell, ScenarioConfig, SweepReport};
use crate::game::{validate_game, GameSpec};
use crate::oracle::{best_response_gap, fd_gradient_check, numeric_inner_sup, AscentParams, DEFAULT_BUDGET};
use crate::reformulation::{inner_sup, VIProblem, DEFAULT_ZETA};
use crate::rng::SeededStream;
use crate::solver::{agraal_solve, hybrid_solve, MedianProgress, RunReport, SolverParams, TraceRow};

pub const OUT_DIR_ENV: &str = "DRNE_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Solve,
    Sweep,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    Agraal,
    Hybrid,
    #[default]
    Both,
}

impl Algorithm {
    fn names(self) -> &'static [&'static str] {
        match self {
            Algorithm::Agraal => &["agraal"],
            Algorithm::Hybrid => &["hybrid"],
            Algorithm::Both => &["agraal", "hybrid"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub algorithm: Algorithm,
    pub format: Format,
}

impl Invocation {
    pub fn new(command: Command, config: impl Into<PathBuf>) -> Self {
        Self { command, config: config.into(), out_dir: None, seed: None, algorithm: Algorithm::Both, format: Format::Csv }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Validation = 1,
    NoConvergence = 2,
    OracleGate = 3,
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    pub message: String,
}

impl Outcome {
    pub fn code(&self) -> i32 {
        self.status as i32
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    description: String,
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
    manifest: Vec<ManifestEntry>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new(), manifest: Vec::new() })
    }

    fn path(&mut self, rel: &str, description: &str) -> Result<PathBuf> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.manifest.push(ManifestEntry { file: rel.to_string(), description: description.to_string() });
        self.files.push(p.clone());
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, rel: &str, description: &str, value: &T) -> Result<()> {
        let p = self.path(rel, description)?;
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        fs::write(p, s)?;
        Ok(())
    }

    fn trace(&mut self, stem: &str, format: Format, trace: &[TraceRow], description: &str) -> Result<()> {
        match format {
            Format::Json => self.json(&format!("{stem}.json"), description, &trace),
            Format::Csv => {
                let p = self.path(&format!("{stem}.csv"), description)?;
                write_csv(&p, trace)
            }
        }
    }

    fn finish(mut self) -> Result<Vec<PathBuf>> {
        let manifest = std::mem::take(&mut self.manifest);
        self.json("manifest.json", "index of the files in this directory", &manifest)?;
        Ok(self.files)
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// A `solve` input that is not a scenario config.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameInput {
    game: GameSpec,
    #[serde(default)]
    solver: SolverParams,
    #[serde(default)]
    zeta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SolveInput {
    Scenario(ScenarioConfig),
    Game(GameInput),
    Bare(GameSpec),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_scenario(inv: &Invocation) -> Result<ScenarioConfig> {
    let mut cfg: ScenarioConfig = read_json(&inv.config)?;
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn base_cell(cfg: &ScenarioConfig) -> Cell {
    Cell { epsilon: cfg.epsilon, sample_range: cfg.sample_range }
}

/// Runs one invocation. Never panics on bad input; the status carries the
/// exit code.
pub fn execute(inv: &Invocation) -> Outcome {
    let result = match inv.command {
        Command::Generate => cmd_generate(inv),
        Command::Solve => cmd_solve(inv),
        Command::Sweep => cmd_sweep(inv),
        Command::Verify => cmd_verify(inv),
    };
    match result {
        Ok(o) => o,
        Err(e) => {
            let status = match e {
                Error::NonFinite { .. } | Error::NoConvergence(_) => Status::NoConvergence,
                _ => Status::Validation,
            };
            let mut files = Vec::new();
            if let Error::NonFinite { iter, ref z } = e {
                let dir = inv.out_dir();
                let p = dir.join("diagnostic.json");
                let dump = serde_json::json!({ "error": e.to_string(), "iter": iter, "z": z });
                if fs::create_dir_all(&dir).is_ok() && fs::write(&p, dump.to_string()).is_ok() {
                    files.push(p);
                }
            }
            Outcome { status, files, message: e.to_string() }
        }
    }
}

fn cmd_generate(inv: &Invocation) -> Result<Outcome> {
    let cfg = read_scenario(inv)?;
    let spec = generate(&cfg, base_cell(&cfg), 0)?;
    validate_game(spec.clone())?;
    let mut out = Output::new(inv.out_dir())?;
    out.json("gamespec.json", "generated game (input for solve)", &spec)?;
    let files = out.finish()?;
    Ok(Outcome { status: Status::Ok, files, message: format!("generated {} agents", spec.num_agents) })
}

fn load_problem(inv: &Invocation) -> Result<(VIProblem, SolverParams)> {
    match read_json::<SolveInput>(&inv.config)? {
        SolveInput::Scenario(mut cfg) => {
            if let Some(seed) = inv.seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            let spec = generate(&cfg, base_cell(&cfg), 0)?;
            Ok((problem_for(&cfg, spec)?, cfg.solver))
        }
        SolveInput::Game(g) => {
            let n = g.game.num_agents;
            let p = VIProblem::with_zeta(validate_game(g.game)?, vec![g.zeta.unwrap_or(DEFAULT_ZETA); n])?;
            Ok((p, g.solver))
        }
        SolveInput::Bare(spec) => Ok((VIProblem::new(validate_game(spec)?)?, SolverParams::default())),
    }
}

fn run(alg: &str, problem: &VIProblem, params: &SolverParams, z0: &[f64]) -> Result<RunReport> {
    match alg {
        "agraal" => agraal_solve(problem, params, z0),
        _ => hybrid_solve(problem, params, z0, &mut MedianProgress::default()),
    }
}

fn without_trace(r: &RunReport) -> RunReport {
    RunReport { trace: Vec::new(), ..r.clone() }
}

#[derive(Serialize)]
struct SolveReport {
    solver: SolverParams,
    runs: Vec<RunReport>,
}

fn cmd_solve(inv: &Invocation) -> Result<Outcome> {
    let (problem, params) = load_problem(inv)?;
    let z0 = problem.initial_point();
    let mut out = Output::new(inv.out_dir())?;
    let mut runs = Vec::new();
    for &alg in inv.algorithm.names() {
        let r = run(alg, &problem, &params, &z0)?;
        out.trace(
            &format!("residual_trace_{alg}"),
            inv.format,
            &r.trace,
            &format!("{alg}: natural residual, stepsize and momentum per iteration (log-residual vs iteration plot)"),
        )?;
        runs.push(r);
    }
    let all_converged = runs.iter().all(|r| r.converged);
    let summary: Vec<String> =
        runs.iter().map(|r| format!("{}: {} iterations, residual {:.3e}", r.algorithm, r.iterations, r.final_residual)).collect();
    let report = SolveReport { solver: params, runs: runs.iter().map(without_trace).collect() };
    out.json("run_report.json", "final iterate, equilibrium costs and iteration counts per algorithm", &report)?;
    let files = out.finish()?;
    let status = if all_converged { Status::Ok } else { Status::NoConvergence };
    Ok(Outcome { status, files, message: summary.join("; ") })
}

#[derive(Serialize)]
struct QuantileRow<'a> {
    agent: usize,
    cell: &'a str,
    min: f64,
    q25: f64,
    median: f64,
    q75: f64,
    max: f64,
}

fn cell_dir(label: &str) -> String {
    label.replace('/', "_")
}

fn cmd_sweep(inv: &Invocation) -> Result<Outcome> {
    let cfg = read_scenario(inv)?;
    let report = run_sweep(&cfg)?;
    let mut out = Output::new(inv.out_dir())?;
    write_sweep(&mut out, &report, inv)?;
    let failures: usize = report
        .cells
        .iter()
        .flat_map(|c| &c.instances)
        .filter(|r| r.equilibrium_costs.is_none())
        .count();
    let files = out.finish()?;
    Ok(Outcome {
        status: Status::Ok,
        files,
        message: format!("{} cells x {} instances, {failures} without a converged solution", report.cells.len(), cfg.instances),
    })
}

fn write_sweep(out: &mut Output, report: &SweepReport, inv: &Invocation) -> Result<()> {
    let mut stripped = report.clone();
    for cell in &mut stripped.cells {
        let dir = cell_dir(&cell.label);
        for rec in &mut cell.instances {
            for (alg, outcome) in [("agraal", &mut rec.agraal), ("hybrid", &mut rec.hybrid)] {
                if !inv.algorithm.names().contains(&alg) {
                    continue;
                }
                if let Some(r) = outcome.report_mut() {
                    out.trace(
                        &format!("traces/{dir}/instance_{}_{alg}", rec.instance),
                        inv.format,
                        &r.trace,
                        &format!("{alg} residual trace, {} instance {}", cell.label, rec.instance),
                    )?;
                    r.trace.clear();
                }
            }
        }
    }
    out.json("sweep_report.json", "per-instance solver summaries and per-agent cost quantiles", &stripped)?;
    let mut rows = Vec::new();
    for cell in &report.cells {
        for q in &cell.quantiles {
            rows.push(QuantileRow {
                agent: q.agent,
                cell: &cell.label,
                min: q.min,
                q25: q.q25,
                median: q.median,
                q75: q.q75,
                max: q.max,
            });
        }
    }
    let p = out.path("cost_quantiles.csv", "equilibrium cost quantiles per agent and cell (box plot per agent)")?;
    write_csv(&p, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub gates: Vec<Gate>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }
}

fn gate(name: &str, value: f64, threshold: f64) -> Gate {
    Gate { name: name.to_string(), passed: value <= threshold, value, threshold }
}

const VERIFY_STREAM: u64 = 3;
const VERIFY_POINTS: usize = 5;

/// Oracle battery on the first instance of `cfg`.
pub fn oracle_battery(cfg: &ScenarioConfig) -> Result<OracleReport> {
    let problem = problem_for(cfg, generate(cfg, base_cell(cfg), 0)?)?;
    let layout = problem.layout();
    let floors = problem.lambda_floors().to_vec();
    let mut rng = SeededStream::new(cfg.seed).substream(VERIFY_STREAM);

    let mut points = Vec::new();
    for _ in 0..VERIFY_POINTS {
        let mut z: Vec<f64> = (0..problem.dimension()).map(|_| rng.uniform(0.0, 1.0)).collect();
        for (i, f) in floors.iter().enumerate() {
            z[layout.lambda_index(i)] = f + rng.uniform(0.5, 5.0);
        }
        problem.project(&mut z);
        points.push(z);
    }
    let mut grad = 0.0f64;
    for z in &points {
        grad = grad.max(fd_gradient_check(&problem, z, 1e-5)?.max_rel_error);
    }

    let mut sup = 0.0f64;
    for z in &points {
        let x = layout.collective_x(z);
        for (i, agent) in problem.game().agents().iter().enumerate() {
            let lambda = z[layout.lambda_index(i)];
            for k in 0..agent.sample_count().min(3) {
                let closed = inner_sup(&problem.rotated()[i], &x, lambda, k)?;
                let numeric = numeric_inner_sup(agent, &x, lambda, k, AscentParams::default())?;
                sup = sup.max((closed - numeric).abs() / closed.abs().max(1.0));
            }
        }
    }

    let r = agraal_solve(&problem, &cfg.solver, &problem.initial_point())?;
    let feasible = if problem.is_feasible(&r.z, 1e-9) { 0.0 } else { 1.0 };
    let gap = best_response_gap(&problem, &r.z, DEFAULT_BUDGET)?.into_iter().fold(0.0, f64::max);
    Ok(OracleReport {
        seed: cfg.seed,
        gates: vec![
            gate("gradient_fd_rel_error", grad, 1e-5),
            gate("inner_sup_rel_error", sup, 1e-6),
            gate("solver_residual", r.final_residual, cfg.solver.tol),
            gate("feasibility_violation", feasible, 0.0),
            gate("best_response_gap", gap, 10.0 * cfg.solver.tol),
        ],
    })
}

fn cmd_verify(inv: &Invocation) -> Result<Outcome> {
    let cfg = read_scenario(inv)?;
    let report = oracle_battery(&cfg)?;
    let mut out = Output::new(inv.out_dir())?;
    out.json("oracle_report.json", "pass/fail per oracle gate", &report)?;
    let files = out.finish()?;
    let failed: Vec<&str> = report.gates.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
    if failed.is_empty() {
        Ok(Outcome { status: Status::Ok, files, message: format!("{} gates passed", report.gates.len()) })
    } else {
        Ok(Outcome { status: Status::OracleGate, files, message: format!("failed gates: {}", failed.join(", ")) })
    }
}
