//! Acceptance battery. Each test prints one `[PASS]`/`[FAIL]` line to stderr
//! (written directly, so it shows without `--nocapture`) and then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use drne::cli::{execute, Command, Invocation, Status};
use drne::experiments::{generate, problem_for, run_sweep, Cell, Family, ScenarioConfig};
use drne::game::{validate_game, AgentSpec, GameSpec};
use drne::linalg::{dot, norm, Matrix};
use drne::oracle::{best_response_gap, fd_gradient_check, linear_case_value, numeric_inner_sup, AscentParams, DEFAULT_BUDGET};
use drne::projection::LocalSet;
use drne::reformulation::{inner_sup, rotate_agent, VIProblem};
use drne::rng::SeededStream;
use drne::solver::{agraal_solve, hybrid_solve, MedianProgress, NeverSwitch, RunReport};

fn verdict(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {name}: {detail}");
}

fn illustrative(seed: u64, epsilon: f64, range: [usize; 2]) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Family::Illustrative, 4, 2, 2, seed);
    cfg.epsilon = epsilon;
    cfg.sample_range = range;
    cfg
}

fn portfolio(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Family::Portfolio, 4, 3, 3, seed);
    cfg.epsilon = 1.0;
    cfg
}

fn solve_first(cfg: &ScenarioConfig) -> (VIProblem, RunReport, RunReport) {
    let cell = Cell { epsilon: cfg.epsilon, sample_range: cfg.sample_range };
    let p = problem_for(cfg, generate(cfg, cell, 0).unwrap()).unwrap();
    let z0 = p.initial_point();
    let a = agraal_solve(&p, &cfg.solver, &z0).unwrap();
    let h = hybrid_solve(&p, &cfg.solver, &z0, &mut MedianProgress::default()).unwrap();
    (p, a, h)
}

fn random_point(p: &VIProblem, s: &mut SeededStream) -> Vec<f64> {
    let layout = p.layout();
    let mut z: Vec<f64> = (0..p.dimension()).map(|_| s.uniform(-0.5, 1.5)).collect();
    for (i, f) in p.lambda_floors().iter().enumerate() {
        z[layout.lambda_index(i)] = f + s.uniform(0.1, 5.0);
    }
    p.project(&mut z);
    z
}

#[test]
fn pseudogradient_matches_finite_differences() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut s = SeededStream::new(11);
    for seed in 0..100u64 {
        let family = if seed % 2 == 0 { Family::Illustrative } else { Family::Portfolio };
        let big_n = s.discrete_uniform(1, 4) as usize;
        let n = s.discrete_uniform(1, 3) as usize;
        let m = if family == Family::Portfolio { n } else { s.discrete_uniform(1, 3) as usize };
        let mut cfg = ScenarioConfig::new(family, big_n, n, m, seed);
        cfg.epsilon = [1e-2, 1e-1, 1.0][seed as usize % 3];
        cfg.sample_range = [1, 20];
        let p = problem_for(&cfg, generate(&cfg, Cell { epsilon: cfg.epsilon, sample_range: [1, 20] }, 0).unwrap()).unwrap();
        let z = random_point(&p, &mut s);
        worst = worst.max(fd_gradient_check(&p, &z, 1e-5).unwrap().max_rel_error);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-5 && secs < 30.0;
    verdict("pseudogradient vs central differences", pass, &format!("max rel error {worst:.2e} on 100 instances in {secs:.2}s"));
    assert!(pass);
}

#[test]
fn inner_supremum_matches_ascent() {
    let mut s = SeededStream::new(23);
    let mut worst = 0.0f64;
    let mut triples = 0;
    let mut seed = 0;
    while triples < 500 {
        let m = 1 + seed % 5;
        let n = s.discrete_uniform(1, 3) as usize;
        let mut cfg = ScenarioConfig::new(Family::Illustrative, 2, n, m, seed as u64);
        cfg.sample_range = [1, 10];
        let spec = generate(&cfg, Cell { epsilon: 0.1, sample_range: [1, 10] }, 0).unwrap();
        let p = problem_for(&cfg, spec).unwrap();
        for _ in 0..5 {
            let z = random_point(&p, &mut s);
            let x = p.layout().collective_x(&z);
            let i = s.discrete_uniform(0, 1) as usize;
            let agent = &p.game().agents()[i];
            let k = s.discrete_uniform(0, agent.sample_count() as i64 - 1) as usize;
            let lambda = p.lambda_floors()[i] + s.uniform(0.05, 5.0);
            let closed = inner_sup(&p.rotated()[i], &x, lambda, k).unwrap();
            let numeric = numeric_inner_sup(agent, &x, lambda, k, AscentParams::default()).unwrap();
            worst = worst.max((closed - numeric).abs() / closed.abs().max(1.0));
            triples += 1;
        }
        seed += 1;
    }

    let agent = AgentSpec {
        index: 1,
        n: 1,
        m: 1,
        h: vec![Matrix::zeros(1, 1)],
        c: vec![0.0],
        a: Matrix::zeros(1, 1),
        b: vec![1.0],
        q: Matrix::from_diag(&[0.5]),
        radius: 0.1,
        samples: Matrix::from_diag(&[1.0]),
        local_set: LocalSet::unit_box(1),
    };
    let analytic = inner_sup(&rotate_agent(&agent, 1e-6).unwrap(), &[0.0], 2.0, 0).unwrap();
    let analytic_err = (analytic - 13.0 / 6.0).abs();
    let pass = worst <= 1e-6 && analytic_err <= 1e-12;
    verdict(
        "closed-form inner supremum",
        pass,
        &format!("max rel error {worst:.2e} on {triples} triples; analytic case off by {analytic_err:.1e}"),
    );
    assert!(pass);
}

#[test]
fn linear_case_duality() {
    let mut s = SeededStream::new(37);
    let (mut value_err, mut lambda_err) = (0.0f64, 0.0f64);
    for case in 0..100 {
        let m = 1 + case % 3;
        let n = 1 + (case / 3) % 3;
        let k = s.discrete_uniform(1, 20) as usize;
        let radius = s.uniform(0.05, 2.0);
        let agent = AgentSpec {
            index: 1,
            n,
            m,
            h: vec![Matrix::identity(n)],
            c: vec![0.0; n],
            a: Matrix::from_vec(m, n, (0..m * n).map(|_| s.uniform(-1.0, 1.0)).collect()),
            b: (0..m).map(|_| s.uniform(-1.0, 1.0)).collect(),
            q: Matrix::zeros(m, m),
            radius,
            samples: Matrix::from_vec(k, m, (0..k * m).map(|_| s.uniform(-1.0, 1.0)).collect()),
            local_set: LocalSet::Box { lo: vec![-1.0; n], hi: vec![1.0; n] },
        };
        let x: Vec<f64> = (0..n).map(|_| s.uniform(-1.0, 1.0)).collect();
        let p = agent.affine_term(&x);
        let mean: f64 = (0..k).map(|r| dot(&p, agent.samples.row(r))).sum::<f64>() / k as f64;
        let expected_value = mean + radius * norm(&p);
        let expected_lambda = norm(&p) / (2.0 * radius);

        let game = validate_game(GameSpec { num_agents: 1, n, m, agents: vec![agent.clone()] }).unwrap();
        let problem = VIProblem::new(game).unwrap();
        let (lambda, j) = problem.optimal_multiplier(0, &x).unwrap();
        let f = dot(&x, &x);
        value_err = value_err.max((j - f - expected_value).abs());
        lambda_err = lambda_err.max((lambda - expected_lambda).abs());
        let (oracle_value, _) = linear_case_value(&agent, &x).unwrap();
        value_err = value_err.max((oracle_value - expected_value).abs());
    }
    let pass = value_err <= 1e-6 && lambda_err <= 1e-6;
    verdict("linear-case duality", pass, &format!("value error {value_err:.2e}, multiplier error {lambda_err:.2e} on 100 cases"));
    assert!(pass);
}

/// Median of `r_{k+1}/r_k` over the second half of the trace.
fn trailing_contraction(r: &RunReport) -> f64 {
    let t = &r.trace[r.trace.len() / 2..];
    let mut ratios: Vec<f64> = t.windows(2).filter(|w| w[0].residual > 0.0).map(|w| w[1].residual / w[0].residual).collect();
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.sort_by(f64::total_cmp);
    ratios[ratios.len() / 2]
}

#[test]
fn illustrative_instances_converge() {
    let mut failures = Vec::new();
    let mut worst_iters = (0, 0);
    let mut worst_contraction = 0.0f64;
    for seed in 1..=10 {
        let (_, a, h) = solve_first(&illustrative(seed, 1e-2, [10, 20]));
        for r in [&a, &h] {
            let c = trailing_contraction(r);
            worst_contraction = worst_contraction.max(c);
            if !(r.converged && r.final_residual <= 1e-6 && r.iterations <= 5000 && c < 1.0) {
                failures.push(format!("seed {seed} {} ({} iterations)", r.algorithm, r.iterations));
            }
        }
        worst_iters = (worst_iters.0.max(a.iterations), worst_iters.1.max(h.iterations));
    }
    let pass = failures.is_empty();
    let mut detail = format!(
        "max iterations agraal {} hybrid {}, worst trailing contraction {worst_contraction:.4}",
        worst_iters.0, worst_iters.1
    );
    if !pass {
        detail.push_str(&format!("; over budget: {}", failures.join(", ")));
    }
    verdict("residual <= 1e-6 within 5000 iterations on seeds 1..10", pass, &detail);
    assert!(pass);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn iterations_and_cost_scale_with_samples() {
    let iters = |range| {
        median((1..=10).map(|seed| solve_first(&illustrative(seed, 1e-2, range)).1.iterations as f64).collect())
    };
    let (small, large) = (iters([10, 20]), iters([80, 120]));
    let ratio = small.max(large) / small.min(large);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in [20usize, 80, 320] {
        let mut per_iter = Vec::new();
        for seed in 1..=10 {
            let cfg = illustrative(seed, 1e-2, [k, k]);
            let p = problem_for(&cfg, generate(&cfg, Cell { epsilon: 1e-2, sample_range: [k, k] }, 0).unwrap()).unwrap();
            let mut params = cfg.solver;
            params.tol = 0.0;
            params.max_iters = 2000;
            let r = agraal_solve(&p, &params, &p.initial_point()).unwrap();
            per_iter.push(r.wall_time_secs / r.iterations as f64);
        }
        xs.push(((4 * k) as f64).ln());
        ys.push(median(per_iter).ln());
    }
    let mx = xs.iter().sum::<f64>() / 3.0;
    let my = ys.iter().sum::<f64>() / 3.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();

    let pass = ratio <= 2.0 && slope <= 1.2;
    verdict(
        "sample scalability",
        pass,
        &format!("median iterations K[10,20] {small} vs K[80,120] {large} (ratio {ratio:.2}); per-iteration time slope {slope:.2}"),
    );
    assert!(pass);
}

fn sweep_config(epsilons: Vec<f64>, ranges: Vec<[usize; 2]>) -> ScenarioConfig {
    let mut cfg = illustrative(42, 1e-2, [10, 20]);
    cfg.epsilon_grid = epsilons;
    cfg.sample_grid = ranges;
    cfg.instances = 10;
    cfg
}

#[test]
fn costs_increase_with_radius() {
    let report = run_sweep(&sweep_config(vec![1e-6, 1e-3, 1e-2, 1.0], vec![])).unwrap();
    let mut bad = Vec::new();
    for agent in 0..4 {
        let medians: Vec<f64> = report.cells.iter().map(|c| c.quantiles[agent].median).collect();
        let complete = report.cells.iter().all(|c| c.quantiles[agent].count == 10);
        if !complete || medians.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            bad.push(format!("agent {} medians {medians:?}", agent + 1));
        }
    }
    let pass = bad.is_empty();
    let detail = if pass { "median cost strictly increasing for all 4 agents".to_string() } else { bad.join("; ") };
    verdict("cost monotone in radius", pass, &detail);
    assert!(pass);
}

#[test]
fn cost_spread_shrinks_with_samples() {
    let report = run_sweep(&sweep_config(vec![], vec![[10, 20], [200, 300]])).unwrap();
    let (few, many) = (&report.cells[0].quantiles, &report.cells[1].quantiles);
    let pairs: Vec<(f64, f64)> = few.iter().zip(many).map(|(a, b)| (a.iqr(), b.iqr())).collect();
    let pass = pairs.iter().all(|(a, b)| b < a) && few.iter().chain(many).all(|q| q.count == 10);
    let detail: Vec<String> = pairs.iter().enumerate().map(|(i, (a, b))| format!("agent {} {a:.3e} -> {b:.3e}", i + 1)).collect();
    verdict("cost IQR shrinks with more samples", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn reported_solutions_are_equilibria() {
    let mut solutions: Vec<(String, VIProblem, Vec<f64>)> = Vec::new();
    for seed in 1..=10 {
        for (label, cfg) in [("illustrative", illustrative(seed, 1e-2, [10, 20])), ("portfolio", portfolio(seed))] {
            let (p, a, h) = solve_first(&cfg);
            for r in [a, h] {
                if r.converged {
                    solutions.push((format!("{label} seed {seed} {}", r.algorithm), p.clone(), r.z));
                }
            }
        }
    }
    let mut worst_gap = 0.0f64;
    let mut bad = Vec::new();
    for (label, p, z) in &solutions {
        let gap = best_response_gap(p, z, DEFAULT_BUDGET).unwrap().into_iter().fold(0.0, f64::max);
        worst_gap = worst_gap.max(gap);
        let layout = p.layout();
        let floors_ok = p.lambda_floors().iter().enumerate().all(|(i, f)| z[layout.lambda_index(i)] >= *f);
        let sets_ok = p.is_feasible(z, 1e-9)
            && p.local_sets().iter().enumerate().all(|(i, set)| match set {
                LocalSet::Simplex => (layout.x(z, i).iter().sum::<f64>() - 1.0).abs() <= 1e-9,
                _ => true,
            });
        if gap > 1e-5 || !floors_ok || !sets_ok {
            bad.push(format!("{label}: gap {gap:.2e}, floors {floors_ok}, sets {sets_ok}"));
        }
    }
    let pass = bad.is_empty() && !solutions.is_empty();
    let mut detail = format!("{} solutions, worst best-response gap {worst_gap:.2e}", solutions.len());
    if !pass {
        detail.push_str(&format!("; {}", bad.join("; ")));
    }
    verdict("equilibrium certification", pass, &detail);
    assert!(pass);
}

#[test]
fn hybrid_degenerates_and_competes() {
    let mut identical = 0;
    for seed in 1..=10 {
        let cfg = illustrative(seed, 1e-2, [10, 20]);
        let p = problem_for(&cfg, generate(&cfg, Cell { epsilon: 1e-2, sample_range: [10, 20] }, 0).unwrap()).unwrap();
        let z0 = p.initial_point();
        let a = agraal_solve(&p, &cfg.solver, &z0).unwrap();
        let h = hybrid_solve(&p, &cfg.solver, &z0, &mut NeverSwitch).unwrap();
        let same_bits = a.trace.len() == h.trace.len()
            && a.trace.iter().zip(&h.trace).all(|(x, y)| {
                x.iter == y.iter
                    && x.residual.to_bits() == y.residual.to_bits()
                    && x.tau.to_bits() == y.tau.to_bits()
                    && x.phi.to_bits() == y.phi.to_bits()
            })
            && a.z.iter().zip(&h.z).all(|(x, y)| x.to_bits() == y.to_bits());
        identical += same_bits as usize;
    }

    let mut fewer = 0;
    let mut within = 0;
    let mut pairs = Vec::new();
    for seed in 1..=10 {
        let (_, a, h) = solve_first(&portfolio(seed));
        let ok = a.converged && h.converged;
        if ok && h.iterations <= 2 * a.iterations {
            within += 1;
        }
        if ok && h.iterations < a.iterations {
            fewer += 1;
        }
        pairs.push(format!("{}/{}", h.iterations, a.iterations));
    }
    let pass = identical == 10 && within == 10 && fewer >= 5;
    verdict(
        "hybrid vs aGRAAL",
        pass,
        &format!(
            "never-switch identical on {identical}/10; hybrid/aGRAAL iterations {}; fewer on {fewer}/10",
            pairs.join(" ")
        ),
    );
    assert!(pass);
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn sweeps_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sweep.json");
    let cfg = sweep_config(vec![1e-6, 1e-3, 1e-2, 1.0], vec![]);
    std::fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    let mut trees = Vec::new();
    for run in 0..2 {
        let mut inv = Invocation::new(Command::Sweep, &config);
        inv.out_dir = Some(tmp.path().join(format!("run{run}")));
        let o = execute(&inv);
        assert_eq!(o.status, Status::Ok, "{}", o.message);
        trees.push(read_tree(inv.out_dir.as_ref().unwrap()));
    }
    let pass = trees[0] == trees[1] && trees[0].len() > 3;
    verdict("deterministic sweep output", pass, &format!("{} files compared byte for byte", trees[0].len()));
    assert!(pass);
}
