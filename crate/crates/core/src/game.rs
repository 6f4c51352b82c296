//! Game data and validation.
//!
//! Agent `i` has cost `f_i(x) + sup_{Q ∈ P_i} E_Q[ξᵀQ_iξ + P_i(x)ᵀξ]` with
//!
//! - `f_i(x) = Σ_j x_iᵀ H_i[j] x_j + c_iᵀ x_i` (quadratic deterministic part),
//! - `P_i(x) = A_i x + b_i`, `A_i` of shape `m × nN` split into `m × n` blocks,
//! - `P_i` the Wasserstein ball of radius `ε_i` around the empirical
//!   distribution of the agent's own `K_i` samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::linalg::{dot, Matrix};
use crate::projection::LocalSet;
use crate::spectral::{eigendecompose, SpectralDecomposition, SYMMETRY_TOL};

/// Eigenvalues down to `-PSD_TOL` are accepted (and clipped) as zero.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    /// 1-based agent identifier.
    pub index: usize,
    pub n: usize,
    pub m: usize,
    /// `H[j]` multiplies `x_iᵀ · x_j`; `H[index - 1]` is the own quadratic block.
    #[serde(rename = "H")]
    pub h: Vec<Matrix>,
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Matrix,
    pub b: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Matrix,
    pub radius: f64,
    /// `K × m`, one sample per row.
    pub samples: Matrix,
    pub local_set: LocalSet,
}

impl AgentSpec {
    pub fn sample_count(&self) -> usize {
        self.samples.rows()
    }

    /// `P_i(x) = A x + b`.
    pub fn affine_term(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.a.matvec(x);
        p.iter_mut().zip(&self.b).for_each(|(p, b)| *p += b);
        p
    }

    /// Block `A^(j)` (0-based `j`) multiplying `x_j`.
    pub fn a_block(&self, j: usize) -> Matrix {
        self.a.col_block(j * self.n, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    #[serde(rename = "N")]
    pub num_agents: usize,
    pub n: usize,
    pub m: usize,
    pub agents: Vec<AgentSpec>,
}

/// A game that passed [`validate_game`], with cached spectral certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedGame {
    spec: GameSpec,
    q_spectra: Vec<SpectralDecomposition>,
    warnings: Vec<Violation>,
}

impl ValidatedGame {
    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.spec.agents
    }

    pub fn num_agents(&self) -> usize {
        self.spec.num_agents
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    /// Eigendecomposition of each agent's (possibly clipped) `Q`.
    pub fn q_spectra(&self) -> &[SpectralDecomposition] {
        &self.q_spectra
    }

    /// Near-tolerance repairs applied during validation.
    pub fn warnings(&self) -> &[Violation] {
        &self.warnings
    }

    pub fn into_spec(self) -> GameSpec {
        self.spec
    }
}

/// Checks every structural and convexity requirement, collecting all
/// violations. Matrices that miss symmetry or PSD by less than the tolerance
/// are repaired and reported as warnings. Agents are reordered by index.
pub fn validate_game(mut spec: GameSpec) -> Result<ValidatedGame> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let (big_n, n, m) = (spec.num_agents, spec.n, spec.m);
    let game_err = |msg: String| Violation { agent: None, message: msg };

    if spec.agents.len() != big_n {
        errors.push(game_err(format!("N = {big_n} but {} agents given", spec.agents.len())));
    }
    let mut seen = vec![false; spec.agents.len()];
    for a in &spec.agents {
        match a.index.checked_sub(1).filter(|&k| k < seen.len()) {
            Some(k) if !seen[k] => seen[k] = true,
            Some(_) => errors.push(game_err(format!("agent index {} appears twice", a.index))),
            None => errors.push(game_err(format!("agent index {} out of range 1..={}", a.index, spec.agents.len()))),
        }
    }
    if !errors.is_empty() {
        return Err(Error::InvalidGame(errors));
    }
    spec.agents.sort_by_key(|a| a.index);

    let mut q_spectra = Vec::with_capacity(big_n);
    for agent in &mut spec.agents {
        let before = errors.len();
        let mut err = |msg: String| errors.push(Violation { agent: Some(agent.index), message: msg });
        let i = agent.index - 1;

        if agent.n != n || agent.m != m {
            err(format!("agent dims (n={}, m={}) differ from game dims (n={n}, m={m})", agent.n, agent.m));
        }
        if agent.h.len() != big_n {
            err(format!("H has {} blocks, expected {big_n}", agent.h.len()));
        }
        for (j, hj) in agent.h.iter().enumerate() {
            if hj.shape() != (n, n) {
                err(format!("H[{j}] has shape {:?}, expected ({n}, {n})", hj.shape()));
            }
        }
        if agent.c.len() != n {
            err(format!("c has length {}, expected {n}", agent.c.len()));
        }
        if agent.a.shape() != (m, n * big_n) {
            err(format!("A has shape {:?}, expected ({m}, {})", agent.a.shape(), n * big_n));
        }
        if agent.b.len() != m {
            err(format!("b has length {}, expected {m}", agent.b.len()));
        }
        if agent.q.shape() != (m, m) {
            err(format!("Q has shape {:?}, expected ({m}, {m})", agent.q.shape()));
        }
        if !(agent.radius >= 0.0) || !agent.radius.is_finite() {
            err(format!("radius must be finite and >= 0, got {}", agent.radius));
        }
        if agent.samples.rows() == 0 {
            err("empty sample set".into());
        } else if agent.samples.cols() != m {
            err(format!("samples have {} columns, expected {m}", agent.samples.cols()));
        }
        if let Err(msg) = agent.local_set.check(n) {
            err(msg);
        }
        let finite = agent.h.iter().all(Matrix::is_finite)
            && agent.a.is_finite()
            && agent.q.is_finite()
            && agent.samples.is_finite()
            && agent.c.iter().chain(&agent.b).all(|v| v.is_finite());
        if !finite {
            err("non-finite entries".into());
        }
        if errors.len() > before {
            continue;
        }

        let idx = agent.index;
        let mut warn = |msg: String| warnings.push(Violation { agent: Some(idx), message: msg });
        let mut errs = Vec::new();

        match certify_psd(&agent.h[i], "H[i]", &mut warn) {
            Ok((h, _)) => agent.h[i] = h,
            Err(msg) => errs.push(msg),
        }
        match certify_psd(&agent.q, "Q", &mut warn) {
            Ok((q, spectrum)) => {
                agent.q = q;
                q_spectra.push(spectrum);
            }
            Err(msg) => errs.push(msg),
        }
        errors.extend(errs.into_iter().map(|message| Violation { agent: Some(idx), message }));
    }

    if errors.is_empty() {
        Ok(ValidatedGame { spec, q_spectra, warnings })
    } else {
        Err(Error::InvalidGame(errors))
    }
}

/// Symmetry and PSD check with repair inside tolerance. Returns the (possibly
/// repaired) matrix and its spectrum.
fn certify_psd(
    mat: &Matrix,
    name: &str,
    warn: &mut impl FnMut(String),
) -> std::result::Result<(Matrix, SpectralDecomposition), String> {
    let asym = mat.asymmetry();
    if asym > SYMMETRY_TOL * mat.max_abs().max(1.0) {
        return Err(format!("{name} not symmetric (asymmetry {asym:.3e})"));
    }
    let mut out = mat.clone();
    if asym > 0.0 {
        out = out.symmetrized();
        warn(format!("{name} symmetrized (asymmetry {asym:.3e})"));
    }
    let mut spectrum = eigendecompose(&out).map_err(|e| format!("{name}: {e}"))?;
    let min = spectrum.lambda_min();
    if min < -PSD_TOL {
        return Err(format!("{name} not PSD (min eigenvalue {min:.3e})"));
    }
    if min < 0.0 {
        spectrum.d.iter_mut().for_each(|d| *d = d.max(0.0));
        out = spectrum.reconstruct();
        warn(format!("{name} eigenvalue {min:.3e} clipped to 0"));
    }
    Ok((out, spectrum))
}

/// Extension point for non-quadratic deterministic costs: value and gradient
/// with respect to the agent's own block.
pub trait DeterministicCost: Send + Sync {
    fn value_and_gradient(&self, agent: &AgentSpec, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// The quadratic family `Σ_j x_iᵀ H[j] x_j + cᵀ x_i`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticCost;

impl DeterministicCost for QuadraticCost {
    fn value_and_gradient(&self, agent: &AgentSpec, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        deterministic_cost(agent, x)
    }
}

/// `f_i(x)` and `∇_{x_i} f_i(x)` for the collective decision `x` of length `nN`.
pub fn deterministic_cost(agent: &AgentSpec, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = agent.n;
    let big_n = agent.h.len();
    if x.len() != n * big_n {
        return Err(Error::Dimension(format!("x has length {}, expected {}", x.len(), n * big_n)));
    }
    let i = agent.index - 1;
    let xi = &x[i * n..(i + 1) * n];

    let mut value = dot(&agent.c, xi);
    let mut grad = agent.c.clone();
    for (j, hj) in agent.h.iter().enumerate() {
        let xj = &x[j * n..(j + 1) * n];
        let hx = hj.matvec(xj);
        value += dot(xi, &hx);
        grad.iter_mut().zip(&hx).for_each(|(g, v)| *g += v);
        if j == i {
            // own block contributes (H + Hᵀ) x_i
            let htx = hj.tr_matvec(xi);
            grad.iter_mut().zip(&htx).for_each(|(g, v)| *g += v);
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    pub fn scalar_agent(q: f64) -> AgentSpec {
        AgentSpec {
            index: 1,
            n: 1,
            m: 1,
            h: vec![m(&[&[0.0]])],
            c: vec![0.0],
            a: m(&[&[1.0]]),
            b: vec![0.0],
            q: m(&[&[q]]),
            radius: 0.5,
            samples: m(&[&[0.0]]),
            local_set: LocalSet::unit_box(1),
        }
    }

    fn single(agent: AgentSpec) -> GameSpec {
        GameSpec { num_agents: 1, n: 1, m: 1, agents: vec![agent] }
    }

    fn messages(e: Error) -> Vec<String> {
        match e {
            Error::InvalidGame(v) => v.into_iter().map(|v| v.message).collect(),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn minimal_game_is_valid() {
        let g = validate_game(single(scalar_agent(0.5))).unwrap();
        assert!(g.warnings().is_empty());
        assert_eq!(g.q_spectra()[0].d, vec![0.5]);
    }

    #[test]
    fn indefinite_q_rejected() {
        let msgs = messages(validate_game(single(scalar_agent(-1.0))).unwrap_err());
        assert!(msgs.iter().any(|s| s.contains("Q not PSD")), "{msgs:?}");
    }

    #[test]
    fn wrong_a_columns_rejected() {
        let mut a1 = scalar_agent(0.5);
        a1.h = vec![m(&[&[0.0]]), m(&[&[0.0]])];
        a1.a = m(&[&[1.0, 1.0]]);
        let mut a2 = a1.clone();
        a2.index = 2;
        a2.a = m(&[&[1.0, 1.0, 1.0]]);
        let spec = GameSpec { num_agents: 2, n: 1, m: 1, agents: vec![a1, a2] };
        let msgs = messages(validate_game(spec).unwrap_err());
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].contains("A has shape"));
    }

    #[test]
    fn collects_every_violation() {
        let mut a = scalar_agent(0.5);
        a.radius = -1.0;
        a.samples = Matrix::zeros(0, 1);
        a.q = m(&[&[1.0, 2.0], &[0.0, 1.0]]);
        let msgs = messages(validate_game(single(a)).unwrap_err());
        assert!(msgs.len() >= 3, "{msgs:?}");
    }

    #[test]
    fn asymmetric_q_rejected_and_near_symmetric_repaired() {
        let mut spec = GameSpec { num_agents: 1, n: 1, m: 2, agents: vec![scalar_agent(0.0)] };
        let agent = &mut spec.agents[0];
        agent.m = 2;
        agent.a = m(&[&[1.0], &[0.0]]);
        agent.b = vec![0.0, 0.0];
        agent.samples = m(&[&[0.0, 0.0]]);
        agent.q = m(&[&[1.0, 0.5], &[0.4, 1.0]]);
        let msgs = messages(validate_game(spec.clone()).unwrap_err());
        assert!(msgs.iter().any(|s| s.contains("not symmetric")));

        spec.agents[0].q = m(&[&[1.0, 0.5], &[0.5 + 1e-12, 1.0]]);
        let g = validate_game(spec.clone()).unwrap();
        assert_eq!(g.warnings().len(), 1);
        assert_eq!(g.agents()[0].q.asymmetry(), 0.0);

        spec.agents[0].q = m(&[&[-1e-12, 0.0], &[0.0, 1.0]]);
        let g = validate_game(spec).unwrap();
        assert!(g.q_spectra()[0].d.iter().all(|d| *d >= 0.0));
        assert!(g.warnings()[0].message.contains("clipped"));
    }

    #[test]
    fn duplicate_index_rejected() {
        let a = scalar_agent(0.0);
        let mut h = a.clone();
        h.h = vec![m(&[&[0.0]]); 2];
        let spec = GameSpec { num_agents: 2, n: 1, m: 1, agents: vec![h.clone(), h] };
        assert!(messages(validate_game(spec).unwrap_err())[0].contains("twice"));
    }

    #[test]
    fn cost_examples() {
        let mut a = scalar_agent(0.0);
        assert_eq!(deterministic_cost(&a, &[3.0]).unwrap(), (0.0, vec![0.0]));

        a.h = vec![m(&[&[1.0]])];
        a.c = vec![-1.0];
        assert_eq!(deterministic_cost(&a, &[2.0]).unwrap(), (2.0, vec![3.0]));

        a.h = vec![m(&[&[0.0]]), m(&[&[1.0]])];
        a.c = vec![0.0];
        assert_eq!(deterministic_cost(&a, &[2.0, 3.0]).unwrap(), (6.0, vec![3.0]));
        assert!(deterministic_cost(&a, &[2.0]).is_err());
    }

    fn random_quadratic() -> impl Strategy<Value = (AgentSpec, Vec<f64>, Vec<f64>, f64)> {
        (1usize..=3, 1usize..=3, 0usize..3).prop_flat_map(|(big_n, n, i)| {
            let i = i % big_n;
            (
                prop::collection::vec(-1.0f64..1.0, big_n * n * n),
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-2.0f64..2.0, big_n * n),
                prop::collection::vec(-2.0f64..2.0, n),
                0.0f64..=1.0,
            )
                .prop_map(move |(hs, c, x, y, theta)| {
                    let mut h: Vec<Matrix> =
                        hs.chunks(n * n).map(|c| Matrix::from_vec(n, n, c.to_vec())).collect();
                    h[i] = h[i].matmul(&h[i].transpose());
                    let agent = AgentSpec {
                        index: i + 1,
                        n,
                        m: 1,
                        h,
                        c,
                        a: Matrix::zeros(1, n * big_n),
                        b: vec![0.0],
                        q: Matrix::zeros(1, 1),
                        radius: 0.0,
                        samples: Matrix::zeros(1, 1),
                        local_set: LocalSet::NonnegativeOrthant,
                    };
                    (agent, x, y, theta)
                })
        })
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences((agent, x, _y, _t) in random_quadratic()) {
            let (_, grad) = deterministic_cost(&agent, &x).unwrap();
            let i = agent.index - 1;
            let step = 1e-6;
            for k in 0..agent.n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i * agent.n + k] += step;
                xm[i * agent.n + k] -= step;
                let fd = (deterministic_cost(&agent, &xp).unwrap().0 - deterministic_cost(&agent, &xm).unwrap().0) / (2.0 * step);
                let rel = (fd - grad[k]).abs() / grad[k].abs().max(1.0);
                prop_assert!(rel <= 1e-6, "fd {fd} vs {}", grad[k]);
            }
        }

        #[test]
        fn convex_in_own_block((agent, x, y, theta) in random_quadratic()) {
            let n = agent.n;
            let i = agent.index - 1;
            let with = |xi: &[f64]| {
                let mut z = x.clone();
                z[i * n..(i + 1) * n].copy_from_slice(xi);
                deterministic_cost(&agent, &z).unwrap().0
            };
            let xi = &x[i * n..(i + 1) * n];
            let mid: Vec<f64> = xi.iter().zip(&y).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
            prop_assert!(with(&mid) <= theta * with(xi) + (1.0 - theta) * with(&y) + 1e-10);
        }
    }
}
