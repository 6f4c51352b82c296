//! Finite-dimensional reformulation of the distributionally robust game.
//!
//! For `λ_i > λ_max(Q_i)` the per-sample worst case
//!
//! ```text
//! sup_ξ  ξᵀQξ + P(x)ᵀξ − λ‖ξ − ξ_k‖²  =  ¼ W̃_kᵀ (λI − D)⁻¹ W̃_k − λ‖ξ_k‖²
//! ```
//!
//! with `Q = Lᵀ D L`, `P̃ = L P(x)`, `ξ̃_k = L ξ_k` and `W̃_k = P̃ + 2λ ξ̃_k`.
//! Agent `i` then minimises over `(x_i, λ_i) ∈ X_i × [λ_max(Q_i) + ζ_i, ∞)`
//!
//! ```text
//! J_i = f_i(x) + λ(ε² − mean_k ‖ξ_k‖²) + (1/4K) Σ_k W̃_kᵀ Q̃(λ) W̃_k,   Q̃(λ) = diag(1/(λ − d_j))
//! ```
//!
//! and the game is the variational inequality with the pseudogradient
//!
//! ```text
//! F_i^x = ∇_{x_i} f_i + (1/2K) Σ_k (L A^(i))ᵀ Q̃ W̃_k
//! F_i^λ = ε² − mean_k ‖ξ_k‖² + (1/4K) Σ_k [ 4 ξ̃_kᵀ Q̃ W̃_k − Σ_j W̃_kj² / (λ − d_j)² ]
//! ```
//!
//! Both closed forms are evaluated in an algebraically identical arrangement
//! that avoids cancelling `O(λ)` terms when `λ` is large:
//!
//! ```text
//! per-sample sup   = Σ_j [ p̃_j²/4 + λ (p̃_j ξ̃_kj + d_j ξ̃_kj²) ] / (λ − d_j)
//! F_i^λ            = ε² − (1/4K) Σ_k Σ_j (p̃_j + 2 d_j ξ̃_kj)² / (λ − d_j)²
//! ```
//!
//! (the second one is `ε² − mean_k ‖ξ*_k − ξ_k‖²`, the envelope derivative).
//! Sums over samples always run in index order, so results are bit-stable.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AgentSpec, DeterministicCost, QuadraticCost, ValidatedGame};
use crate::linalg::{norm, norm_sq, Matrix};
use crate::projection::{project_stacked, BlockLayout, LocalSet};
use crate::spectral::{eigendecompose, SpectralDecomposition};

pub const DEFAULT_ZETA: f64 = 1e-6;

/// Agent data expressed in the eigenbasis of its `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedAgentData {
    pub decomposition: SpectralDecomposition,
    /// `L A`, `m × nN`.
    pub a_rot: Matrix,
    /// `L b`
    pub b_rot: Vec<f64>,
    /// `K × m`, rows `L ξ_k`.
    pub samples_rot: Matrix,
    /// `‖ξ_k‖²` of the original samples.
    pub sample_sq_norms: Vec<f64>,
    /// `d[0] + ζ`
    pub lambda_floor: f64,
    /// `L A^(i)`, the block of `a_rot` acting on the agent's own decision.
    pub own_block_rot: Matrix,
}

impl RotatedAgentData {
    pub fn sample_count(&self) -> usize {
        self.samples_rot.rows()
    }

    /// `P̃(x) = L(Ax + b)`
    pub fn rotated_affine(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.a_rot.matvec(x);
        p.iter_mut().zip(&self.b_rot).for_each(|(p, b)| *p += b);
        p
    }

    pub fn lambda_max(&self) -> f64 {
        self.decomposition.lambda_max()
    }

    fn require_concave(&self, lambda: f64) -> Result<()> {
        let lambda_max = self.lambda_max();
        if lambda > lambda_max {
            Ok(())
        } else {
            Err(Error::InfiniteSupremum { lambda, lambda_max })
        }
    }
}

/// Rotates one agent's data into the eigenbasis of its `Q`.
pub fn rotate_agent(agent: &AgentSpec, zeta: f64) -> Result<RotatedAgentData> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidParameter(format!("zeta must be > 0, got {zeta}")));
    }
    let decomposition = eigendecompose(&agent.q)?;
    let l = &decomposition.l;
    let a_rot = l.matmul(&agent.a);
    let b_rot = l.matvec(&agent.b);
    let k = agent.samples.rows();
    let mut samples_rot = Matrix::zeros(k, agent.m);
    let mut sample_sq_norms = Vec::with_capacity(k);
    for r in 0..k {
        let s = agent.samples.row(r);
        samples_rot.row_mut(r).copy_from_slice(&l.matvec(s));
        sample_sq_norms.push(norm_sq(s));
    }
    let own_block_rot = a_rot.col_block((agent.index - 1) * agent.n, agent.n);
    let lambda_floor = decomposition.lambda_max() + zeta;
    Ok(RotatedAgentData { decomposition, a_rot, b_rot, samples_rot, sample_sq_norms, lambda_floor, own_block_rot })
}

/// Closed-form `sup_ξ [ξᵀQξ + P(x)ᵀξ − λ‖ξ − ξ_k‖²]` for sample `k`.
///
/// Fails with [`Error::InfiniteSupremum`] when `λ ≤ λ_max(Q)`.
pub fn inner_sup(rot: &RotatedAgentData, x: &[f64], lambda: f64, k: usize) -> Result<f64> {
    rot.require_concave(lambda)?;
    let p = rot.rotated_affine(x);
    Ok(sample_sup(&p, &rot.decomposition.d, rot.samples_rot.row(k), lambda))
}

fn sample_sup(p: &[f64], d: &[f64], s: &[f64], lambda: f64) -> f64 {
    let mut v = 0.0;
    for j in 0..p.len() {
        v += (0.25 * p[j] * p[j] + lambda * (p[j] * s[j] + d[j] * s[j] * s[j])) / (lambda - d[j]);
    }
    v
}

/// The reformulated game as a variational inequality over `Z`.
#[derive(Clone)]
pub struct VIProblem {
    game: ValidatedGame,
    rotated: Vec<RotatedAgentData>,
    zeta: Vec<f64>,
    layout: BlockLayout,
    floors: Vec<f64>,
    cost: Arc<dyn DeterministicCost>,
}

impl fmt::Debug for VIProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VIProblem")
            .field("agents", &self.layout.agents)
            .field("n", &self.layout.n)
            .field("zeta", &self.zeta)
            .field("floors", &self.floors)
            .finish_non_exhaustive()
    }
}

impl VIProblem {
    /// Builds the problem with `ζ_i = DEFAULT_ZETA` for every agent.
    pub fn new(game: ValidatedGame) -> Result<Self> {
        let zeta = vec![DEFAULT_ZETA; game.num_agents()];
        Self::with_zeta(game, zeta)
    }

    pub fn with_zeta(game: ValidatedGame, zeta: Vec<f64>) -> Result<Self> {
        if zeta.len() != game.num_agents() {
            return Err(Error::Dimension(format!("{} zeta values for {} agents", zeta.len(), game.num_agents())));
        }
        let rotated = game
            .agents()
            .iter()
            .zip(&zeta)
            .map(|(a, &z)| rotate_agent(a, z))
            .collect::<Result<Vec<_>>>()?;
        let floors = rotated.iter().map(|r| r.lambda_floor).collect();
        let layout = BlockLayout { agents: game.num_agents(), n: game.n() };
        Ok(Self { game, rotated, zeta, layout, floors, cost: Arc::new(QuadraticCost) })
    }

    /// Replaces the quadratic deterministic cost with a custom one.
    pub fn with_cost(mut self, cost: Arc<dyn DeterministicCost>) -> Self {
        self.cost = cost;
        self
    }

    pub fn game(&self) -> &ValidatedGame {
        &self.game
    }

    pub fn rotated(&self) -> &[RotatedAgentData] {
        &self.rotated
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    pub fn dimension(&self) -> usize {
        self.layout.dim()
    }

    pub fn num_agents(&self) -> usize {
        self.layout.agents
    }

    pub fn lambda_floors(&self) -> &[f64] {
        &self.floors
    }

    pub fn local_sets(&self) -> Vec<&LocalSet> {
        self.game.agents().iter().map(|a| &a.local_set).collect()
    }

    /// Euclidean projection onto `Z`.
    pub fn project(&self, z: &mut [f64]) {
        project_stacked(self.layout, &self.local_sets(), &self.floors, z);
    }

    pub fn projected(&self, z: &[f64]) -> Vec<f64> {
        let mut out = z.to_vec();
        self.project(&mut out);
        out
    }

    /// Default start: `x_i = Π_{X_i}(0)`, `λ_i = floor_i + 1`.
    pub fn initial_point(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.dimension()];
        for i in 0..self.num_agents() {
            z[self.layout.lambda_index(i)] = self.floors[i] + 1.0;
        }
        self.project(&mut z);
        z
    }

    /// Membership in `Z` up to `tol`.
    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dimension()
            && (0..self.num_agents()).all(|i| {
                self.game.agents()[i].local_set.contains(self.layout.x(z, i), tol)
                    && z[self.layout.lambda_index(i)] >= self.floors[i] - tol
            })
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() == self.dimension() {
            Ok(())
        } else {
            Err(Error::Dimension(format!("z has length {}, expected {}", z.len(), self.dimension())))
        }
    }

    fn deterministic(&self, i: usize, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.cost.value_and_gradient(&self.game.agents()[i], x)
    }

    /// `J_i(z)` for 0-based agent `i`.
    pub fn agent_objective(&self, i: usize, z: &[f64]) -> Result<f64> {
        self.check_dim(z)?;
        let x = self.layout.collective_x(z);
        let lambda = z[self.layout.lambda_index(i)];
        self.objective_at(i, &x, lambda)
    }

    /// `J_i` at collective decision `x` and multiplier `λ_i`.
    pub fn objective_at(&self, i: usize, x: &[f64], lambda: f64) -> Result<f64> {
        let rot = &self.rotated[i];
        rot.require_concave(lambda)?;
        let agent = &self.game.agents()[i];
        let (f, _) = self.deterministic(i, x)?;
        Ok(f + lambda * agent.radius * agent.radius + self.mean_sup(i, x, lambda))
    }

    /// `mean_k inner_sup(k)`; requires `λ > λ_max`.
    fn mean_sup(&self, i: usize, x: &[f64], lambda: f64) -> f64 {
        let rot = &self.rotated[i];
        let p = rot.rotated_affine(x);
        let d = &rot.decomposition.d;
        let k = rot.sample_count();
        let mut acc = 0.0;
        for r in 0..k {
            acc += sample_sup(&p, d, rot.samples_rot.row(r), lambda);
        }
        acc / k as f64
    }

    /// `∂J_i/∂λ_i`, the λ-block of the mapping.
    pub fn multiplier_slope(&self, i: usize, x: &[f64], lambda: f64) -> Result<f64> {
        let rot = &self.rotated[i];
        rot.require_concave(lambda)?;
        let p = rot.rotated_affine(x);
        let eps = self.game.agents()[i].radius;
        Ok(eps * eps - 0.25 * slope_sum(&p, &rot.decomposition.d, &rot.samples_rot, lambda) / rot.sample_count() as f64)
    }

    /// Pseudogradient `F(z)`.
    pub fn mapping(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dimension()];
        self.mapping_into(z, &mut out)?;
        Ok(out)
    }

    pub fn mapping_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(z)?;
        let x = self.layout.collective_x(z);
        for i in 0..self.num_agents() {
            let li = self.layout.lambda_index(i);
            let lambda = z[li];
            let rot = &self.rotated[i];
            if !(lambda > rot.lambda_max()) {
                return Err(Error::Infeasible(format!(
                    "agent {}: lambda {lambda} <= lambda_max(Q) {}",
                    i + 1,
                    rot.lambda_max()
                )));
            }
            let (_, grad_f) = self.deterministic(i, &x)?;
            let p = rot.rotated_affine(&x);
            let d = &rot.decomposition.d;
            let m = d.len();
            let k = rot.sample_count();

            // Σ_k Q̃ W̃_k, accumulated in sample order
            let mut qw = vec![0.0; m];
            for r in 0..k {
                let s = rot.samples_rot.row(r);
                for j in 0..m {
                    qw[j] += (p[j] + 2.0 * lambda * s[j]) / (lambda - d[j]);
                }
            }
            let scale = 1.0 / (2.0 * k as f64);
            qw.iter_mut().for_each(|v| *v *= scale);
            let coupling = rot.own_block_rot.tr_matvec(&qw);

            let xb = self.layout.x_mut(out, i);
            for ((o, g), c) in xb.iter_mut().zip(&grad_f).zip(&coupling) {
                *o = g + c;
            }
            let eps = self.game.agents()[i].radius;
            out[li] = eps * eps - 0.25 * slope_sum(&p, d, &rot.samples_rot, lambda) / k as f64;
        }
        Ok(())
    }

    /// `‖z − Π_Z(z − F(z))‖₂`
    pub fn natural_residual(&self, z: &[f64]) -> Result<f64> {
        let f = self.mapping(z)?;
        Ok(self.residual_with(z, &f))
    }

    /// Natural residual with a precomputed `F(z)`.
    pub fn residual_with(&self, z: &[f64], f: &[f64]) -> f64 {
        let mut step: Vec<f64> = z.iter().zip(f).map(|(a, b)| a - b).collect();
        self.project(&mut step);
        let diff: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a - b).collect();
        norm(&diff)
    }

    /// Per-agent `J_i(z)`.
    pub fn costs(&self, z: &[f64]) -> Result<Vec<f64>> {
        (0..self.num_agents()).map(|i| self.agent_objective(i, z)).collect()
    }

    /// Minimises `J_i(x, ·)` over `λ ≥ floor_i` by bisection on the
    /// monotone slope. Returns `(λ*, J_i(x, λ*))`. When the slope stays
    /// negative (zero radius with nonzero worst-case shift) the infimum is
    /// approached as `λ → ∞`: `λ* = ∞` and the value is the sample average.
    pub fn optimal_multiplier(&self, i: usize, x: &[f64]) -> Result<(f64, f64)> {
        let floor = self.floors[i];
        if self.multiplier_slope(i, x, floor)? >= 0.0 {
            return Ok((floor, self.objective_at(i, x, floor)?));
        }
        let mut lo = floor;
        let mut hi = floor + 1.0;
        while self.multiplier_slope(i, x, hi)? < 0.0 {
            lo = hi;
            hi = floor + 2.0 * (hi - floor);
            if hi > 1e150 {
                let (f, _) = self.deterministic(i, x)?;
                return Ok((f64::INFINITY, f + self.sample_average(i, x)));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.multiplier_slope(i, x, mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        Ok((lambda, self.objective_at(i, x, lambda)?))
    }

    /// `mean_k [ξ_kᵀQξ_k + P(x)ᵀξ_k]`
    fn sample_average(&self, i: usize, x: &[f64]) -> f64 {
        let agent = &self.game.agents()[i];
        let p = agent.affine_term(x);
        let k = agent.sample_count();
        let mut acc = 0.0;
        for r in 0..k {
            let s = agent.samples.row(r);
            acc += crate::linalg::dot(s, &agent.q.matvec(s)) + crate::linalg::dot(&p, s);
        }
        acc / k as f64
    }
}

/// `Σ_k Σ_j (p̃_j + 2 d_j ξ̃_kj)² / (λ − d_j)²`
fn slope_sum(p: &[f64], d: &[f64], samples_rot: &Matrix, lambda: f64) -> f64 {
    let mut acc = 0.0;
    for r in 0..samples_rot.rows() {
        let s = samples_rot.row(r);
        for j in 0..p.len() {
            let t = (p[j] + 2.0 * d[j] * s[j]) / (lambda - d[j]);
            acc += t * t;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::{m, scalar_agent};
    use crate::game::{validate_game, GameSpec};

    fn linear_problem(set: LocalSet) -> VIProblem {
        let mut a = scalar_agent(0.0);
        a.local_set = set;
        let g = validate_game(GameSpec { num_agents: 1, n: 1, m: 1, agents: vec![a] }).unwrap();
        VIProblem::new(g).unwrap()
    }

    /// The printed forms, evaluated term by term.
    fn literal_sup(rot: &RotatedAgentData, x: &[f64], lambda: f64, k: usize) -> f64 {
        let p = rot.rotated_affine(x);
        let s = rot.samples_rot.row(k);
        let d = &rot.decomposition.d;
        let quad: f64 = (0..p.len()).map(|j| (p[j] + 2.0 * lambda * s[j]).powi(2) / (lambda - d[j])).sum();
        0.25 * quad - lambda * rot.sample_sq_norms[k]
    }

    fn literal_slope(rot: &RotatedAgentData, eps: f64, x: &[f64], lambda: f64) -> f64 {
        let p = rot.rotated_affine(x);
        let d = &rot.decomposition.d;
        let k = rot.sample_count();
        let mut acc = 0.0;
        for r in 0..k {
            let s = rot.samples_rot.row(r);
            for j in 0..p.len() {
                let w = p[j] + 2.0 * lambda * s[j];
                acc += 4.0 * s[j] * w / (lambda - d[j]) - w * w / (lambda - d[j]).powi(2);
            }
        }
        eps * eps - rot.sample_sq_norms.iter().sum::<f64>() / k as f64 + acc / (4.0 * k as f64)
    }

    #[test]
    fn rotate_zero_q() {
        let r = rotate_agent(&scalar_agent(0.0), 1e-6).unwrap();
        assert_eq!(r.decomposition.d, vec![0.0]);
        assert_eq!(r.a_rot, m(&[&[1.0]]));
        assert_eq!(r.lambda_floor, 1e-6);
    }

    #[test]
    fn rotate_identity_and_coupled() {
        let mut a = scalar_agent(0.0);
        a.m = 2;
        a.a = m(&[&[1.0], &[0.0]]);
        a.b = vec![0.0, 0.0];
        a.samples = m(&[&[1.0, 0.0]]);
        a.q = Matrix::identity(2);
        let r = rotate_agent(&a, 1e-6).unwrap();
        assert_eq!(r.samples_rot, m(&[&[1.0, 0.0]]));
        assert_eq!(r.sample_sq_norms, vec![1.0]);

        a.q = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let r = rotate_agent(&a, 1e-6).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.samples_rot[(0, 0)] - h).abs() < 1e-15);
        assert!((r.samples_rot[(0, 1)] - h).abs() < 1e-15);
        assert!(r.lambda_floor > r.lambda_max());
        assert!(rotate_agent(&a, 0.0).is_err());
    }

    #[test]
    fn inner_sup_examples() {
        let r = rotate_agent(&scalar_agent(0.0), 1e-6).unwrap();
        assert_eq!(inner_sup(&r, &[0.0], 1.0, 0).unwrap(), 0.0);

        let mut a = scalar_agent(0.5);
        a.samples = m(&[&[1.0]]);
        let r = rotate_agent(&a, 1e-6).unwrap();
        let v = inner_sup(&r, &[1.0], 2.0, 0).unwrap();
        assert!((v - 13.0 / 6.0).abs() <= 1e-12, "{v}");
        assert!(matches!(inner_sup(&r, &[1.0], 0.4, 0), Err(Error::InfiniteSupremum { .. })));
        assert!(inner_sup(&r, &[1.0], 0.5, 0).is_err());
    }

    #[test]
    fn objective_examples() {
        let p = linear_problem(LocalSet::unit_box(1));
        let j = p.agent_objective(0, &[1.0, 1.0]).unwrap();
        assert!((j - 0.5).abs() < 1e-15);
        assert!(p.agent_objective(0, &[1.0, 0.0]).is_err());

        let mut a = scalar_agent(0.0);
        a.radius = 0.0;
        a.a = m(&[&[0.0]]);
        a.samples = m(&[&[0.0], &[0.0]]);
        let g = validate_game(GameSpec { num_agents: 1, n: 1, m: 1, agents: vec![a] }).unwrap();
        let p = VIProblem::new(g).unwrap();
        assert_eq!(p.agent_objective(0, &[0.3, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn mapping_linear_stationary_point() {
        let p = linear_problem(LocalSet::unit_box(1));
        let f = p.mapping(&[1.0, 1.0]).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-15);
        assert!(f[1].abs() < 1e-15);
        assert!(matches!(p.mapping(&[1.0, 0.0]), Err(Error::Infeasible(_))));
    }

    #[test]
    fn null_game_has_zero_mapping() {
        let mut a = scalar_agent(0.0);
        a.radius = 0.0;
        a.a = m(&[&[0.0]]);
        let g = validate_game(GameSpec { num_agents: 1, n: 1, m: 1, agents: vec![a] }).unwrap();
        let p = VIProblem::new(g).unwrap();
        for z in [[0.5, 1.0], [0.0, 3.0], [1.0, 1e-6]] {
            assert_eq!(p.mapping(&z).unwrap(), vec![0.0, 0.0]);
            assert_eq!(p.natural_residual(&z).unwrap(), 0.0);
        }
    }

    #[test]
    fn residual_hand_projection() {
        let p = linear_problem(LocalSet::Box { lo: vec![0.0], hi: vec![2.0] });
        let r = p.natural_residual(&[1.0, 1.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lambda_block_tends_to_radius_squared() {
        let mut a = scalar_agent(0.5);
        a.samples = m(&[&[1.0], &[0.3]]);
        let g = validate_game(GameSpec { num_agents: 1, n: 1, m: 1, agents: vec![a] }).unwrap();
        let p = VIProblem::new(g).unwrap();
        let f = p.mapping(&[0.7, 1e8]).unwrap();
        assert!((f[1] - 0.25).abs() <= 1e-6);
    }

    #[test]
    fn stable_forms_match_printed_forms() {
        let mut a = scalar_agent(0.0);
        a.m = 2;
        a.a = m(&[&[0.7], &[-0.3]]);
        a.b = vec![0.2, 0.1];
        a.q = m(&[&[0.9, 0.2], &[0.2, 0.4]]);
        a.samples = m(&[&[0.1, 0.8], &[0.5, -0.2], &[1.2, 0.3]]);
        a.radius = 0.3;
        let r = rotate_agent(&a, 1e-6).unwrap();
        let g = validate_game(GameSpec { num_agents: 1, n: 1, m: 2, agents: vec![a] }).unwrap();
        let p = VIProblem::new(g).unwrap();
        for lambda in [1.2, 2.0, 5.0, 40.0] {
            for k in 0..3 {
                let lit = literal_sup(&r, &[0.6], lambda, k);
                let got = inner_sup(&r, &[0.6], lambda, k).unwrap();
                assert!((lit - got).abs() <= 1e-12 * lit.abs().max(1.0));
            }
            let lit = literal_slope(&r, 0.3, &[0.6], lambda);
            let got = p.multiplier_slope(0, &[0.6], lambda).unwrap();
            assert!((lit - got).abs() <= 1e-12, "{lit} vs {got}");
        }
    }

    #[test]
    fn optimal_multiplier_linear_case() {
        // Q = 0: λ* = ‖P‖/(2ε), value = mean Pᵀξ + ε‖P‖
        let mut a = scalar_agent(0.0);
        a.samples = m(&[&[1.0], &[3.0]]);
        a.radius = 0.25;
        a.local_set = LocalSet::NonnegativeOrthant;
        let g = validate_game(GameSpec { num_agents: 1, n: 1, m: 1, agents: vec![a] }).unwrap();
        let p = VIProblem::new(g).unwrap();
        let (lambda, value) = p.optimal_multiplier(0, &[2.0]).unwrap();
        assert!((lambda - 4.0).abs() < 1e-9, "{lambda}");
        assert!((value - 4.5).abs() < 1e-12, "{value}");
    }

    #[test]
    fn initial_point_is_feasible() {
        let p = linear_problem(LocalSet::Simplex);
        let z = p.initial_point();
        assert_eq!(z, vec![1.0, 1.0 + 1e-6]);
        assert!(p.is_feasible(&z, 0.0));
    }
}
