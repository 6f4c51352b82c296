//! Equilibrium seeking for quadratic-bilinear Wasserstein distributionally
//! robust games.
//!
//! Each agent `i` minimises, over its local set `X_i`, a deterministic
//! quadratic cost `f_i(x)` plus the worst-case expectation of
//! `g_i(x, ξ) = ξᵀQ_iξ + P_i(x)ᵀξ` over a type-2 Wasserstein ball of radius
//! `ε_i` centred at the empirical distribution of its own samples. With
//! `P_i(x) = A_i x + b_i` and `Q_i` positive semidefinite, the inner worst
//! case has a closed form and the whole game collapses to a finite
//! dimensional game in the augmented variables `z_i = (x_i, λ_i)`.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: problem data, validation and the deterministic cost.
//! - [`spectral`]: cyclic Jacobi eigendecomposition of the `Q_i`.
//! - [`reformulation`]: rotated data, closed-form inner supremum, agent
//!   objectives, the pseudogradient mapping `F` and the natural residual.
//! - [`projection`]: Euclidean projections onto local sets and `Z`.
//! - [`solver`]: the adaptive golden ratio algorithm and its hybrid
//!   momentum-switching variant.
//! - [`oracle`]: brute-force verifiers (finite differences, gradient ascent,
//!   best-response descent) that share no code with the closed forms.
//! - [`rng`]: portable SplitMix64 streams and the sampling distributions.
//! - [`experiments`]: seeded scenario generators and sweeps.
//! - [`cli`]: configuration schema, file outputs and the command runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a < b)` rejects NaN

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod experiments;
pub mod game;
pub mod linalg;
pub mod oracle;
pub mod projection;
pub mod reformulation;
pub mod rng;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use game::{AgentSpec, GameSpec, ValidatedGame};
pub use linalg::Matrix;
pub use projection::LocalSet;
pub use reformulation::VIProblem;
pub use solver::{RunReport, SolverParams};
