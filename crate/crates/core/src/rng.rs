//! Portable seeded random streams.
//!
//! Everything here is specified bit-exactly so that ports in other languages
//! reproduce the same scenario files:
//!
//! - **Generator.** SplitMix64. Each draw adds `GAMMA = 0x9E3779B97F4A7C15`
//!   (wrapping) to the 64-bit state and returns `mix64(state)` where
//!   `mix64(z) = z ^ (z >> 31)` after `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`
//!   and `z = (z ^ (z >> 27)) * 0x94D049BB133111EB` (wrapping multiplies).
//! - **Uniform `[0, 1)`.** `(next >> 11) as f64 * 2^-53`.
//! - **Uniform `[a, b)`.** `a + (b - a) * u`.
//! - **Discrete uniform `{a..=b}`.** `a + floor(u * (b - a + 1))`, clamped to `b`.
//! - **Normal.** Box–Muller cosine branch from two uniforms `u1, u2` drawn in
//!   that order: `mu + sigma * sqrt(-2 ln(1 - u1)) * cos(2π u2)`. No spare
//!   value is cached, so each normal consumes exactly two words.
//! - **Student-t.** `shift + scale * z / sqrt(c / dof)`, where `z` is one
//!   standard normal followed by `c`, the sum of `dof` squared standard normals.
//! - **Substreams.** `substream(key)` seeds a fresh stream with
//!   `mix64(seed ^ mix64(key.wrapping_add(GAMMA)))`, where `seed` is the parent's
//!   original seed. Substreams depend only on `(seed, key)`, not on how many
//!   values the parent has produced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MUL1: u64 = 0xBF58_476D_1CE4_E5B9;
const MUL2: u64 = 0x94D0_49BB_1331_11EB;
/// Tag recorded in serialised streams.
pub const ALGORITHM: &str = "splitmix64";

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MUL1);
    z = (z ^ (z >> 27)).wrapping_mul(MUL2);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededStream {
    seed: u64,
    state: u64,
    algorithm: String,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed, algorithm: ALGORITHM.to_string() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, key: u64) -> SeededStream {
        SeededStream::new(mix64(self.seed ^ mix64(key.wrapping_add(GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    /// Uniform on `[0, 1)` with 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        a + (b - a) * self.next_f64()
    }

    pub fn discrete_uniform(&mut self, a: i64, b: i64) -> i64 {
        let span = (b - a + 1) as f64;
        (a + (self.next_f64() * span).floor() as i64).min(b)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal(&mut self, mu: f64, sigma: f64) -> f64 {
        mu + sigma * self.standard_normal()
    }

    pub fn student_t(&mut self, dof: u32, scale: f64, shift: f64) -> f64 {
        let z = self.standard_normal();
        let chi2: f64 = (0..dof).map(|_| self.standard_normal().powi(2)).sum();
        shift + scale * z / (chi2 / dof as f64).sqrt()
    }

    pub fn draw(&mut self, dist: &Distribution, count: usize) -> Result<Vec<f64>> {
        dist.check()?;
        Ok((0..count).map(|_| self.sample(dist)).collect())
    }

    /// One value; `dist` must already be valid.
    pub fn sample(&mut self, dist: &Distribution) -> f64 {
        match *dist {
            Distribution::Uniform { a, b } => self.uniform(a, b),
            Distribution::DiscreteUniform { a, b } => self.discrete_uniform(a, b) as f64,
            Distribution::Normal { mu, sigma } => self.normal(mu, sigma),
            Distribution::StudentT { dof, scale, shift } => self.student_t(dof, scale, shift),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Uniform { a: f64, b: f64 },
    DiscreteUniform { a: i64, b: i64 },
    Normal { mu: f64, sigma: f64 },
    StudentT { dof: u32, scale: f64, shift: f64 },
}

impl Distribution {
    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Uniform { a, b } => a.is_finite() && b.is_finite() && a <= b,
            Distribution::DiscreteUniform { a, b } => a <= b,
            Distribution::Normal { mu, sigma } => mu.is_finite() && sigma.is_finite() && sigma >= 0.0,
            Distribution::StudentT { dof, scale, shift } => dof >= 1 && scale.is_finite() && shift.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid distribution parameters {self:?}")))
        }
    }
}
