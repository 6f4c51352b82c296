//! Euclidean projections onto the agents' local sets and onto the stacked
//! feasible set `Z = Π_i X_i × [λ_floor_i, ∞)`.

use serde::{Deserialize, Serialize};

/// Local decision set `X_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalSet {
    /// Componentwise `lo ≤ x ≤ hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// The unit simplex `{x ≥ 0, Σx = 1}`.
    Simplex,
    /// `{x ≥ 0}`
    NonnegativeOrthant,
}

impl LocalSet {
    pub fn unit_box(n: usize) -> Self {
        LocalSet::Box { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    /// Checks the descriptor against a decision dimension.
    pub fn check(&self, n: usize) -> Result<(), String> {
        match self {
            LocalSet::Box { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(format!("box bounds have lengths {}/{}, expected {n}", lo.len(), hi.len()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err("box requires lo <= hi componentwise".into());
                }
                Ok(())
            }
            LocalSet::Simplex if n == 0 => Err("simplex requires n >= 1".into()),
            _ => Ok(()),
        }
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, v: &mut [f64]) {
        match self {
            LocalSet::Box { lo, hi } => {
                for ((x, l), h) in v.iter_mut().zip(lo).zip(hi) {
                    *x = x.clamp(*l, *h);
                }
            }
            LocalSet::Simplex => project_simplex(v),
            LocalSet::NonnegativeOrthant => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match self {
            LocalSet::Box { lo, hi } => v.iter().zip(lo).zip(hi).all(|((x, l), h)| *x >= l - tol && *x <= h + tol),
            LocalSet::Simplex => v.iter().all(|x| *x >= -tol) && (v.iter().sum::<f64>() - 1.0).abs() <= tol,
            LocalSet::NonnegativeOrthant => v.iter().all(|x| *x >= -tol),
        }
    }
}

/// Projection onto the unit simplex by the sorted-threshold rule: find the
/// largest `ρ` with `u_ρ - (Σ_{j≤ρ} u_j - 1)/ρ > 0` over the descending sort
/// `u`, then clip `v - θ` at zero.
///
/// Points that are nonnegative and sum to one within rounding are returned
/// unchanged, which makes the projection exactly idempotent.
fn project_simplex(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if v.iter().all(|x| *x >= 0.0) && (sum - 1.0).abs() <= 4.0 * v.len() as f64 * f64::EPSILON {
        return;
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// `[x_i (n entries), λ_i]` block layout of a stacked point `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub agents: usize,
    pub n: usize,
}

impl BlockLayout {
    pub fn dim(&self) -> usize {
        self.agents * (self.n + 1)
    }

    pub fn x<'a>(&self, z: &'a [f64], i: usize) -> &'a [f64] {
        let s = i * (self.n + 1);
        &z[s..s + self.n]
    }

    pub fn x_mut<'a>(&self, z: &'a mut [f64], i: usize) -> &'a mut [f64] {
        let s = i * (self.n + 1);
        &mut z[s..s + self.n]
    }

    pub fn lambda_index(&self, i: usize) -> usize {
        i * (self.n + 1) + self.n
    }

    /// Extracts the collective decision `x = (x_1, …, x_N)`.
    pub fn collective_x(&self, z: &[f64]) -> Vec<f64> {
        (0..self.agents).flat_map(|i| self.x(z, i).iter().copied()).collect()
    }
}

/// Projects a stacked point onto `Z`: local projection of every `x_i` and
/// `λ_i ← max(λ_i, floor_i)`.
pub fn project_stacked(layout: BlockLayout, sets: &[&LocalSet], floors: &[f64], z: &mut [f64]) {
    for i in 0..layout.agents {
        sets[i].project_in_place(layout.x_mut(z, i));
        let li = layout.lambda_index(i);
        z[li] = z[li].max(floors[i]);
    }
}
