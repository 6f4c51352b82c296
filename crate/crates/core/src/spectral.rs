//! Symmetric eigendecomposition `Q = Lᵀ diag(d) L` by cyclic Jacobi rotations.
//!
//! Rows of `L` are eigenvectors and `d` is sorted in descending order, so
//! `d[0]` is `λ_max(Q)`. Each eigenvector is sign-normalised so that its first
//! component of magnitude above [`ORIENTATION_EPS`] is positive; together with
//! the fixed sweep order this makes the output a deterministic function of the
//! input bytes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Off-diagonal Frobenius norm, relative to `‖Q‖_F`, at which sweeps stop.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;
/// Accepted asymmetry, relative to `max(1, ‖Q‖_max)`.
pub const SYMMETRY_TOL: f64 = 1e-10;
const ORIENTATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    /// Orthogonal factor; row `j` is the eigenvector for `d[j]`.
    pub l: Matrix,
    /// Eigenvalues, descending.
    pub d: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn lambda_max(&self) -> f64 {
        self.d.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.d.last().copied().unwrap_or(0.0)
    }

    /// `Lᵀ diag(d) L`
    pub fn reconstruct(&self) -> Matrix {
        let m = self.d.len();
        let mut out = Matrix::zeros(m, m);
        for (k, &dk) in self.d.iter().enumerate() {
            let v = self.l.row(k);
            for i in 0..m {
                for j in 0..m {
                    out[(i, j)] += dk * v[i] * v[j];
                }
            }
        }
        out
    }
}

pub fn eigendecompose(q: &Matrix) -> Result<SpectralDecomposition> {
    let (m, c) = q.shape();
    if m != c {
        return Err(Error::Dimension(format!("eigendecompose needs a square matrix, got {m}x{c}")));
    }
    let asym = q.asymmetry();
    if asym > SYMMETRY_TOL * q.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }

    let mut a = q.symmetrized();
    // Columns of `v` accumulate the rotations.
    let mut v = Matrix::identity(m);
    let scale = frobenius(&a);
    let mut converged = false;

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal(&a);
        if off == 0.0 || off <= OFF_DIAGONAL_TOL * scale {
            converged = true;
            break;
        }
        for p in 0..m {
            for r in p + 1..m {
                rotate(&mut a, &mut v, p, r);
            }
        }
    }
    if !converged {
        let off = off_diagonal(&a);
        if off > OFF_DIAGONAL_TOL * scale {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
    }

    // Stable sort keeps sweep order among equal eigenvalues.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let mut l = Matrix::zeros(m, m);
    let mut d = Vec::with_capacity(m);
    for (row, &k) in order.iter().enumerate() {
        d.push(a[(k, k)]);
        let mut vec: Vec<f64> = (0..m).map(|i| v[(i, k)]).collect();
        if let Some(first) = vec.iter().find(|x| x.abs() > ORIENTATION_EPS) {
            if *first < 0.0 {
                vec.iter_mut().for_each(|x| *x = -*x);
            }
        }
        l.row_mut(row).copy_from_slice(&vec);
    }
    Ok(SpectralDecomposition { l, d })
}

fn frobenius(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn off_diagonal(a: &Matrix) -> f64 {
    let m = a.rows();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation zeroing `a[p][r]`: `a ← Jᵀ a J`, `v ← v J`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, r: usize) {
    let apr = a[(p, r)];
    if apr == 0.0 {
        return;
    }
    let m = a.rows();
    let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..m {
        let akp = a[(k, p)];
        let akr = a[(k, r)];
        a[(k, p)] = c * akp - s * akr;
        a[(k, r)] = s * akp + c * akr;
    }
    for k in 0..m {
        let apk = a[(p, k)];
        let ark = a[(r, k)];
        a[(p, k)] = c * apk - s * ark;
        a[(r, k)] = s * apk + c * ark;
    }
    a[(p, r)] = 0.0;
    a[(r, p)] = 0.0;

    for k in 0..m {
        let vkp = v[(k, p)];
        let vkr = v[(k, r)];
        v[(k, p)] = c * vkp - s * vkr;
        v[(k, r)] = s * vkp + c * vkr;
    }
}
