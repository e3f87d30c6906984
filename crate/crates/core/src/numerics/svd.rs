//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! The columns of a working copy of `A` are rotated pairwise until they are
//! mutually orthogonal; the accumulated rotations form `V`, the column norms
//! are the singular values and the normalized columns form `U`.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) V^T` with `p = min(m, n)` singular triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdFactors {
    /// `m x p`, orthonormal columns.
    pub left_vectors: Matrix,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `n x p`, orthonormal columns.
    pub right_vectors: Matrix,
}

impl SvdFactors {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `RANK_TOLERANCE * sigma_max`.
    pub fn rank(&self) -> usize {
        let cutoff = RANK_TOLERANCE * self.sigma_max();
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    /// Smallest singular value among the first `rank` ones (zero for the zero matrix).
    pub fn sigma_min_nonzero(&self) -> f64 {
        match self.rank() {
            0 => 0.0,
            r => self.singular_values[r - 1],
        }
    }

    /// Smallest singular value including zeros.
    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// `sigma_max / sigma_min`; infinite when the matrix is rank deficient.
    pub fn condition_number(&self) -> f64 {
        let smin = self.sigma_min();
        if smin <= RANK_TOLERANCE * self.sigma_max() {
            f64::INFINITY
        } else {
            self.sigma_max() / smin
        }
    }

    /// Columns of `U` spanning the range of `A`.
    pub fn range_basis(&self) -> Matrix {
        let r = self.rank();
        self.left_vectors.select_columns(&(0..r).collect::<Vec<_>>())
    }

    pub fn reconstruct(&self) -> Matrix {
        let u = &self.left_vectors;
        let v = &self.right_vectors;
        Matrix::from_fn(u.rows(), v.rows(), |i, j| {
            self.singular_values
                .iter()
                .enumerate()
                .map(|(l, s)| u[(i, l)] * s * v[(j, l)])
                .sum()
        })
    }
}

pub fn svd(a: &Matrix) -> Result<SvdFactors> {
    if !a.is_finite() {
        return Err(Error::invalid("svd input has non-finite entries"));
    }
    if a.rows() >= a.cols() {
        Ok(jacobi_tall(a))
    } else {
        let t = jacobi_tall(&a.transpose());
        Ok(SvdFactors {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        })
    }
}

fn jacobi_tall(a: &Matrix) -> SvdFactors {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (j, dot(c, c).sqrt()))
        .collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));

    let sigma_max = order.first().map_or(0.0, |o| o.1);
    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (dst, &(src, s)) in order.iter().enumerate() {
        singular_values.push(s);
        v.set_column(dst, &vcols[src]);
        if s > 0.0 && s > 1e-14 * sigma_max {
            let col: Vec<f64> = cols[src].iter().map(|x| x / s).collect();
            u.set_column(dst, &col);
        } else {
            missing.push(dst);
        }
    }
    if !missing.is_empty() {
        complete_orthonormal(&mut u, &missing);
    }
    SvdFactors {
        left_vectors: u,
        singular_values,
        right_vectors: v,
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed (zero) columns of `u` with unit vectors orthogonal to
/// every other column, by Gram-Schmidt over the standard basis.
pub(crate) fn complete_orthonormal(u: &mut Matrix, missing: &[usize]) {
    let m = u.rows();
    let mut filled: Vec<Vec<f64>> = (0..u.cols())
        .filter(|j| !missing.contains(j))
        .map(|j| u.column(j))
        .collect();
    let mut next = missing.iter();
    let mut target = next.next();
    for e in 0..m {
        let Some(&dst) = target else { break };
        let mut cand: Vec<f64> = (0..m).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        for _ in 0..2 {
            for b in &filled {
                let proj = dot(&cand, b);
                for (c, bi) in cand.iter_mut().zip(b) {
                    *c -= proj * bi;
                }
            }
        }
        let norm = dot(&cand, &cand).sqrt();
        if norm > 0.5 {
            cand.iter_mut().for_each(|c| *c /= norm);
            u.set_column(dst, &cand);
            filled.push(cand);
            target = next.next();
        }
    }
}
