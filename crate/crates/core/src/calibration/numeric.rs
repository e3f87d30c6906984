use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::losses::{LossKind, ScoreSubspace, SubspaceKind, TaskLoss};
use crate::numerics::{solve_qp, LinearConstraint, Matrix, QpOutcome, QpProblem};

use super::value::{CalibrationMethod, CalibrationQuery, CalibrationValue, Certificate, Extended};

/// Largest label count for which the pair programs are assembled densely.
pub const MAX_NUMERIC_LABELS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericOptions {
    pub tolerance: f64,
    /// Multiplies the surrogate (and hence every program objective).
    pub objective_scale: f64,
    /// Restrict to one representative pair per orbit of the loss symmetry group.
    pub prune_symmetric_pairs: bool,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            tolerance: 1e-9,
            objective_scale: 1.0,
            prune_symmetric_pairs: true,
        }
    }
}

/// Data shared by all pair programs of one (loss, subspace).
struct PairProgramData {
    k: usize,
    m: usize,
    loss: Matrix,
    /// `B^T L` for the orthonormal range basis `B`.
    g: Matrix,
    basis: Matrix,
}

impl PairProgramData {
    fn new(loss: &TaskLoss, s: &ScoreSubspace) -> Result<Self> {
        let dense = loss.to_dense()?;
        let basis = s.basis().clone();
        let g = basis.tr_matmul(&dense);
        Ok(PairProgramData {
            k: loss.k(),
            m: basis.cols(),
            loss: dense,
            g,
            basis,
        })
    }

    /// Variables `x = (w, q)` with scores `f = B w`; the objective
    /// `(c/2k) ||w + B^T L q||^2` equals `(c/2k) ||F theta + P_F L q||^2`.
    fn program(&self, i: usize, j: usize, eps: f64, predictable: &[usize], scale: f64) -> QpProblem {
        let (k, m) = (self.k, self.m);
        let n = m + k;
        let c = scale / k as f64;
        let mut p = Matrix::zeros(n, n);
        for a in 0..m {
            p[(a, a)] = c;
            for y in 0..k {
                let v = c * self.g[(a, y)];
                p[(a, m + y)] = v;
                p[(m + y, a)] = v;
            }
        }
        let gtg = self.g.tr_matmul(&self.g);
        for y in 0..k {
            for z in 0..k {
                p[(m + y, m + z)] = c * gtg[(y, z)];
            }
        }
        let mut problem = QpProblem::new(p, vec![0.0; n]);

        let loss_row_diff = |a: usize, b: usize| {
            let mut normal = vec![0.0; n];
            for y in 0..k {
                normal[m + y] = self.loss[(a, y)] - self.loss[(b, y)];
            }
            normal
        };
        // l_i <= l_j - eps
        problem.inequalities.push(LinearConstraint::new(loss_row_diff(i, j), -eps));
        for &cl in predictable {
            if cl != i && cl != j {
                // l_i <= l_c
                problem.inequalities.push(LinearConstraint::new(loss_row_diff(i, cl), 0.0));
            }
            if cl != j {
                // f_c <= f_j
                let mut normal = vec![0.0; n];
                for a in 0..m {
                    normal[a] = self.basis[(cl, a)] - self.basis[(j, a)];
                }
                problem.inequalities.push(LinearConstraint::new(normal, 0.0));
            }
        }
        for y in 0..k {
            let mut normal = vec![0.0; n];
            normal[m + y] = -1.0;
            problem.inequalities.push(LinearConstraint::new(normal, 0.0));
        }
        let mut simplex = vec![0.0; n];
        simplex[m..].iter_mut().for_each(|v| *v = 1.0);
        problem.equalities.push(LinearConstraint::new(simplex, 1.0));
        problem
    }
}

/// `theta` with `F theta = B w`, i.e. `V_r Sigma_r^{-1} w`.
fn parameters_from_basis_coords(s: &ScoreSubspace, w: &[f64]) -> Vec<f64> {
    if s.kind() == SubspaceKind::Full {
        return w.to_vec();
    }
    let f = s.svd();
    let v = &f.right_vectors;
    (0..v.rows())
        .map(|row| (0..w.len()).map(|l| v[(row, l)] * w[l] / f.singular_values[l]).sum())
        .collect()
}

fn clean_distribution(q: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = q.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.iter().map(|v| v / total).collect()
}

fn check_predictable(s: &ScoreSubspace, labels: &[usize]) -> Result<()> {
    for &l in labels {
        if !s.predictable().contains(&l) {
            return Err(Error::invalid(format!("label {l} is not predictable in this subspace")));
        }
    }
    Ok(())
}

fn check_capacity(k: usize) -> Result<()> {
    if k > MAX_NUMERIC_LABELS {
        return Err(Error::Capacity(format!(
            "numeric calibration assembles dense programs and is limited to k <= {MAX_NUMERIC_LABELS}, got {k}; use exact values or bounds instead"
        )));
    }
    Ok(())
}

fn solve_pair(
    data: &PairProgramData,
    query: &CalibrationQuery<'_>,
    i: usize,
    j: usize,
    options: &NumericOptions,
) -> Result<CalibrationValue> {
    let s = query.subspace;
    let problem = data.program(i, j, query.epsilon, s.predictable(), options.objective_scale);
    let mut value = match solve_qp(&problem, options.tolerance)? {
        QpOutcome::Infeasible { .. } => CalibrationValue::new(Extended::Infinite, CalibrationMethod::Numeric),
        QpOutcome::Optimal(sol) => {
            let (w, q) = sol.x.split_at(data.m);
            let mut v = CalibrationValue::finite(sol.objective.max(0.0), CalibrationMethod::Numeric);
            v.certificate = Some(Certificate {
                i,
                j,
                q: clean_distribution(q),
                theta: parameters_from_basis_coords(s, w),
            });
            if sol.relaxed {
                v.diagnostic = Some("feasible set has empty interior; solved with relaxed inequalities".into());
            }
            v
        }
    };
    value.heuristic = !s.predictable_exact();
    Ok(value)
}

/// `H_ij(eps)`: the calibration program restricted to "label `i` is optimal,
/// label `j` is predicted".
pub fn pair_calibration(i: usize, j: usize, query: &CalibrationQuery<'_>) -> Result<CalibrationValue> {
    pair_calibration_with(i, j, query, &NumericOptions::default())
}

pub fn pair_calibration_with(
    i: usize,
    j: usize,
    query: &CalibrationQuery<'_>,
    options: &NumericOptions,
) -> Result<CalibrationValue> {
    if i == j {
        return Err(Error::invalid("pair calibration needs two distinct labels"));
    }
    check_capacity(query.k())?;
    check_predictable(query.subspace, &[i, j])?;
    let data = PairProgramData::new(query.loss, query.subspace)?;
    solve_pair(&data, query, i, j, options)
}

/// Ordered predictable pairs `(i, j)`, reduced to orbit representatives when
/// the loss and subspace share a known symmetry group.
pub fn candidate_pairs(loss: &TaskLoss, s: &ScoreSubspace, prune: bool) -> Vec<(usize, usize)> {
    if prune {
        if let Some(pairs) = symmetric_representatives(loss, s) {
            return pairs;
        }
    }
    let pred = s.predictable();
    let mut pairs = Vec::with_capacity(pred.len() * pred.len());
    for &i in pred {
        for &j in pred {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn symmetric_representatives(loss: &TaskLoss, s: &ScoreSubspace) -> Option<Vec<(usize, usize)>> {
    let full = s.kind() == SubspaceKind::Full;
    match loss.kind() {
        // Any label permutation.
        LossKind::ZeroOne if full => Some(vec![(0, 1)]),
        // Permutations inside blocks and between equal-size blocks.
        LossKind::BlockZeroOne | LossKind::Mixed
            if full || (s.kind() == SubspaceKind::BlockIndicator && s.blocks() == loss.blocks()) =>
        {
            let blocks = loss.blocks()?;
            let sizes = blocks.sizes();
            let mut seen = BTreeSet::new();
            let mut pairs = Vec::new();
            for (u, &su) in sizes.iter().enumerate() {
                if full && su >= 2 && seen.insert((su, su, true)) {
                    pairs.push((blocks.first_label(u), blocks.first_label(u) + 1));
                }
                for (v, &sv) in sizes.iter().enumerate() {
                    if u != v && seen.insert((su, sv, false)) {
                        pairs.push((blocks.first_label(u), blocks.first_label(v)));
                    }
                }
            }
            Some(pairs)
        }
        // Bit flips and bit permutations: only the Hamming distance of the pair matters.
        LossKind::Hamming if full || (s.kind() == SubspaceKind::HammingBasis && s.bits() == loss.bits()) => {
            let t = loss.bits()?;
            Some((1..=t).map(|d| (0, (1usize << d) - 1)).collect())
        }
        _ => None,
    }
}

/// `H(eps) = min over ordered predictable pairs of H_ij(eps)`.
pub fn numeric_calibration(query: &CalibrationQuery<'_>) -> Result<CalibrationValue> {
    numeric_calibration_with(query, &NumericOptions::default())
}

pub fn numeric_calibration_with(
    query: &CalibrationQuery<'_>,
    options: &NumericOptions,
) -> Result<CalibrationValue> {
    check_capacity(query.k())?;
    let s = query.subspace;
    if query.epsilon == 0.0 {
        let mut v = CalibrationValue::finite(0.0, CalibrationMethod::Numeric);
        v.heuristic = !s.predictable_exact();
        return Ok(v);
    }
    let data = PairProgramData::new(query.loss, s)?;
    let pairs = candidate_pairs(query.loss, s, options.prune_symmetric_pairs);
    let results: Vec<CalibrationValue> = pairs
        .par_iter()
        .map(|&(i, j)| solve_pair(&data, query, i, j, options))
        .collect::<Result<_>>()?;
    let mut best = CalibrationValue::new(Extended::Infinite, CalibrationMethod::Numeric);
    best.heuristic = !s.predictable_exact();
    for r in results {
        if r.value.total_cmp(&best.value).is_lt() {
            best = r;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{hamming_loss, mixed_loss, score_subspace, zero_one_loss, SubspaceMode};

    #[test]
    fn zero_one_three_labels() {
        let l = zero_one_loss(3).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let q = CalibrationQuery::new(&l, &s, 0.5).unwrap();
        for (i, j) in [(0, 1), (2, 0), (1, 2)] {
            let v = pair_calibration(i, j, &q).unwrap();
            assert!((v.value.finite().unwrap() - 0.25 / 12.0).abs() < 1e-7, "{v:?}");
            let check = v.certificate.unwrap().check(&q).unwrap();
            assert!(check.max_violation < 1e-7 && check.task_excess >= 0.5 - 1e-7);
        }
        let far = CalibrationQuery::new(&l, &s, 1.2).unwrap();
        assert!(pair_calibration(0, 1, &far).unwrap().value.is_infinite());
        assert!(numeric_calibration(&far).unwrap().value.is_infinite());
    }

    #[test]
    fn mixed_block_plateau() {
        let m = mixed_loss(&[2, 2], 0.4).unwrap();
        let s = score_subspace(&m, SubspaceMode::Tight).unwrap();
        let q = CalibrationQuery::new(&m, &s, 0.1).unwrap();
        let v = pair_calibration(0, 2, &q).unwrap();
        assert!(v.value.finite().unwrap() < 1e-8);
        assert!(pair_calibration(0, 1, &q).is_err());
    }

    #[test]
    fn hamming_tight_matches_closed_form() {
        let h = hamming_loss(3, false).unwrap();
        let s = score_subspace(&h, SubspaceMode::Tight).unwrap();
        let v = numeric_calibration(&CalibrationQuery::new(&h, &s, 0.5).unwrap()).unwrap();
        assert!((v.value.finite().unwrap() - 0.25 / 24.0).abs() < 1e-5);
    }

    #[test]
    fn pruned_pairs_agree_with_all_pairs() {
        let m = mixed_loss(&[1, 2], 0.3).unwrap();
        let s = score_subspace(&m, SubspaceMode::Unconstrained).unwrap();
        assert!(candidate_pairs(&m, &s, true).len() < candidate_pairs(&m, &s, false).len());
        let q = CalibrationQuery::new(&m, &s, 0.6).unwrap();
        let pruned = numeric_calibration(&q).unwrap().value.finite().unwrap();
        let all = numeric_calibration_with(
            &q,
            &NumericOptions { prune_symmetric_pairs: false, ..Default::default() },
        )
        .unwrap()
        .value
        .finite()
        .unwrap();
        assert!((pruned - all).abs() < 1e-8);
    }

    #[test]
    fn capacity_guard() {
        let l = zero_one_loss(300).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let q = CalibrationQuery::new(&l, &s, 0.5).unwrap();
        assert!(matches!(numeric_calibration(&q), Err(Error::Capacity(_))));
    }
}
