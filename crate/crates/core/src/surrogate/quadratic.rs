use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{expected_loss_vector, CondDist, LossKind, ScoreSubspace, SubspaceKind, TaskLoss};
use crate::numerics::dot;

use super::predict;

/// Projector residual allowed for a score vector said to lie in a subspace.
const SUBSPACE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRisks {
    pub task: f64,
    pub surrogate: f64,
}

fn check_scores(f: &[f64], loss: &TaskLoss) -> Result<()> {
    if f.len() != loss.k() {
        return Err(Error::invalid(format!(
            "score vector has {} entries, loss has {} labels",
            f.len(),
            loss.k()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("score vector has non-finite entries"));
    }
    Ok(())
}

fn check_label(y: usize, loss: &TaskLoss) -> Result<()> {
    if y >= loss.k() {
        return Err(Error::invalid(format!("label {y} out of range for k = {}", loss.k())));
    }
    Ok(())
}

/// `(1/2k) ||f + L(:, y)||^2`.
pub fn quadratic_surrogate(f: &[f64], y: usize, loss: &TaskLoss) -> Result<f64> {
    check_scores(f, loss)?;
    check_label(y, loss)?;
    let col = loss.column(y);
    let s: f64 = f.iter().zip(&col).map(|(a, b)| (a + b) * (a + b)).sum();
    Ok(s / (2.0 * loss.k() as f64))
}

/// Gradient of the quadratic surrogate in the scores, `(1/k)(f + L(:, y))`.
pub fn quadratic_gradient(f: &[f64], y: usize, loss: &TaskLoss) -> Result<Vec<f64>> {
    check_scores(f, loss)?;
    check_label(y, loss)?;
    let k = loss.k() as f64;
    Ok(f.iter().zip(loss.column(y)).map(|(a, b)| (a + b) / k).collect())
}

/// `sum_y q_y ||L(:, y)||^2`.
fn weighted_column_norms(loss: &TaskLoss, q: &CondDist) -> Result<f64> {
    if loss.kind() == LossKind::Hamming {
        // Every column is a permutation of the first one.
        let t = loss.bits().expect("Hamming loss stores its bit count") as f64;
        return Ok(loss.k() as f64 * (1.0 + t) / (4.0 * t));
    }
    let q = q.to_dense()?;
    let mut total = 0.0;
    for (y, &p) in q.iter().enumerate() {
        if p != 0.0 {
            let col = loss.column(y);
            total += p * dot(&col, &col);
        }
    }
    Ok(total)
}

/// Conditional task risk `sum_c q_c L(predict(f), c)` and conditional surrogate
/// risk `sum_c q_c Phi(f, c)`.
pub fn conditional_risks(f: &[f64], q: &CondDist, loss: &TaskLoss) -> Result<ConditionalRisks> {
    check_scores(f, loss)?;
    let ell = expected_loss_vector(loss, q)?;
    let task = ell[predict(f)];
    let k = loss.k() as f64;
    let surrogate =
        (dot(f, f) + 2.0 * dot(f, &ell) + weighted_column_norms(loss, q)?) / (2.0 * k);
    Ok(ConditionalRisks { task, surrogate: surrogate.max(0.0) })
}

fn check_subspace(loss: &TaskLoss, s: &ScoreSubspace) -> Result<()> {
    if loss.k() != s.k() {
        return Err(Error::invalid(format!(
            "loss has {} labels, subspace has {} rows",
            loss.k(),
            s.k()
        )));
    }
    Ok(())
}

/// Task risk of `f` minus the best task risk reachable inside the subspace.
pub fn excess_task_risk(f: &[f64], q: &CondDist, loss: &TaskLoss, s: &ScoreSubspace) -> Result<f64> {
    check_scores(f, loss)?;
    check_subspace(loss, s)?;
    let resid = s.residual_norm(f);
    if resid > SUBSPACE_TOLERANCE * dot(f, f).sqrt().max(1.0) {
        return Err(Error::invalid(format!("score vector is outside the subspace (residual {resid:e})")));
    }
    let ell = expected_loss_vector(loss, q)?;
    let best = s
        .predictable()
        .iter()
        .map(|&c| ell[c])
        .fold(f64::INFINITY, f64::min);
    Ok((ell[predict(f)] - best).max(0.0))
}

/// `P_F L q`, skipping the projection for the unconstrained subspace.
fn projected_expected_loss(q: &CondDist, loss: &TaskLoss, s: &ScoreSubspace) -> Result<Vec<f64>> {
    let ell = expected_loss_vector(loss, q)?;
    Ok(if s.kind() == SubspaceKind::Full { ell } else { s.project(&ell) })
}

/// Excess surrogate risk at parameters `theta`, `(1/2k) ||F theta + P_F L q||^2`.
///
/// When the loss columns lie in the subspace the projection is the identity
/// and this is `(1/2k) ||F theta + L q||^2`.
pub fn excess_quadratic_surrogate(
    theta: &[f64],
    q: &CondDist,
    loss: &TaskLoss,
    s: &ScoreSubspace,
) -> Result<f64> {
    check_subspace(loss, s)?;
    if theta.len() != s.r() {
        return Err(Error::invalid(format!(
            "parameter vector has {} entries, subspace has {} columns",
            theta.len(),
            s.r()
        )));
    }
    let f = s.scores(theta);
    let v = projected_expected_loss(q, loss, s)?;
    let sq: f64 = f.iter().zip(&v).map(|(a, b)| (a + b) * (a + b)).sum();
    Ok(sq / (2.0 * loss.k() as f64))
}

/// Minimum-norm minimizer of the conditional surrogate risk, `-(F^T F)^+ F^T L q`.
pub fn optimal_parameters(q: &CondDist, loss: &TaskLoss, s: &ScoreSubspace) -> Result<Vec<f64>> {
    check_subspace(loss, s)?;
    let ell = expected_loss_vector(loss, q)?;
    if s.kind() == SubspaceKind::Full {
        return Ok(ell.iter().map(|v| -v).collect());
    }
    let factors = s.svd();
    let rank = factors.rank();
    let u = &factors.left_vectors;
    let v = &factors.right_vectors;
    let coeffs: Vec<f64> = (0..rank)
        .map(|l| {
            let ul: f64 = (0..u.rows()).map(|i| u[(i, l)] * ell[i]).sum();
            ul / factors.singular_values[l]
        })
        .collect();
    Ok((0..v.rows())
        .map(|i| -(0..rank).map(|l| v[(i, l)] * coeffs[l]).sum::<f64>())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{block_zero_one_loss, hamming_loss, score_subspace, zero_one_loss, SubspaceMode};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn surrogate_values() {
        let l = zero_one_loss(2).unwrap();
        assert!(close(quadratic_surrogate(&[0.0, 0.0], 0, &l).unwrap(), 0.25, 1e-15));
        assert_eq!(quadratic_surrogate(&[0.0, -1.0], 0, &l).unwrap(), 0.0);
        let h = hamming_loss(2, false).unwrap();
        assert!(close(quadratic_surrogate(&[0.0; 4], 0, &h).unwrap(), 0.1875, 1e-15));
        assert_eq!(quadratic_gradient(&[0.0, 0.0], 0, &l).unwrap(), vec![0.0, 0.5]);
    }

    #[test]
    fn risks_two_labels() {
        let l = zero_one_loss(2).unwrap();
        let q = CondDist::dense(vec![0.7, 0.3]).unwrap();
        let r = conditional_risks(&[1.0, 0.0], &q, &l).unwrap();
        assert!(close(r.task, 0.3, 1e-15));
        assert!(close(r.surrogate, 0.65, 1e-15));
    }

    #[test]
    fn hamming_column_norm_shortcut_matches_dense() {
        let h = hamming_loss(3, false).unwrap();
        let hd = hamming_loss(3, true).unwrap();
        let q = CondDist::hamming_factored(vec![0.2, 0.5, 0.9]).unwrap();
        let f: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = conditional_risks(&f, &q, &h).unwrap();
        let qd = CondDist::dense(q.to_dense().unwrap()).unwrap();
        let b = conditional_risks(&f, &qd, &hd).unwrap();
        let direct: f64 = qd
            .to_dense()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(y, p)| p * quadratic_surrogate(&f, y, &hd).unwrap())
            .sum();
        assert!(close(a.surrogate, direct, 1e-12));
        assert!(close(b.surrogate, direct, 1e-12));
        assert!(close(a.task, b.task, 1e-12));
    }

    #[test]
    fn excess_values() {
        let l = zero_one_loss(3).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let q = CondDist::dense(vec![0.5, 0.3, 0.2]).unwrap();
        assert!(close(excess_task_risk(&[0.0, 1.0, 0.0], &q, &l, &s).unwrap(), 0.2, 1e-15));

        let (b, _) = block_zero_one_loss(&[2, 2]).unwrap();
        let sb = score_subspace(&b, SubspaceMode::Tight).unwrap();
        let qb = CondDist::dense(vec![0.3, 0.3, 0.2, 0.2]).unwrap();
        assert!(close(excess_task_risk(&[0.0, 0.0, 1.0, 1.0], &qb, &b, &sb).unwrap(), 0.2, 1e-15));
        assert!(excess_task_risk(&[1.0, 0.0, 0.0, 0.0], &qb, &b, &sb).is_err());
    }

    #[test]
    fn optimal_parameter_values() {
        let l = zero_one_loss(2).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let q = CondDist::dense(vec![0.7, 0.3]).unwrap();
        assert_eq!(optimal_parameters(&q, &l, &s).unwrap(), vec![-0.3, -0.7]);
        assert!(close(excess_quadratic_surrogate(&[0.0, 0.0], &q, &l, &s).unwrap(), 0.145, 1e-15));

        let (b, _) = block_zero_one_loss(&[2, 2]).unwrap();
        let sb = score_subspace(&b, SubspaceMode::Tight).unwrap();
        let t = optimal_parameters(&CondDist::point_mass(4, 0), &b, &sb).unwrap();
        assert!(close(t[0], 0.0, 1e-12) && close(t[1], -1.0, 1e-12), "{t:?}");
        assert!(excess_quadratic_surrogate(&t, &CondDist::point_mass(4, 0), &b, &sb).unwrap() < 1e-24);
    }
}
