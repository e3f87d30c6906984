use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ScoreSubspace, SubspaceKind};
use crate::numerics::Matrix;

use super::value::{CalibrationMethod, CalibrationQuery, CalibrationValue};

/// `max_{i != j} ||P_F (e_i - e_j)||^2`, using closed forms where known.
pub fn max_projected_pair_norm(s: &ScoreSubspace) -> f64 {
    match s.kind() {
        SubspaceKind::Full => 2.0,
        SubspaceKind::HammingBasis => {
            let t = s.bits().expect("Hamming subspace stores its bit count");
            4.0 * t as f64 / (1u64 << t) as f64
        }
        SubspaceKind::BlockIndicator => {
            // 1/s_u + 1/s_v for labels in different blocks, zero within a block.
            let mut sizes = s.blocks().expect("block subspace keeps its blocks").sizes().to_vec();
            sizes.sort_unstable();
            1.0 / sizes[0] as f64 + 1.0 / sizes[1] as f64
        }
        SubspaceKind::Custom => max_projected_pair_norm_dense(s),
    }
}

/// Brute force over all label pairs: `||B^T (e_i - e_j)||^2` for an
/// orthonormal basis `B` of the subspace.
pub fn max_projected_pair_norm_dense(s: &ScoreSubspace) -> f64 {
    pair_norm_max(s.basis())
}

fn pair_norm_max(basis: &Matrix) -> f64 {
    let k = basis.rows();
    let mut best: f64 = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let d: f64 = basis
                .row(i)
                .iter()
                .zip(basis.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.max(d);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBounds {
    /// `eps^2 / (2k max_{i != j} ||P_F (e_i - e_j)||^2)`.
    pub tight: f64,
    /// `eps^2 / (4k)`.
    pub crude: f64,
}

impl LowerBounds {
    pub fn tight_value(&self) -> CalibrationValue {
        CalibrationValue::finite(self.tight, CalibrationMethod::LowerBound)
    }

    pub fn crude_value(&self) -> CalibrationValue {
        CalibrationValue::finite(self.crude, CalibrationMethod::LowerBound)
    }
}

/// Lower bounds on the calibration function; valid only when the loss columns
/// lie in the score subspace.
pub fn lower_bound(query: &CalibrationQuery<'_>) -> Result<LowerBounds> {
    if !query.subspace.contains_loss_columns(query.loss)? {
        return Err(Error::Hypothesis(
            "lower bound needs the loss columns to lie in the score subspace".into(),
        ));
    }
    let k = query.k() as f64;
    let eps2 = query.epsilon * query.epsilon;
    let norm = max_projected_pair_norm(query.subspace);
    Ok(LowerBounds {
        tight: eps2 / (2.0 * k * norm),
        crude: eps2 / (4.0 * k),
    })
}

/// `eps^2 / (2k)`, valid for unconstrained scores, a pseudometric loss and
/// `eps <= L_max`.
pub fn upper_bound(query: &CalibrationQuery<'_>) -> Result<CalibrationValue> {
    if query.subspace.kind() != SubspaceKind::Full {
        return Err(Error::Hypothesis("upper bound needs unconstrained scores".into()));
    }
    let pseudometric = match query.loss.known_pseudometric() {
        Some(flag) => flag,
        None => query.loss.is_pseudometric()?,
    };
    if !pseudometric {
        return Err(Error::Hypothesis("upper bound needs a pseudometric loss".into()));
    }
    if query.epsilon > query.loss.l_max() {
        return Err(Error::Hypothesis(format!(
            "upper bound holds for epsilon <= L_max = {}",
            query.loss.l_max()
        )));
    }
    let k = query.k() as f64;
    Ok(CalibrationValue::finite(
        query.epsilon * query.epsilon / (2.0 * k),
        CalibrationMethod::UpperBound,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{
        block_zero_one_loss, custom_loss, hamming_loss, mixed_loss, score_subspace, zero_one_loss,
        SubspaceMode, TaskLoss,
    };

    fn query_bounds(loss: &TaskLoss, mode: SubspaceMode, eps: f64) -> Result<LowerBounds> {
        let s = score_subspace(loss, mode).unwrap();
        lower_bound(&CalibrationQuery::new(loss, &s, eps).unwrap())
    }

    #[test]
    fn lower_bound_values() {
        let b = query_bounds(&zero_one_loss(4).unwrap(), SubspaceMode::Unconstrained, 1.0).unwrap();
        assert_eq!(b.tight, 0.0625);
        assert_eq!(b.crude, 0.0625);
        let (bl, _) = block_zero_one_loss(&[2, 2]).unwrap();
        assert_eq!(query_bounds(&bl, SubspaceMode::Tight, 1.0).unwrap().tight, 0.125);
        let h = query_bounds(&hamming_loss(3, false).unwrap(), SubspaceMode::Tight, 1.0).unwrap();
        assert!((h.tight - 1.0 / 24.0).abs() < 1e-15);
        assert!(h.tight >= h.crude);
        let m = mixed_loss(&[2, 2], 0.4).unwrap();
        assert!(matches!(query_bounds(&m, SubspaceMode::Tight, 0.5), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn pair_norm_closed_forms_match_brute_force() {
        for t in 1..=6 {
            let s = score_subspace(&hamming_loss(t, false).unwrap(), SubspaceMode::Tight).unwrap();
            let closed = max_projected_pair_norm(&s);
            assert!((closed - max_projected_pair_norm_dense(&s)).abs() < 1e-10, "T = {t}");
        }
        let (b, _) = block_zero_one_loss(&[3, 1, 2]).unwrap();
        let s = score_subspace(&b, SubspaceMode::Tight).unwrap();
        assert!((max_projected_pair_norm(&s) - 1.5).abs() < 1e-15);
        assert!((max_projected_pair_norm_dense(&s) - 1.5).abs() < 1e-12);
        let full = score_subspace(&zero_one_loss(5).unwrap(), SubspaceMode::Unconstrained).unwrap();
        assert!((max_projected_pair_norm_dense(&full) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_hypotheses() {
        let l = zero_one_loss(4).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let v = upper_bound(&CalibrationQuery::new(&l, &s, 1.0).unwrap()).unwrap();
        assert_eq!(v.value.finite(), Some(0.125));
        let h = hamming_loss(2, false).unwrap();
        let sh = score_subspace(&h, SubspaceMode::Unconstrained).unwrap();
        let v = upper_bound(&CalibrationQuery::new(&h, &sh, 0.5).unwrap()).unwrap();
        assert_eq!(v.value.finite(), Some(0.03125));
        let c = custom_loss(Matrix::from_rows(&[vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap()).unwrap();
        let sc = score_subspace(&c, SubspaceMode::Unconstrained).unwrap();
        assert!(matches!(
            upper_bound(&CalibrationQuery::new(&c, &sc, 0.5).unwrap()),
            Err(Error::Hypothesis(_))
        ));
    }
}
