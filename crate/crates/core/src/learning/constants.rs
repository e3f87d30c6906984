use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::ScoreSubspace;

/// `xi(z) = z^2 + z`.
pub fn xi(z: f64) -> f64 {
    z * z + z
}

/// Norm bound `D`, gradient bound `M` and step size of averaged SGD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConstants {
    #[serde(rename = "D")]
    pub d_bound: f64,
    #[serde(rename = "M")]
    pub m_bound: f64,
    #[serde(rename = "DM")]
    pub dm: f64,
    /// `2D / (M sqrt(n))`.
    pub gamma: f64,
    pub n: u64,
    pub condition_number: f64,
    pub rank: usize,
}

/// `D = sqrt(r) / sigma_min(F) * sqrt(k) L_max Q` and
/// `M = sigma_max^2 D R^2 / k + sigma_max sqrt(k) L_max R / k`, with `r = rank(F)`.
pub fn compute_constants(
    s: &ScoreSubspace,
    l_max: f64,
    r_bound: f64,
    q_bound: f64,
    n: u64,
) -> Result<SgdConstants> {
    if n == 0 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }
    for (name, v) in [("L_max", l_max), ("R", r_bound), ("Q", q_bound)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let svd = s.svd();
    let rank = svd.rank();
    if rank < s.r() {
        return Err(Error::SingularSubspace);
    }
    let sigma_min = svd.sigma_min();
    let sigma_max = svd.sigma_max();
    let k = s.k() as f64;
    let r = rank as f64;
    let d_bound = r.sqrt() / sigma_min * k.sqrt() * l_max * q_bound;
    let m_bound = sigma_max * sigma_max * d_bound * r_bound * r_bound / k + sigma_max * k.sqrt() * l_max * r_bound / k;
    let dm = d_bound * m_bound;
    let kappa = sigma_max / sigma_min;
    let closed = l_max * l_max * xi(kappa * r.sqrt() * r_bound * q_bound);
    if (dm - closed).abs() > 1e-9 * closed.max(1e-300) {
        return Err(Error::Convergence {
            message: format!("DM = {dm} disagrees with L_max^2 xi(kappa sqrt(r) R Q) = {closed}"),
            best: vec![dm, closed],
        });
    }
    Ok(SgdConstants {
        d_bound,
        m_bound,
        dm,
        gamma: 2.0 * d_bound / (m_bound * (n as f64).sqrt()),
        n,
        condition_number: kappa,
        rank,
    })
}

/// Iterations sufficient for excess task risk below the accuracy whose
/// calibration envelope value is given: `ceil(4 (DM)^2 / H^2) + 1`.
pub fn iteration_bound(constants: &SgdConstants, envelope_value: f64) -> Result<u64> {
    if !(envelope_value > 0.0) {
        return Err(Error::NotConsistent { envelope: envelope_value });
    }
    let n = (4.0 * constants.dm * constants.dm / (envelope_value * envelope_value)).ceil();
    if !n.is_finite() || n >= u64::MAX as f64 {
        return Err(Error::Capacity(format!("iteration bound {n:e} does not fit in 64 bits")));
    }
    Ok(n as u64 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{block_zero_one_loss, hamming_loss, score_subspace, zero_one_loss, SubspaceMode};

    #[test]
    fn zero_one_and_block_products() {
        let s = score_subspace(&zero_one_loss(4).unwrap(), SubspaceMode::Unconstrained).unwrap();
        let c = compute_constants(&s, 1.0, 1.0, 1.0, 100).unwrap();
        assert!((c.dm - 6.0).abs() < 1e-12);
        assert!((c.gamma - 2.0 * c.d_bound / (c.m_bound * 10.0)).abs() < 1e-15);
        let (b, _) = block_zero_one_loss(&[2, 2]).unwrap();
        let s = score_subspace(&b, SubspaceMode::Tight).unwrap();
        let c = compute_constants(&s, 1.0, 1.0, 1.0, 1).unwrap();
        assert!((c.dm - (2.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn hamming_condition_number() {
        let s = score_subspace(&hamming_loss(2, false).unwrap(), SubspaceMode::Tight).unwrap();
        let c = compute_constants(&s, 1.0, 1.0, 1.0, 1).unwrap();
        assert!((c.condition_number - (2.0 + 3f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn iteration_bounds() {
        let s = score_subspace(&zero_one_loss(4).unwrap(), SubspaceMode::Unconstrained).unwrap();
        let c = compute_constants(&s, 1.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(iteration_bound(&c, 0.015625).unwrap(), 589_825);
        assert!(matches!(iteration_bound(&c, 0.0), Err(Error::NotConsistent { .. })));
        let doubled = SgdConstants { dm: 12.0, ..c };
        assert_eq!(iteration_bound(&doubled, 0.015625).unwrap(), 4 * 589_824 + 1);
    }
}
