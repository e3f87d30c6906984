use crate::error::{Error, Result};
use crate::losses::{LossKind, SubspaceKind};

use super::value::{CalibrationMethod, CalibrationQuery, CalibrationValue, Extended};

/// Closed-form calibration function for the covered (loss, subspace) pairs.
///
/// Every built-in loss has `L_max = 1`, so `epsilon > 1` is infeasible.
pub fn exact_calibration(query: &CalibrationQuery<'_>) -> Result<CalibrationValue> {
    let formula = exact_formula(query)?;
    let eps = query.epsilon;
    let value = if eps > 1.0 {
        Extended::Infinite
    } else {
        Extended::Finite(formula.eval(eps))
    };
    Ok(CalibrationValue::new(value, CalibrationMethod::Exact))
}

/// One of the closed-form calibration functions, valid for `0 <= eps <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactFormula {
    /// `eps^2 / (4k) * factor`.
    Quadratic { k: f64, factor: f64 },
    /// Mixed loss, unconstrained scores, `b` equal blocks of size `s`.
    MixedUnconstrained { k: f64, s: f64, eta: f64 },
    /// Mixed loss, block-constant scores, `b` equal blocks.
    MixedBlock { k: f64, b: f64, eta: f64 },
}

impl ExactFormula {
    pub fn eval(&self, eps: f64) -> f64 {
        match *self {
            ExactFormula::Quadratic { k, factor } => eps * eps / (4.0 * k) * factor,
            ExactFormula::MixedUnconstrained { k, s, eta } => {
                if eta >= 1.0 || eps <= eta / (1.0 - eta) {
                    mixed_first_branch(k, eps)
                } else {
                    mixed_second_branch(k, s, eta, eps)
                }
            }
            ExactFormula::MixedBlock { k, b, eta } => {
                if eps <= eta / 2.0 {
                    0.0
                } else {
                    let shift = eps - eta / 2.0;
                    let ratio = (eta * b / k + 1.0 - eta) / (1.0 - eta / 2.0);
                    shift * shift / (4.0 * b) * ratio * ratio
                }
            }
        }
    }

    /// Largest `eps` with zero calibration value (the consistency level).
    pub fn zero_level(&self) -> f64 {
        match *self {
            ExactFormula::MixedBlock { eta, .. } => eta / 2.0,
            _ => 0.0,
        }
    }
}

fn mixed_first_branch(k: f64, eps: f64) -> f64 {
    eps * eps / (4.0 * k)
}

fn mixed_second_branch(k: f64, s: f64, eta: f64, eps: f64) -> f64 {
    eps * eps * s / (2.0 * k * (s + 1.0))
        - eta * (eps + 1.0) * (s - 1.0) / (4.0 * k * (s + 1.0)) * (2.0 * eps - eps * eta - eta)
}

/// Absolute difference of the two branches of the mixed-loss unconstrained
/// formula at their switch point `eps = eta / (1 - eta)`, or `None` when the
/// switch point lies outside `[0, 1]`.
pub fn mixed_branch_gap(k: usize, block_size: usize, eta: f64) -> Option<f64> {
    if eta >= 1.0 {
        return None;
    }
    let point = eta / (1.0 - eta);
    if point > 1.0 {
        return None;
    }
    let (k, s) = (k as f64, block_size as f64);
    Some((mixed_first_branch(k, point) - mixed_second_branch(k, s, eta, point)).abs())
}

pub fn exact_formula(query: &CalibrationQuery<'_>) -> Result<ExactFormula> {
    let loss = query.loss;
    let s = query.subspace;
    let k = loss.k() as f64;
    let same_blocks = s.blocks().is_some() && s.blocks() == loss.blocks();
    let uncovered = || {
        Err(Error::Unsupported(format!(
            "no closed form for {:?} loss with {:?} scores",
            loss.kind(),
            s.kind()
        )))
    };
    match (loss.kind(), s.kind()) {
        (LossKind::ZeroOne, SubspaceKind::Full) => Ok(ExactFormula::Quadratic { k, factor: 1.0 }),
        (LossKind::BlockZeroOne, SubspaceKind::Full) => {
            let blocks = loss.blocks().expect("block loss keeps its blocks");
            let factor = blocks
                .sizes()
                .iter()
                .map(|&sv| 2.0 * sv as f64 / (sv as f64 + 1.0))
                .fold(f64::INFINITY, f64::min);
            Ok(ExactFormula::Quadratic { k, factor })
        }
        (LossKind::BlockZeroOne, SubspaceKind::BlockIndicator) if same_blocks => {
            let sizes = loss.blocks().expect("block loss keeps its blocks").sizes();
            let mut factor = f64::INFINITY;
            for (u, &su) in sizes.iter().enumerate() {
                for &sv in &sizes[u + 1..] {
                    let (su, sv) = (su as f64, sv as f64);
                    factor = factor.min(2.0 * su * sv / (su + sv));
                }
            }
            Ok(ExactFormula::Quadratic { k, factor })
        }
        (LossKind::Hamming, SubspaceKind::HammingBasis) if s.bits() == loss.bits() => {
            let t = loss.bits().expect("Hamming loss stores its bit count") as f64;
            // eps^2 / (8T) = eps^2 / (4k) * k / (2T)
            Ok(ExactFormula::Quadratic { k, factor: k / (2.0 * t) })
        }
        (LossKind::Mixed, SubspaceKind::Full) => {
            let blocks = loss.blocks().expect("mixed loss keeps its blocks");
            let eta = loss.eta().expect("mixed loss stores eta");
            match blocks.equal_size() {
                Some(size) => Ok(ExactFormula::MixedUnconstrained { k, s: size as f64, eta }),
                None => uncovered(),
            }
        }
        (LossKind::Mixed, SubspaceKind::BlockIndicator) if same_blocks => {
            let blocks = loss.blocks().expect("mixed loss keeps its blocks");
            let eta = loss.eta().expect("mixed loss stores eta");
            match blocks.equal_size() {
                Some(_) => Ok(ExactFormula::MixedBlock { k, b: blocks.num_blocks() as f64, eta }),
                None => uncovered(),
            }
        }
        _ => uncovered(),
    }
}
