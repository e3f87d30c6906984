use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::TaskLoss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbFamily {
    /// `a(f) = f`, `b(f) = f^2 / 2`.
    Quadratic,
    /// `a(f) = (e^f - e^-f) / L_max`, `b(f) = e^-f`.
    ExpPair,
    /// `a(f) = f / L_max`, `b(f) = log(1 + e^-f)`.
    Logistic,
}

/// A member of the `Phi_{a,b}(f, y) = (1/k) sum_c (L(c, y) a(f_c) + b(f_c))` family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbSurrogateKind {
    pub family: AbFamily,
    pub l_max: f64,
}

/// Optimal score for a given expected loss; may be infinite at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinkValue {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl LinkValue {
    pub fn to_f64(self) -> f64 {
        match self {
            LinkValue::Finite(v) => v,
            LinkValue::PosInfinity => f64::INFINITY,
            LinkValue::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LinkValue::Finite(_))
    }
}

impl AbSurrogateKind {
    pub fn new(family: AbFamily, l_max: f64) -> Result<Self> {
        if !(l_max.is_finite() && l_max > 0.0) {
            return Err(Error::invalid(format!("l_max must be positive, got {l_max}")));
        }
        Ok(AbSurrogateKind { family, l_max })
    }

    pub fn a(&self, f: f64) -> f64 {
        match self.family {
            AbFamily::Quadratic => f,
            AbFamily::ExpPair => (f.exp() - (-f).exp()) / self.l_max,
            AbFamily::Logistic => f / self.l_max,
        }
    }

    pub fn b(&self, f: f64) -> f64 {
        match self.family {
            AbFamily::Quadratic => 0.5 * f * f,
            AbFamily::ExpPair => (-f).exp(),
            AbFamily::Logistic => softplus(-f),
        }
    }

    pub fn a_prime(&self, f: f64) -> f64 {
        match self.family {
            AbFamily::Quadratic => 1.0,
            AbFamily::ExpPair => (f.exp() + (-f).exp()) / self.l_max,
            AbFamily::Logistic => 1.0 / self.l_max,
        }
    }

    pub fn b_prime(&self, f: f64) -> f64 {
        match self.family {
            AbFamily::Quadratic => f,
            AbFamily::ExpPair => -(-f).exp(),
            AbFamily::Logistic => -1.0 / (1.0 + f.exp()),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn ab_surrogate(kind: &AbSurrogateKind, f: &[f64], y: usize, loss: &TaskLoss) -> Result<f64> {
    if f.len() != loss.k() {
        return Err(Error::invalid("score vector and loss sizes differ"));
    }
    if y >= loss.k() {
        return Err(Error::invalid(format!("label {y} out of range for k = {}", loss.k())));
    }
    let col = loss.column(y);
    let s: f64 = f
        .iter()
        .zip(&col)
        .map(|(&fc, &l)| l * kind.a(fc) + kind.b(fc))
        .sum();
    Ok(s / loss.k() as f64)
}

/// Minimizer over `f` of `ell * a(f) + b(f)`.
pub fn ab_optimal_link(kind: &AbSurrogateKind, expected_loss: f64) -> Result<LinkValue> {
    let l_max = kind.l_max;
    if !expected_loss.is_finite() || expected_loss < 0.0 || expected_loss > l_max {
        return Err(Error::invalid(format!(
            "expected loss {expected_loss} outside [0, {l_max}]"
        )));
    }
    if kind.family == AbFamily::Quadratic {
        return Ok(LinkValue::Finite(-expected_loss));
    }
    if expected_loss == 0.0 {
        return Ok(LinkValue::PosInfinity);
    }
    if expected_loss == l_max {
        return Ok(LinkValue::NegInfinity);
    }
    let ratio = expected_loss / l_max;
    let logit = (-ratio).ln_1p() - ratio.ln();
    Ok(LinkValue::Finite(match kind.family {
        AbFamily::ExpPair => 0.5 * logit,
        _ => logit,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::zero_one_loss;
    use crate::surrogate::quadratic_surrogate;

    #[test]
    fn family_values_at_zero() {
        let l = zero_one_loss(2).unwrap();
        let logistic = AbSurrogateKind::new(AbFamily::Logistic, 1.0).unwrap();
        let v = ab_surrogate(&logistic, &[0.0, 0.0], 0, &l).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        let exp = AbSurrogateKind::new(AbFamily::ExpPair, 1.0).unwrap();
        for y in 0..2 {
            assert_eq!(ab_surrogate(&exp, &[0.0, 0.0], y, &l).unwrap(), 1.0);
        }
    }

    #[test]
    fn quadratic_family_offset_is_constant() {
        let l = zero_one_loss(3).unwrap();
        let quad = AbSurrogateKind::new(AbFamily::Quadratic, 1.0).unwrap();
        let diff = |f: &[f64]| ab_surrogate(&quad, f, 1, &l).unwrap() - quadratic_surrogate(f, 1, &l).unwrap();
        let d0 = diff(&[0.0, 0.0, 0.0]);
        assert!((d0 + 2.0 / 6.0).abs() < 1e-15);
        assert!((diff(&[1.5, -0.3, 2.0]) - d0).abs() < 1e-12);
    }

    #[test]
    fn links() {
        let quad = AbSurrogateKind::new(AbFamily::Quadratic, 1.0).unwrap();
        assert_eq!(ab_optimal_link(&quad, 0.4).unwrap(), LinkValue::Finite(-0.4));
        for fam in [AbFamily::Logistic, AbFamily::ExpPair] {
            let k = AbSurrogateKind::new(fam, 1.0).unwrap();
            assert_eq!(ab_optimal_link(&k, 0.5).unwrap(), LinkValue::Finite(0.0));
            assert_eq!(ab_optimal_link(&k, 0.0).unwrap(), LinkValue::PosInfinity);
            assert_eq!(ab_optimal_link(&k, 1.0).unwrap(), LinkValue::NegInfinity);
            assert!(ab_optimal_link(&k, 1.2).is_err());
            for ell in [0.05, 0.3, 0.77, 0.99] {
                let f = ab_optimal_link(&k, ell).unwrap().to_f64();
                assert!((k.b_prime(f) / k.a_prime(f) + ell).abs() < 1e-9);
            }
        }
    }
}
