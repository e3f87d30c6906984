use serde::{Deserialize, Serialize};

use super::task_loss::{LossKind, TaskLoss, MAX_DENSE_HAMMING_BITS};
use crate::error::{Error, Result};
use crate::numerics::dot;

const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A conditional label distribution `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CondDist {
    /// Point of the probability simplex on `k` labels.
    Dense(Vec<f64>),
    /// Product distribution over `T` bits; entry `t` is `P(bit t = 1)`.
    HammingFactored(Vec<f64>),
}

impl CondDist {
    pub fn dense(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if let Some(i) = q.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("q[{i}] = {} is not a probability", q[i])));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE * (q.len() as f64).max(1.0) {
            return Err(Error::invalid(format!("distribution sums to {sum}, not 1")));
        }
        Ok(CondDist::Dense(q))
    }

    pub fn point_mass(k: usize, label: usize) -> Self {
        let mut q = vec![0.0; k];
        q[label] = 1.0;
        CondDist::Dense(q)
    }

    pub fn hamming_factored(marginals: Vec<f64>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::invalid("factored distribution needs at least one bit"));
        }
        if let Some(i) = marginals
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(Error::invalid(format!("marginal {i} = {} outside [0, 1]", marginals[i])));
        }
        Ok(CondDist::HammingFactored(marginals))
    }

    pub fn k(&self) -> usize {
        match self {
            CondDist::Dense(q) => q.len(),
            CondDist::HammingFactored(m) => 1usize << m.len(),
        }
    }

    /// Dense probability vector; the factored form is expanded as a product distribution.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        match self {
            CondDist::Dense(q) => Ok(q.clone()),
            CondDist::HammingFactored(m) => {
                if m.len() as u32 > MAX_DENSE_HAMMING_BITS {
                    return Err(Error::Capacity(format!(
                        "cannot materialize a product distribution over {} bits",
                        m.len()
                    )));
                }
                Ok((0..self.k())
                    .map(|y| {
                        m.iter()
                            .enumerate()
                            .map(|(t, &p)| if (y >> t) & 1 == 1 { p } else { 1.0 - p })
                            .product()
                    })
                    .collect())
            }
        }
    }

    /// Per-bit marginals `P(bit t = 1)` of a distribution over `2^t` labels.
    pub fn bit_marginals(&self, t: u32) -> Result<Vec<f64>> {
        match self {
            CondDist::HammingFactored(m) => Ok(m.clone()),
            CondDist::Dense(q) => {
                if q.len() != 1usize << t {
                    return Err(Error::invalid("distribution size does not match bit count"));
                }
                let mut m = vec![0.0; t as usize];
                for (y, &p) in q.iter().enumerate() {
                    for (bit, mt) in m.iter_mut().enumerate() {
                        if (y >> bit) & 1 == 1 {
                            *mt += p;
                        }
                    }
                }
                Ok(m)
            }
        }
    }
}

/// `l(q) = L q`: component `c` is the expected loss of predicting `c`.
///
/// For Hamming losses the expectation only depends on the per-bit marginals,
/// `l_c = (1/T) sum_t P(y_t != c_t)`, which is used instead of the dense product.
pub fn expected_loss_vector(loss: &TaskLoss, q: &CondDist) -> Result<Vec<f64>> {
    if q.k() != loss.k() {
        return Err(Error::invalid(format!(
            "distribution has {} labels, loss has {}",
            q.k(),
            loss.k()
        )));
    }
    if loss.kind() == LossKind::Hamming {
        let t = loss.bits().expect("Hamming loss stores its bit count");
        let m = q.bit_marginals(t)?;
        let tf = t as f64;
        return Ok((0..loss.k())
            .map(|c| {
                m.iter()
                    .enumerate()
                    .map(|(bit, &p)| if (c >> bit) & 1 == 1 { 1.0 - p } else { p })
                    .sum::<f64>()
                    / tf
            })
            .collect());
    }
    let dense_q = q.to_dense()?;
    let l = loss.dense().expect("non-Hamming losses are dense");
    Ok((0..loss.k()).map(|c| dot(l.row(c), &dense_q)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{block_zero_one_loss, hamming_loss, zero_one_loss};

    #[test]
    fn zero_one_expected_loss_is_one_minus_q() {
        let l = zero_one_loss(3).unwrap();
        let q = CondDist::dense(vec![0.5, 0.3, 0.2]).unwrap();
        let e = expected_loss_vector(&l, &q).unwrap();
        for (ec, qc) in e.iter().zip([0.5, 0.3, 0.2]) {
            assert!((ec - (1.0 - qc)).abs() < 1e-15);
        }
    }

    #[test]
    fn block_point_mass() {
        let (l, _) = block_zero_one_loss(&[2, 2]).unwrap();
        let e = expected_loss_vector(&l, &CondDist::point_mass(4, 0)).unwrap();
        assert_eq!(e, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn hamming_uniform_marginals() {
        let l = hamming_loss(2, false).unwrap();
        let q = CondDist::hamming_factored(vec![0.5, 0.5]).unwrap();
        let e = expected_loss_vector(&l, &q).unwrap();
        assert!(e.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn validation() {
        assert!(CondDist::dense(vec![0.5, 0.6]).is_err());
        assert!(CondDist::dense(vec![-0.1, 1.1]).is_err());
        assert!(CondDist::hamming_factored(vec![1.2]).is_err());
        let l = zero_one_loss(3).unwrap();
        assert!(expected_loss_vector(&l, &CondDist::point_mass(4, 0)).is_err());
    }
}
