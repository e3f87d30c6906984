use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::losses::{expected_loss_vector, CondDist, ScoreSubspace, TaskLoss};
use crate::surrogate::excess_quadratic_surrogate;

/// A nonnegative real or `+inf` (the value of an infeasible program).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Extended::Infinite
    }

    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn min(self, other: Extended) -> Extended {
        if self.total_cmp(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn total_cmp(&self, other: &Extended) -> Ordering {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.total_cmp(b),
            (Extended::Finite(_), Extended::Infinite) => Ordering::Less,
            (Extended::Infinite, Extended::Finite(_)) => Ordering::Greater,
            (Extended::Infinite, Extended::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Extended::Finite(v)),
            Repr::Text(t) if t == "inf" => Ok(Extended::Infinite),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CalibrationMethod {
    Exact,
    Numeric,
    LowerBound,
    UpperBound,
    Sampled,
}

/// A feasible point of the pair program for labels `(i, j)`: under `q`, label
/// `i` is the best predictable label, `j` is at least `epsilon` worse, and the
/// scores `F theta` rank `j` first among predictable labels (ties allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub i: usize,
    pub j: usize,
    pub q: Vec<f64>,
    pub theta: Vec<f64>,
}

/// How well a certificate satisfies its program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub objective: f64,
    /// Largest violation of the label ordering, score ordering and simplex constraints.
    pub max_violation: f64,
    /// `l_j(q) - min over predictable c of l_c(q)`.
    pub task_excess: f64,
}

impl Certificate {
    pub fn check(&self, query: &CalibrationQuery<'_>) -> Result<WitnessCheck> {
        let loss = query.loss;
        let s = query.subspace;
        let q = CondDist::dense(self.q.clone())?;
        let ell = expected_loss_vector(loss, &q)?;
        let f = s.scores(&self.theta);
        let objective = excess_quadratic_surrogate(&self.theta, &q, loss, s)?;
        let pred = s.predictable();
        let best = pred.iter().map(|&c| ell[c]).fold(f64::INFINITY, f64::min);
        let mut violation = (ell[self.i] - best).max(0.0);
        violation = violation.max(query.epsilon - (ell[self.j] - ell[self.i]));
        for &c in pred {
            violation = violation.max(f[c] - f[self.j]);
        }
        for &p in &self.q {
            violation = violation.max(-p);
        }
        Ok(WitnessCheck {
            objective,
            max_violation: violation.max(0.0),
            task_excess: ell[self.j] - best,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationValue {
    pub value: Extended,
    pub method: CalibrationMethod,
    pub certificate: Option<Certificate>,
    /// Set when the predictable set was estimated by sampling.
    pub heuristic: bool,
    pub diagnostic: Option<String>,
}

impl CalibrationValue {
    pub fn new(value: Extended, method: CalibrationMethod) -> Self {
        CalibrationValue {
            value,
            method,
            certificate: None,
            heuristic: false,
            diagnostic: None,
        }
    }

    pub fn finite(value: f64, method: CalibrationMethod) -> Self {
        Self::new(Extended::Finite(value), method)
    }
}

/// The calibration problem `H(epsilon)` for the quadratic surrogate with a
/// given loss and score subspace.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationQuery<'a> {
    pub loss: &'a TaskLoss,
    pub subspace: &'a ScoreSubspace,
    pub epsilon: f64,
}

impl<'a> CalibrationQuery<'a> {
    pub fn new(loss: &'a TaskLoss, subspace: &'a ScoreSubspace, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if loss.k() != subspace.k() {
            return Err(Error::invalid(format!(
                "loss has {} labels, subspace has {} rows",
                loss.k(),
                subspace.k()
            )));
        }
        Ok(CalibrationQuery { loss, subspace, epsilon })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.loss, self.subspace, epsilon)
    }

    pub fn k(&self) -> usize {
        self.loss.k()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_ordering_and_serde() {
        assert_eq!(Extended::Finite(2.0).min(Extended::Infinite), Extended::Finite(2.0));
        assert_eq!(Extended::Infinite.min(Extended::Finite(1.0)), Extended::Finite(1.0));
        assert_eq!(serde_json::to_string(&Extended::Infinite).unwrap(), "\"inf\"");
        let back: Extended = serde_json::from_str("0.25").unwrap();
        assert_eq!(back, Extended::Finite(0.25));
        let inf: Extended = serde_json::from_str("\"inf\"").unwrap();
        assert!(inf.is_infinite());
        assert!(serde_json::from_str::<Extended>("\"nan\"").is_err());
    }
}
