use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ScoreSubspace, TaskLoss};
use crate::numerics::{norm2, project_simplex, pseudo_inverse, simplex_violation, Matrix};

/// Simplex violation of `V psi(x)` below which the linear model is called exact.
pub const EXACT_FIT_TOLERANCE: f64 = 1e-9;

/// A finite input pool: feature vectors `psi(x)` with sampling weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub feature_dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `R >= max ||psi(x)||`.
    pub r_bound: f64,
}

/// Linear conditionals `q(x) = V psi(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalModel {
    /// `k x d`.
    pub v: Matrix,
    /// `Q = sum_c ||v_c||`.
    pub q_bound: f64,
    /// Conditional at each pool point; `V psi(x)` projected onto the simplex.
    pub conditionals: Vec<Vec<f64>>,
    /// Largest simplex violation of `V psi(x)` over the pool, before projection.
    pub max_simplex_violation: f64,
    /// Whether `V psi(x)` is itself a distribution at every pool point, i.e.
    /// the model is well specified.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub features: FeatureModel,
    pub conditionals: ConditionalModel,
}

impl SyntheticTask {
    pub fn pool_size(&self) -> usize {
        self.features.points.len()
    }

    /// Samplers for the input index and, per input, the label.
    pub fn samplers(&self) -> Result<(WeightedIndex<f64>, Vec<WeightedIndex<f64>>)> {
        let bad = |e| Error::invalid(format!("invalid sampling weights: {e}"));
        let inputs = WeightedIndex::new(&self.features.weights).map_err(bad)?;
        let labels = self
            .conditionals
            .conditionals
            .iter()
            .map(|q| WeightedIndex::new(q).map_err(bad))
            .collect::<Result<_>>()?;
        Ok((inputs, labels))
    }

    /// Draws `(input index, label)`.
    pub fn sample<R: Rng>(
        &self,
        rng: &mut R,
        samplers: &(WeightedIndex<f64>, Vec<WeightedIndex<f64>>),
    ) -> (usize, usize) {
        let x = samplers.0.sample(rng);
        (x, samplers.1[x].sample(rng))
    }
}

/// Random pool of `pool_size` features with norms in `[0.5, 1]`, uniform
/// weights, and a linear conditional model fit by least squares to random
/// simplex targets. The fit interpolates (and the model is exact) when
/// `pool_size <= feature_dim`; otherwise the projected outputs are used and
/// `exact` is false.
pub fn make_generator(
    s: &ScoreSubspace,
    loss: &TaskLoss,
    feature_dim: usize,
    pool_size: usize,
    seed: u64,
) -> Result<SyntheticTask> {
    if feature_dim == 0 || pool_size == 0 {
        return Err(Error::invalid("feature_dim and pool_size must be positive"));
    }
    if s.k() != loss.k() {
        return Err(Error::invalid("loss and subspace sizes differ"));
    }
    let k = loss.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points = Vec::with_capacity(pool_size);
    for _ in 0..pool_size {
        let mut p: Vec<f64> = (0..feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = norm2(&p).max(1e-12);
        let target = rng.random_range(0.5..=1.0);
        p.iter_mut().for_each(|v| *v *= target / norm);
        points.push(p);
    }
    let r_bound = points.iter().map(|p| norm2(p)).fold(0.0, f64::max);

    // targets: k x pool, psi: d x pool
    let mut targets = Matrix::zeros(k, pool_size);
    for x in 0..pool_size {
        let mut col: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = col.iter().sum();
        col.iter_mut().for_each(|v| *v /= total);
        targets.set_column(x, &col);
    }
    let psi = Matrix::from_fn(feature_dim, pool_size, |i, x| points[x][i]);
    let v = targets.matmul(&pseudo_inverse(&psi)?);

    let mut conditionals = Vec::with_capacity(pool_size);
    let mut max_violation: f64 = 0.0;
    for p in &points {
        let raw = v.matvec(p);
        max_violation = max_violation.max(simplex_violation(&raw));
        conditionals.push(project_simplex(&raw));
    }
    let q_bound = (0..k).map(|c| norm2(v.row(c))).sum();

    Ok(SyntheticTask {
        features: FeatureModel {
            feature_dim,
            points,
            weights: vec![1.0 / pool_size as f64; pool_size],
            r_bound,
        },
        conditionals: ConditionalModel {
            v,
            q_bound,
            conditionals,
            max_simplex_violation: max_violation,
            exact: max_violation <= EXACT_FIT_TOLERANCE,
        },
    })
}
