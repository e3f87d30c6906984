use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::task_loss::{BlockStructure, LossKind, TaskLoss, MAX_DENSE_HAMMING_BITS};
use crate::error::{Error, Result};
use crate::numerics::{dot, projector_from_basis, svd, Matrix, SvdFactors};

/// Largest `k` for which the `k x k` projector is materialized.
pub const DENSE_PROJECTOR_LIMIT: usize = 1024;
/// Largest `k` for which an identity score matrix is built.
pub const MAX_FULL_SUBSPACE: usize = 4096;
/// Parameter draws used to estimate the predictable set of a custom subspace.
pub const PREDICTABLE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubspaceKind {
    Full,
    BlockIndicator,
    HammingBasis,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubspaceMode {
    Unconstrained,
    Tight,
}

/// The set of allowed score vectors `S = span(F)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSubspace {
    kind: SubspaceKind,
    f: Matrix,
    svd: SvdFactors,
    basis: Matrix,
    projector: Option<Matrix>,
    predictable: Vec<usize>,
    predictable_exact: bool,
    blocks: Option<BlockStructure>,
    bits: Option<u32>,
}

impl ScoreSubspace {
    fn build(
        kind: SubspaceKind,
        f: Matrix,
        predictable: Vec<usize>,
        predictable_exact: bool,
        blocks: Option<BlockStructure>,
        bits: Option<u32>,
    ) -> Result<Self> {
        let factors = if kind == SubspaceKind::Full {
            let k = f.rows();
            SvdFactors {
                left_vectors: Matrix::identity(k),
                singular_values: vec![1.0; k],
                right_vectors: Matrix::identity(k),
            }
        } else {
            svd(&f)?
        };
        let basis = factors.range_basis();
        let projector = (f.rows() <= DENSE_PROJECTOR_LIMIT).then(|| projector_from_basis(&basis));
        Ok(ScoreSubspace {
            kind,
            f,
            svd: factors,
            basis,
            projector,
            predictable,
            predictable_exact,
            blocks,
            bits,
        })
    }

    /// `F = I_k`: no constraint on the scores.
    pub fn full(k: usize) -> Result<Self> {
        if k > MAX_FULL_SUBSPACE {
            return Err(Error::Capacity(format!(
                "unconstrained subspace limited to k <= {MAX_FULL_SUBSPACE}, got {k}"
            )));
        }
        Self::build(SubspaceKind::Full, Matrix::identity(k), (0..k).collect(), true, None, None)
    }

    /// Scores constant within blocks, `F = U`.
    pub fn block_indicator(blocks: &BlockStructure) -> Result<Self> {
        Self::build(
            SubspaceKind::BlockIndicator,
            blocks.indicator_matrix(),
            blocks.first_labels().to_vec(),
            true,
            Some(blocks.clone()),
            None,
        )
    }

    /// Separable Hamming scores `F = [1/2 * 1, h^(1), ..., h^(T)]`.
    pub fn hamming_basis(t: u32) -> Result<Self> {
        if t == 0 || t > MAX_DENSE_HAMMING_BITS {
            return Err(Error::Capacity(format!(
                "separable Hamming scores are materialized for 1 <= T <= {MAX_DENSE_HAMMING_BITS}, got {t}"
            )));
        }
        let k = 1usize << t;
        let f = Matrix::from_fn(k, t as usize + 1, |y, col| match col {
            0 => 0.5,
            c => ((y >> (c - 1)) & 1) as f64,
        });
        Self::build(SubspaceKind::HammingBasis, f, (0..k).collect(), true, None, Some(t))
    }

    /// Arbitrary `F`; the predictable set is estimated by sampling parameters
    /// and is flagged approximate.
    pub fn custom(f: Matrix, seed: u64) -> Result<Self> {
        if !f.is_finite() || f.rows() < 2 || f.cols() == 0 {
            return Err(Error::invalid("custom score matrix must be finite with k >= 2 rows"));
        }
        let predictable = sample_predictable(&f, PREDICTABLE_SAMPLES, seed);
        Self::build(SubspaceKind::Custom, f, predictable, false, None, None)
    }

    pub fn kind(&self) -> SubspaceKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.f.rows()
    }

    /// Number of columns of `F`.
    pub fn r(&self) -> usize {
        self.f.cols()
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn svd(&self) -> &SvdFactors {
        &self.svd
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    /// Orthonormal basis of `span(F)` (`k x rank`).
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn projector(&self) -> Option<&Matrix> {
        self.projector.as_ref()
    }

    pub fn predictable(&self) -> &[usize] {
        &self.predictable
    }

    /// Whether the predictable set is exact (false for sampled custom subspaces).
    pub fn predictable_exact(&self) -> bool {
        self.predictable_exact
    }

    pub fn blocks(&self) -> Option<&BlockStructure> {
        self.blocks.as_ref()
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    /// `P_F v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        if let Some(p) = &self.projector {
            return p.matvec(v);
        }
        let coeffs = self.basis.tr_matvec(v);
        self.basis.matvec(&coeffs)
    }

    /// `F theta`.
    pub fn scores(&self, theta: &[f64]) -> Vec<f64> {
        self.f.matvec(theta)
    }

    /// `|| v - P_F v ||_2`.
    pub fn residual_norm(&self, v: &[f64]) -> f64 {
        let p = self.project(v);
        v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Whether `colspace(L)` is contained in the subspace, i.e. `P_F L = L`
    /// within `1e-8 * max(1, ||L||_F)`.
    pub fn contains_loss_columns(&self, loss: &TaskLoss) -> Result<bool> {
        if loss.k() != self.k() {
            return Err(Error::invalid("loss and subspace sizes differ"));
        }
        if loss.dense().is_none() {
            // Implicit Hamming: columns lie in span of the Hamming basis.
            return Ok(matches!(self.kind, SubspaceKind::Full | SubspaceKind::HammingBasis));
        }
        let mut resid2 = 0.0;
        let mut norm2 = 0.0;
        for y in 0..loss.k() {
            let col = loss.column(y);
            resid2 += self.residual_norm(&col).powi(2);
            norm2 += dot(&col, &col);
        }
        Ok(resid2.sqrt() <= 1e-8 * norm2.sqrt().max(1.0))
    }
}

/// Builds the score subspace for a loss.
///
/// `Tight` returns the column span of the loss for built-in kinds; for the
/// mixed loss it returns the block-indicator subspace, which does not
/// contain the loss columns.
pub fn score_subspace(loss: &TaskLoss, mode: SubspaceMode) -> Result<ScoreSubspace> {
    match mode {
        SubspaceMode::Unconstrained => ScoreSubspace::full(loss.k()),
        SubspaceMode::Tight => match loss.kind() {
            LossKind::ZeroOne => ScoreSubspace::full(loss.k()),
            LossKind::BlockZeroOne | LossKind::Mixed => {
                ScoreSubspace::block_indicator(loss.blocks().expect("block losses keep their blocks"))
            }
            LossKind::Hamming => ScoreSubspace::hamming_basis(loss.bits().expect("Hamming bits")),
            LossKind::Custom => Err(Error::Unsupported(
                "tight subspace is only defined for built-in losses".into(),
            )),
        },
    }
}

fn sample_predictable(f: &Matrix, samples: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut winners = BTreeSet::new();
    let mut theta = vec![0.0; f.cols()];
    for _ in 0..samples {
        for t in theta.iter_mut() {
            *t = StandardNormal.sample(&mut rng);
        }
        winners.insert(crate::surrogate::predict(&f.matvec(&theta)));
    }
    winners.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{block_zero_one_loss, custom_loss, hamming_loss, mixed_loss, zero_one_loss};

    #[test]
    fn tight_subspaces_per_kind() {
        let l = zero_one_loss(4).unwrap();
        let s = score_subspace(&l, SubspaceMode::Tight).unwrap();
        assert_eq!(s.kind(), SubspaceKind::Full);
        assert_eq!(s.f(), &Matrix::identity(4));

        let (b, _) = block_zero_one_loss(&[2, 2]).unwrap();
        let s = score_subspace(&b, SubspaceMode::Tight).unwrap();
        let u = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(s.f(), &u);
        assert_eq!(s.predictable(), &[0, 2]);
        assert_eq!(s.rank(), 2);

        let h = hamming_loss(2, true).unwrap();
        let s = score_subspace(&h, SubspaceMode::Tight).unwrap();
        assert_eq!(s.f().column(0), vec![0.5; 4]);
        assert_eq!(s.f().column(1), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(s.f().column(2), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(s.rank(), 3);
    }

    #[test]
    fn mixed_tight_is_block_indicator_without_containment() {
        let m = mixed_loss(&[2, 2], 0.4).unwrap();
        let s = score_subspace(&m, SubspaceMode::Tight).unwrap();
        assert_eq!(s.kind(), SubspaceKind::BlockIndicator);
        assert!(!s.contains_loss_columns(&m).unwrap());
        let m0 = mixed_loss(&[2, 2], 0.0).unwrap();
        assert!(s.contains_loss_columns(&m0).unwrap());
    }

    #[test]
    fn custom_tight_unsupported() {
        let c = custom_loss(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        assert!(matches!(score_subspace(&c, SubspaceMode::Tight), Err(Error::Unsupported(_))));
    }

    #[test]
    fn custom_predictable_by_sampling() {
        // Scores (t, t, -t): label 1 never wins because label 0 ties it first.
        let f = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![-1.0]]).unwrap();
        let s = ScoreSubspace::custom(f, 7).unwrap();
        assert_eq!(s.predictable(), &[0, 2]);
        assert!(!s.predictable_exact());
    }
}
