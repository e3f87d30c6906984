use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{svd, Matrix};

/// Largest bit count for which a Hamming loss may be materialized densely.
pub const MAX_DENSE_HAMMING_BITS: u32 = 14;
/// Largest bit count accepted at all (implicit representation).
pub const MAX_HAMMING_BITS: u32 = 26;
/// Largest label count accepted by the O(k^3) pseudometric check.
pub const MAX_PSEUDOMETRIC_CHECK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    ZeroOne,
    BlockZeroOne,
    Hamming,
    Mixed,
    Custom,
}

impl LossKind {
    pub fn is_builtin(self) -> bool {
        self != LossKind::Custom
    }
}

/// Partition of labels `0..k` into contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    sizes: Vec<usize>,
    label_to_block: Vec<usize>,
    block_first_label: Vec<usize>,
}

impl BlockStructure {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::invalid(format!(
                "block loss needs at least 2 blocks, got {}",
                sizes.len()
            )));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("block {pos} has size 0")));
        }
        let mut label_to_block = Vec::with_capacity(sizes.iter().sum());
        let mut block_first_label = Vec::with_capacity(sizes.len());
        for (b, &s) in sizes.iter().enumerate() {
            block_first_label.push(label_to_block.len());
            label_to_block.extend(std::iter::repeat_n(b, s));
        }
        Ok(BlockStructure {
            sizes: sizes.to_vec(),
            label_to_block,
            block_first_label,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_labels(&self) -> usize {
        self.label_to_block.len()
    }

    pub fn block_of(&self, label: usize) -> usize {
        self.label_to_block[label]
    }

    pub fn first_label(&self, block: usize) -> usize {
        self.block_first_label[block]
    }

    pub fn first_labels(&self) -> &[usize] {
        &self.block_first_label
    }

    /// Common block size, if all blocks are equal.
    pub fn equal_size(&self) -> Option<usize> {
        let s = self.sizes[0];
        self.sizes.iter().all(|&x| x == s).then_some(s)
    }

    /// The `k x b` block-indicator matrix `U`.
    pub fn indicator_matrix(&self) -> Matrix {
        Matrix::from_fn(self.num_labels(), self.num_blocks(), |i, v| {
            if self.label_to_block[i] == v {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// A `k x k` task loss `L(predicted, truth)`.
///
/// Hamming losses with many bits are kept implicit: only the bit count is
/// stored and entries are computed from `popcount(i ^ j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLoss {
    kind: LossKind,
    k: usize,
    dense: Option<Matrix>,
    blocks: Option<BlockStructure>,
    bits: Option<u32>,
    eta: Option<f64>,
    l_max: f64,
}

pub fn zero_one_loss(k: usize) -> Result<TaskLoss> {
    if k < 2 {
        return Err(Error::invalid(format!("0-1 loss needs k >= 2, got {k}")));
    }
    Ok(TaskLoss {
        kind: LossKind::ZeroOne,
        k,
        dense: Some(Matrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { 1.0 })),
        blocks: None,
        bits: None,
        eta: None,
        l_max: 1.0,
    })
}

pub fn block_zero_one_loss(sizes: &[usize]) -> Result<(TaskLoss, BlockStructure)> {
    let blocks = BlockStructure::new(sizes)?;
    let k = blocks.num_labels();
    let dense = Matrix::from_fn(k, k, |i, j| {
        if blocks.block_of(i) == blocks.block_of(j) {
            0.0
        } else {
            1.0
        }
    });
    let loss = TaskLoss {
        kind: LossKind::BlockZeroOne,
        k,
        dense: Some(dense),
        blocks: Some(blocks.clone()),
        bits: None,
        eta: None,
        l_max: 1.0,
    };
    Ok((loss, blocks))
}

pub fn hamming_loss(t: u32, materialize: bool) -> Result<TaskLoss> {
    if t == 0 {
        return Err(Error::invalid("Hamming loss needs at least one bit"));
    }
    if t > MAX_HAMMING_BITS {
        return Err(Error::Capacity(format!(
            "Hamming loss with {t} bits exceeds the {MAX_HAMMING_BITS}-bit limit"
        )));
    }
    if materialize && t > MAX_DENSE_HAMMING_BITS {
        return Err(Error::Capacity(format!(
            "dense Hamming loss limited to {MAX_DENSE_HAMMING_BITS} bits, got {t}"
        )));
    }
    let k = 1usize << t;
    let dense = materialize.then(|| Matrix::from_fn(k, k, |i, j| hamming_entry(t, i, j)));
    Ok(TaskLoss {
        kind: LossKind::Hamming,
        k,
        dense,
        blocks: None,
        bits: Some(t),
        eta: None,
        l_max: 1.0,
    })
}

pub fn mixed_loss(sizes: &[usize], eta: f64) -> Result<TaskLoss> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("mixing weight must lie in [0, 1], got {eta}")));
    }
    let blocks = BlockStructure::new(sizes)?;
    let k = blocks.num_labels();
    let dense = Matrix::from_fn(k, k, |i, j| {
        let diff = if i != j { 1.0 } else { 0.0 };
        let cross = if blocks.block_of(i) != blocks.block_of(j) { 1.0 } else { 0.0 };
        eta * diff + (1.0 - eta) * cross
    });
    let l_max = dense.max_abs();
    Ok(TaskLoss {
        kind: LossKind::Mixed,
        k,
        dense: Some(dense),
        blocks: Some(blocks),
        bits: None,
        eta: Some(eta),
        l_max,
    })
}

/// Wraps an arbitrary square, finite, nonnegative loss matrix.
pub fn custom_loss(matrix: Matrix) -> Result<TaskLoss> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::invalid(format!("loss matrix must be square, got {rows}x{cols}")));
    }
    if rows < 2 {
        return Err(Error::invalid("loss matrix needs at least 2 labels"));
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = matrix[(i, j)];
            if !v.is_finite() {
                return Err(Error::invalid(format!("cell ({i}, {j}) is not finite")));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("cell ({i}, {j}) is negative: {v}")));
            }
        }
    }
    let l_max = matrix.max_abs();
    Ok(TaskLoss {
        kind: LossKind::Custom,
        k: rows,
        dense: Some(matrix),
        blocks: None,
        bits: None,
        eta: None,
        l_max,
    })
}

pub(crate) fn hamming_entry(t: u32, i: usize, j: usize) -> f64 {
    (i ^ j).count_ones() as f64 / t as f64
}

impl TaskLoss {
    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dense(&self) -> Option<&Matrix> {
        self.dense.as_ref()
    }

    pub fn blocks(&self) -> Option<&BlockStructure> {
        self.blocks.as_ref()
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    pub fn eta(&self) -> Option<f64> {
        self.eta
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    /// `L(predicted, truth)`.
    pub fn entry(&self, predicted: usize, truth: usize) -> f64 {
        match (&self.dense, self.bits) {
            (Some(d), _) => d[(predicted, truth)],
            (None, Some(t)) => hamming_entry(t, predicted, truth),
            (None, None) => unreachable!("non-Hamming losses are always dense"),
        }
    }

    /// Column `L(:, truth)`.
    pub fn column(&self, truth: usize) -> Vec<f64> {
        (0..self.k).map(|c| self.entry(c, truth)).collect()
    }

    /// Row `L(predicted, :)`.
    pub fn row(&self, predicted: usize) -> Vec<f64> {
        match &self.dense {
            Some(d) => d.row(predicted).to_vec(),
            None => (0..self.k).map(|y| self.entry(predicted, y)).collect(),
        }
    }

    /// Dense matrix, materializing an implicit Hamming loss if it is small enough.
    pub fn to_dense(&self) -> Result<Matrix> {
        match (&self.dense, self.bits) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(t)) => hamming_loss(t, true).map(|l| l.dense.expect("materialized")),
            (None, None) => unreachable!(),
        }
    }

    /// Rank of the loss matrix: closed form for built-in kinds without a
    /// dense matrix, SVD otherwise.
    pub fn rank(&self) -> Result<usize> {
        match &self.dense {
            Some(d) => Ok(svd(d)?.rank()),
            None => Ok(self.bits.map_or(self.k, |t| t as usize + 1)),
        }
    }

    /// `Some(true)` for built-in kinds, all of which are pseudometrics by construction.
    pub fn known_pseudometric(&self) -> Option<bool> {
        self.kind.is_builtin().then_some(true)
    }

    /// Checks the pseudometric axioms on the dense matrix (O(k^3)).
    pub fn is_pseudometric(&self) -> Result<bool> {
        let Some(d) = &self.dense else {
            return Err(Error::Capacity(format!(
                "pseudometric check needs a dense matrix; k = {} is implicit",
                self.k
            )));
        };
        if self.k > MAX_PSEUDOMETRIC_CHECK {
            return Err(Error::Capacity(format!(
                "pseudometric check limited to k <= {MAX_PSEUDOMETRIC_CHECK}, got {}",
                self.k
            )));
        }
        let k = self.k;
        let tol = 1e-12 * self.l_max.max(1.0);
        for i in 0..k {
            if d[(i, i)].abs() > tol {
                return Ok(false);
            }
            for j in 0..k {
                if d[(i, j)] < 0.0 || (d[(i, j)] - d[(j, i)]).abs() > tol {
                    return Ok(false);
                }
            }
        }
        for x in 0..k {
            for y in 0..k {
                let dxy = d[(x, y)];
                for z in 0..k {
                    if d[(x, z)] > dxy + d[(y, z)] + tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_one_small() {
        let l = zero_one_loss(2).unwrap();
        assert_eq!(l.dense().unwrap().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
        assert!(zero_one_loss(1).is_err());
        assert_eq!(zero_one_loss(5).unwrap().rank().unwrap(), 5);
    }

    #[test]
    fn block_entries() {
        let (l, b) = block_zero_one_loss(&[1, 3]).unwrap();
        assert_eq!(l.entry(0, 1), 1.0);
        assert_eq!(l.entry(0, 2), 1.0);
        assert_eq!(l.entry(0, 3), 1.0);
        assert_eq!(l.entry(1, 2), 0.0);
        assert_eq!(b.first_labels(), &[0, 1]);
        assert!(block_zero_one_loss(&[4]).is_err());
        let (l, _) = block_zero_one_loss(&[2, 2]).unwrap();
        assert_eq!(l.rank().unwrap(), 2);
    }

    #[test]
    fn hamming_entries_and_limits() {
        let l = hamming_loss(2, true).unwrap();
        assert_eq!(l.entry(0b00, 0b11), 1.0);
        assert_eq!(l.entry(0b00, 0b01), 0.5);
        let l3 = hamming_loss(3, true).unwrap();
        assert!((0..8).all(|i| l3.entry(i, i) == 0.0));
        assert_eq!(l3.rank().unwrap(), 4);
        assert!(matches!(hamming_loss(15, true), Err(Error::Capacity(_))));
        let implicit = hamming_loss(15, false).unwrap();
        assert!(implicit.dense().is_none());
        assert_eq!(implicit.entry(0, 3), 2.0 / 15.0);
        assert!(matches!(implicit.is_pseudometric(), Err(Error::Capacity(_))));
    }

    #[test]
    fn mixed_boundaries() {
        let (block, _) = block_zero_one_loss(&[2, 2]).unwrap();
        assert_eq!(mixed_loss(&[2, 2], 0.0).unwrap().dense(), block.dense());
        assert_eq!(
            mixed_loss(&[2, 2], 1.0).unwrap().dense(),
            zero_one_loss(4).unwrap().dense()
        );
        let m = mixed_loss(&[2, 2], 0.4).unwrap();
        assert_eq!(m.entry(0, 1), 0.4);
        assert_eq!(m.entry(0, 2), 1.0);
        assert!(mixed_loss(&[2, 2], 1.5).is_err());
    }

    #[test]
    fn pseudometric_checks() {
        assert!(zero_one_loss(4).unwrap().is_pseudometric().unwrap());
        assert!(hamming_loss(3, true).unwrap().is_pseudometric().unwrap());
        let asym = custom_loss(Matrix::from_rows(&[vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap()).unwrap();
        assert!(!asym.is_pseudometric().unwrap());
        // Symmetric but violates the triangle inequality.
        let tri = custom_loss(
            Matrix::from_rows(&[vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert!(!tri.is_pseudometric().unwrap());
    }

    #[test]
    fn custom_rejects_negative_cells() {
        let err = custom_loss(Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap()).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"));
    }
}
