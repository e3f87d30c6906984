//! Task losses, conditional distributions and score subspaces.

mod csv_io;
mod dist;
mod subspace;
mod task_loss;

pub use csv_io::{load_loss_csv, read_loss_csv};
pub use dist::{expected_loss_vector, CondDist};
pub use subspace::{
    score_subspace, ScoreSubspace, SubspaceKind, SubspaceMode, DENSE_PROJECTOR_LIMIT,
    MAX_FULL_SUBSPACE, PREDICTABLE_SAMPLES,
};
pub use task_loss::{
    block_zero_one_loss, custom_loss, hamming_loss, mixed_loss, zero_one_loss, BlockStructure,
    LossKind, TaskLoss, MAX_DENSE_HAMMING_BITS, MAX_HAMMING_BITS, MAX_PSEUDOMETRIC_CHECK,
};
