//! Small dense linear algebra and a convex QP solver.

mod linalg;
mod matrix;
mod qp;
mod simplex;
mod svd;

pub use linalg::{
    cholesky, cholesky_solve, null_space_basis, orthogonal_projector, projector_from_basis,
    pseudo_inverse, pseudo_inverse_from, solve_spd,
};
pub use matrix::{dot, norm2, Matrix};
pub use qp::{solve_qp, solve_qp_with, LinearConstraint, QpOutcome, QpProblem, QpSettings, QpSolution};
pub use simplex::{project_simplex, simplex_violation};
pub use svd::{svd, SvdFactors, RANK_TOLERANCE};
