//! Averaged projected SGD on the quadratic surrogate with explicit features,
//! its rate constants, and synthetic well-specified data.

mod constants;
mod model;
mod train;

pub use constants::{compute_constants, iteration_bound, xi, SgdConstants};
pub use model::{make_generator, ConditionalModel, FeatureModel, SyntheticTask};
pub use train::{
    asgd_train, evaluate_risks, optimal_parameters_population, project_frobenius_ball, TrainResult,
};
