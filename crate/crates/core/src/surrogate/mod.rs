//! The quadratic surrogate, the `Phi_{a,b}` family and the argmax predictor.

mod ab;
mod quadratic;

pub use ab::{ab_optimal_link, ab_surrogate, AbFamily, AbSurrogateKind, LinkValue};
pub use quadratic::{
    conditional_risks, excess_quadratic_surrogate, excess_task_risk, optimal_parameters,
    quadratic_gradient, quadratic_surrogate, ConditionalRisks,
};

/// Smallest index attaining the maximum score.
pub fn predict(f: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in f.iter().enumerate().skip(1) {
        if v > f[best] {
            best = i;
        }
    }
    best
}
