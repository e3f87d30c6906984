//! Calibration functions of the quadratic surrogate: closed forms, bounds,
//! numeric values through pairwise convex programs, and convex envelopes.

mod bounds;
mod envelope;
mod exact;
mod numeric;
mod sampled;
mod sweep;
mod value;

pub use bounds::{lower_bound, max_projected_pair_norm, max_projected_pair_norm_dense, upper_bound, LowerBounds};
pub use envelope::convex_envelope;
pub use exact::{exact_calibration, exact_formula, mixed_branch_gap, ExactFormula};
pub use numeric::{
    candidate_pairs, numeric_calibration, numeric_calibration_with, pair_calibration, pair_calibration_with,
    NumericOptions, MAX_NUMERIC_LABELS,
};
pub use sampled::{sampled_upper_bound, MAX_SAMPLED_LABELS};
pub use sweep::{
    default_grid, epsilon_grid, sweep, write_curve_csv, CalibrationCurve, SampledOptions, SweepCell, SweepMethods,
    SweepRow, CSV_COLUMNS,
};
pub use value::{CalibrationMethod, CalibrationQuery, CalibrationValue, Certificate, Extended, WitnessCheck};
