use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{ScoreSubspace, TaskLoss};

use super::bounds::{lower_bound, upper_bound};
use super::envelope::convex_envelope;
use super::exact::exact_calibration;
use super::numeric::{numeric_calibration_with, NumericOptions};
use super::sampled::sampled_upper_bound;
use super::value::{CalibrationMethod, CalibrationQuery, Extended};

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepCell {
    NotApplicable,
    Value(Extended),
    Failed(String),
}

impl SweepCell {
    pub fn value(&self) -> Option<Extended> {
        match self {
            SweepCell::Value(v) => Some(*v),
            _ => None,
        }
    }

    /// CSV text: empty when not applicable, `inf`, or `error`.
    pub fn csv_text(&self) -> String {
        match self {
            SweepCell::NotApplicable => String::new(),
            SweepCell::Value(v) => v.to_string(),
            SweepCell::Failed(_) => "error".into(),
        }
    }

    fn from_result(r: Result<Extended>) -> Self {
        match r {
            Ok(v) => SweepCell::Value(v),
            Err(Error::Unsupported(_) | Error::Hypothesis(_)) => SweepCell::NotApplicable,
            Err(e) => SweepCell::Failed(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub exact: SweepCell,
    pub numeric: SweepCell,
    pub lower_tight: SweepCell,
    pub lower_crude: SweepCell,
    pub upper: SweepCell,
    pub sampled: SweepCell,
    pub envelope: SweepCell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledOptions {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMethods {
    pub exact: bool,
    pub numeric: bool,
    /// Lower and upper bounds.
    pub bounds: bool,
    pub sampled: Option<SampledOptions>,
}

impl Default for SweepMethods {
    fn default() -> Self {
        SweepMethods {
            exact: true,
            numeric: true,
            bounds: true,
            sampled: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub rows: Vec<SweepRow>,
    /// Method whose values the envelope column is built from.
    pub envelope_source: Option<CalibrationMethod>,
}

impl CalibrationCurve {
    pub fn epsilons(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.epsilon).collect()
    }

    pub fn column(&self, pick: impl Fn(&SweepRow) -> &SweepCell) -> Vec<SweepCell> {
        self.rows.iter().map(|r| pick(r).clone()).collect()
    }
}

/// `n + 1` evenly spaced points from `start` to `stop`, rounded to 12 decimals.
pub fn epsilon_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::invalid(format!("bad grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// 21 points from 0 to 1 in steps of 0.05.
pub fn default_grid() -> Vec<f64> {
    epsilon_grid(0.0, 1.0, 0.05).expect("static grid is valid")
}

/// Evaluates the requested methods at every grid point (in parallel) and the
/// convex envelope of the exact values, or the numeric ones when exact values
/// are not available.
pub fn sweep(
    loss: &TaskLoss,
    subspace: &ScoreSubspace,
    grid: &[f64],
    methods: &SweepMethods,
    numeric: &NumericOptions,
) -> Result<CalibrationCurve> {
    if let Some(e) = grid.iter().find(|e| !(e.is_finite() && **e >= 0.0 && **e <= loss.l_max())) {
        return Err(Error::invalid(format!("grid point {e} outside [0, {}]", loss.l_max())));
    }
    if loss.k() != subspace.k() {
        return Err(Error::invalid("loss and subspace sizes differ"));
    }
    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&eps| {
            let query = CalibrationQuery { loss, subspace, epsilon: eps };
            let na = || SweepCell::NotApplicable;
            let exact = if methods.exact {
                SweepCell::from_result(exact_calibration(&query).map(|v| v.value))
            } else {
                na()
            };
            let numeric = if methods.numeric {
                SweepCell::from_result(numeric_calibration_with(&query, numeric).map(|v| v.value))
            } else {
                na()
            };
            let (lower_tight, lower_crude, upper) = if methods.bounds {
                let lower = lower_bound(&query);
                (
                    SweepCell::from_result(lower.as_ref().map(|b| Extended::Finite(b.tight)).map_err(Clone::clone)),
                    SweepCell::from_result(lower.map(|b| Extended::Finite(b.crude))),
                    SweepCell::from_result(upper_bound(&query).map(|v| v.value)),
                )
            } else {
                (na(), na(), na())
            };
            let sampled = match methods.sampled {
                Some(o) => SweepCell::from_result(sampled_upper_bound(&query, o.samples, o.seed).map(|v| v.value)),
                None => na(),
            };
            SweepRow {
                epsilon: eps,
                exact,
                numeric,
                lower_tight,
                lower_crude,
                upper,
                sampled,
                envelope: na(),
            }
        })
        .collect();

    let all_values = |pick: fn(&SweepRow) -> &SweepCell| -> Option<Vec<Extended>> {
        rows.iter().map(|r| pick(r).value()).collect()
    };
    let source = if rows.is_empty() {
        None
    } else if let Some(v) = all_values(|r| &r.exact) {
        Some((CalibrationMethod::Exact, v))
    } else {
        all_values(|r| &r.numeric).map(|v| (CalibrationMethod::Numeric, v))
    };
    let envelope_source = source.as_ref().map(|s| s.0);
    if let Some((_, values)) = source {
        let env = convex_envelope(grid, &values);
        for (row, e) in rows.iter_mut().zip(env) {
            row.envelope = SweepCell::Value(e);
        }
    }
    Ok(CalibrationCurve { rows, envelope_source })
}

pub const CSV_COLUMNS: [&str; 7] = ["epsilon", "exact", "numeric", "lower_tight", "lower_crude", "upper", "envelope"];

/// Writes the sweep table; a trailing `sampled` column is added when any
/// sampled value is present.
pub fn write_curve_csv<W: Write>(curve: &CalibrationCurve, out: W) -> Result<()> {
    let with_sampled = curve.rows.iter().any(|r| r.sampled != SweepCell::NotApplicable);
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    if with_sampled {
        header.push("sampled");
    }
    w.write_record(&header).map_err(io)?;
    for r in &curve.rows {
        let mut record = vec![
            r.epsilon.to_string(),
            r.exact.csv_text(),
            r.numeric.csv_text(),
            r.lower_tight.csv_text(),
            r.lower_crude.csv_text(),
            r.upper.csv_text(),
            r.envelope.csv_text(),
        ];
        if with_sampled {
            record.push(r.sampled.csv_text());
        }
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv write failed: {e}")))?;
    Ok(())
}
