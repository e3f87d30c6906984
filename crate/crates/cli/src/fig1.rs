use std::path::Path;

use surrocal::calibration::{exact_calibration, CalibrationQuery};
use surrocal::losses::{hamming_loss, mixed_loss, score_subspace, SubspaceMode, TaskLoss};

use crate::config::Fig1Spec;
use crate::output::{fmt_value, write_atomic};
use crate::CliError;

pub const FIG1_HAMMING_FILE: &str = "fig1a_hamming.csv";
pub const FIG1_MIXED_FILE: &str = "fig1b_mixed.csv";

const HAMMING_HEADER: [&str; 4] = ["epsilon", "tight_exact", "unconstrained_lower", "unconstrained_upper"];
const MIXED_HEADER: [&str; 3] = ["epsilon", "tight_exact", "unconstrained_exact"];

/// Curves of both panels on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Data {
    pub spec: Fig1Spec,
    pub epsilons: Vec<f64>,
    /// Hamming loss with separable scores: `eps^2 / (8T)`.
    pub hamming_tight: Vec<f64>,
    /// Unconstrained sandwich `[eps^2 / (4k), eps^2 / (2k)]`.
    pub hamming_lower: Vec<f64>,
    pub hamming_upper: Vec<f64>,
    pub mixed_tight: Vec<f64>,
    pub mixed_unconstrained: Vec<f64>,
}

fn exact_curve(loss: &TaskLoss, mode: SubspaceMode, grid: &[f64]) -> Result<Vec<f64>, CliError> {
    let s = score_subspace(loss, mode)?;
    grid.iter()
        .map(|&e| Ok(exact_calibration(&CalibrationQuery::new(loss, &s, e)?)?.value.to_f64()))
        .collect()
}

pub fn fig1_data(spec: &Fig1Spec, grid: &[f64]) -> Result<Fig1Data, CliError> {
    let hamming = hamming_loss(spec.hamming_bits, false)?;
    let mixed = mixed_loss(&spec.mixed_sizes, spec.eta)?;
    let k = hamming.k() as f64;
    Ok(Fig1Data {
        spec: spec.clone(),
        epsilons: grid.to_vec(),
        hamming_tight: exact_curve(&hamming, SubspaceMode::Tight, grid)?,
        hamming_lower: grid.iter().map(|e| e * e / (4.0 * k)).collect(),
        hamming_upper: grid.iter().map(|e| e * e / (2.0 * k)).collect(),
        mixed_tight: exact_curve(&mixed, SubspaceMode::Tight, grid)?,
        mixed_unconstrained: exact_curve(&mixed, SubspaceMode::Unconstrained, grid)?,
    })
}

fn to_csv(header: &[&str], columns: &[&[f64]]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::usage(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for row in 0..columns[0].len() {
        w.write_record(columns.iter().map(|c| fmt_value(c[row]))).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::usage(format!("csv: {e}")))
}

pub fn write_fig1(dir: &Path, data: &Fig1Data) -> Result<(), CliError> {
    let a = to_csv(
        &HAMMING_HEADER,
        &[&data.epsilons, &data.hamming_tight, &data.hamming_lower, &data.hamming_upper],
    )?;
    write_atomic(&dir.join(FIG1_HAMMING_FILE), &a)?;
    let b = to_csv(&MIXED_HEADER, &[&data.epsilons, &data.mixed_tight, &data.mixed_unconstrained])?;
    write_atomic(&dir.join(FIG1_MIXED_FILE), &b)
}

fn read_columns(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let found: Vec<String> = r
        .headers()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(CliError::usage(format!("{}: unexpected header {found:?}", path.display())));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        for (c, cell) in rec.iter().enumerate() {
            let v = if cell == "inf" {
                f64::INFINITY
            } else {
                cell.parse().map_err(|_| CliError::usage(format!("{}: bad cell {cell:?}", path.display())))?
            };
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// Parses the two CSV files written by [`write_fig1`].
pub fn read_fig1(dir: &Path, spec: &Fig1Spec) -> Result<Fig1Data, CliError> {
    let mut a = read_columns(&dir.join(FIG1_HAMMING_FILE), &HAMMING_HEADER)?.into_iter();
    let mut b = read_columns(&dir.join(FIG1_MIXED_FILE), &MIXED_HEADER)?.into_iter();
    let epsilons = a.next().unwrap();
    if b.next().unwrap() != epsilons {
        return Err(CliError::usage("figure files use different grids"));
    }
    Ok(Fig1Data {
        spec: spec.clone(),
        epsilons,
        hamming_tight: a.next().unwrap(),
        hamming_lower: a.next().unwrap(),
        hamming_upper: a.next().unwrap(),
        mixed_tight: b.next().unwrap(),
        mixed_unconstrained: b.next().unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The curve relations the figure illustrates.
pub fn check_fig1(data: &Fig1Data) -> Vec<Fig1Check> {
    let level = data.spec.eta / 2.0;
    let rows = || data.epsilons.iter().enumerate();

    let plateau_ok = rows().all(|(i, &e)| {
        let v = data.mixed_tight[i];
        if e <= level + 1e-12 {
            v == 0.0
        } else {
            v > 0.0
        }
    });
    let ordering_ok = rows().all(|(i, _)| {
        data.hamming_lower[i] <= data.hamming_upper[i] && data.hamming_tight[i] >= data.hamming_upper[i]
    });
    let crossover = rows().find(|(i, _)| data.mixed_tight[*i] > data.mixed_unconstrained[*i]).map(|(_, &e)| e);
    let below_first = rows().any(|(i, &e)| e > 0.0 && data.mixed_tight[i] < data.mixed_unconstrained[i]);

    vec![
        Fig1Check {
            name: "mixed tight curve is zero exactly up to eta/2",
            passed: plateau_ok,
            detail: format!("eta/2 = {level}"),
        },
        Fig1Check {
            name: "Hamming tight curve dominates the unconstrained sandwich",
            passed: ordering_ok,
            detail: format!("T = {}", data.spec.hamming_bits),
        },
        Fig1Check {
            name: "mixed tight curve crosses above the unconstrained one",
            passed: below_first && crossover.is_some(),
            detail: match crossover {
                Some(e) => format!("first grid point above: eps = {e}"),
                None => "no crossing on the grid".into(),
            },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_panel_values() {
        let spec = Fig1Spec { hamming_bits: 5, mixed_sizes: vec![4; 4], eta: 0.4 };
        let grid = surrocal::calibration::default_grid();
        let d = fig1_data(&spec, &grid).unwrap();
        let last = grid.len() - 1;
        assert!((d.hamming_tight[last] - 0.025).abs() < 1e-15);
        assert!((d.hamming_upper[last] - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(d.mixed_tight[4], 0.0);
        assert!(check_fig1(&d).iter().all(|c| c.passed));
    }
}
