use std::io::Read;
use std::path::Path;

use super::task_loss::{custom_loss, TaskLoss};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Reads a square, header-free numeric grid as a custom loss matrix.
pub fn read_loss_csv<R: Read>(reader: R) -> Result<TaskLoss> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::invalid(format!("row {i}: {e}")))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("cell ({i}, {j}) is not a number: {cell:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let k = rows.len();
    if k == 0 {
        return Err(Error::invalid("loss CSV is empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != k) {
        return Err(Error::invalid(format!(
            "row {i} has {} cells, expected {k} for a square matrix",
            rows[i].len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("cell ({i}, {j}) is not finite")));
        }
    }
    custom_loss(Matrix::from_rows(&rows)?)
}

pub fn load_loss_csv(path: &Path) -> Result<TaskLoss> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
    read_loss_csv(file)
}
