//! JSON parameter files and dataset CSV output.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use regstab_core::sem::SemParams;
use regstab_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// SEM parameters on disk; matrices are lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma_z: Vec<f64>,
    pub sigma_w: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub sigma_y: f64,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(AppError::Config(format!("`{name}` rows must all have {cols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl From<&SemParams> for ParamsFile {
    fn from(p: &SemParams) -> Self {
        Self {
            a: rows_of(&p.a),
            b: rows_of(&p.b),
            beta: p.beta.iter().copied().collect(),
            gamma: p.gamma.iter().copied().collect(),
            sigma_z: p.sigma_z.iter().copied().collect(),
            sigma_w: p.sigma_w.iter().copied().collect(),
            sigma_x: p.sigma_x.iter().copied().collect(),
            sigma_y: p.sigma_y,
        }
    }
}

impl ParamsFile {
    pub fn to_params(&self) -> Result<SemParams> {
        let r = self.sigma_z.len();
        let params = SemParams {
            a: matrix_from_rows("a", &self.a, r)?,
            b: matrix_from_rows("b", &self.b, r)?,
            beta: DVector::from_vec(self.beta.clone()),
            gamma: DVector::from_vec(self.gamma.clone()),
            sigma_z: DVector::from_vec(self.sigma_z.clone()),
            sigma_w: DVector::from_vec(self.sigma_w.clone()),
            sigma_x: DVector::from_vec(self.sigma_x.clone()),
            sigma_y: self.sigma_y,
        };
        params.validate()?;
        Ok(params)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
    serde_json::from_str(&text).map_err(AppError::json(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(AppError::json(path))?;
    std::fs::write(path, text + "\n").map_err(AppError::io(path))
}

pub fn read_params(path: &Path) -> Result<SemParams> {
    read_json::<ParamsFile>(path)?.to_params()
}

/// Writes `y, x..., w...` with a header row.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    header.extend(data.names_x().iter().cloned());
    header.extend(data.names_w().iter().cloned());
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..data.rows() {
        record.clear();
        record.push(data.y()[i].to_string());
        record.extend(data.x().row(i).iter().map(|v| v.to_string()));
        record.extend(data.w().row(i).iter().map(|v| v.to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use regstab_core::sem::{generate_sem_params, PriorKind};

    #[test]
    fn params_round_trip() {
        let p = generate_sem_params(2, 5, 3, 1.0, 2.0, PriorKind::Sphere, 4).unwrap();
        let file = ParamsFile::from(&p);
        let text = serde_json::to_string(&file).unwrap();
        let back: ParamsFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_params().unwrap(), p);
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut file = ParamsFile::from(&generate_sem_params(1, 2, 2, 1.0, 1.0, PriorKind::Sphere, 1).unwrap());
        file.a[1].pop();
        assert!(file.to_params().is_err());
    }
}
