use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

pub(crate) fn check_matrix(rows: &[Vec<f64>], min_rows: usize, what: &str) -> Result<usize> {
    if rows.len() < min_rows {
        return Err(Error::InsufficientData(format!(
            "{what} needs at least {min_rows} rows, got {}",
            rows.len()
        )));
    }
    let d = rows.first().map(Vec::len).unwrap_or(0);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::Shape(format!("row {i} has {} columns, expected {d}", r.len())));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value in row {i}")));
        }
    }
    Ok(d)
}

/// Fits column means and population standard deviations. Columns whose
/// spread is negligible relative to their magnitude get scale 1.
pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<ScalerModel> {
    let d = check_matrix(rows, 2, "scaler fit")?;
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in rows {
        for k in 0..d {
            let dev = r[k] - mean[k];
            var[k] += dev * dev;
        }
    }
    let scale = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let s = (v / n).sqrt();
            if s <= 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                s
            }
        })
        .collect();
    Ok(ScalerModel { mean, scale })
}

impl ScalerModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, rows: &[Vec<f64>]) -> Result<()> {
        match rows.iter().position(|r| r.len() != self.dim()) {
            Some(i) => Err(Error::Shape(format!(
                "row {i} has {} columns but the scaler was fit on {}",
                rows[i].len(),
                self.dim()
            ))),
            None => Ok(()),
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check(rows)?;
        Ok(rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(x, (m, s))| (x - m) / s)
                    .collect()
            })
            .collect())
    }

    pub fn inverse_transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check(rows)?;
        Ok(rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(z, (m, s))| z * s + m)
                    .collect()
            })
            .collect())
    }
}

pub fn apply_scaler(model: &ScalerModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    model.transform(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_column() {
        let m = fit_scaler(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(m.mean, vec![2.0]);
        assert_eq!(m.scale, vec![1.0]);
        assert_eq!(m.transform(&[vec![1.0], vec![3.0]]).unwrap(), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let rows = vec![vec![0.1, 1.0], vec![0.1, 2.0], vec![0.1, 4.0]];
        let m = fit_scaler(&rows).unwrap();
        assert_eq!(m.scale[0], 1.0);
        for r in m.transform(&rows).unwrap() {
            assert!(r[0].abs() < 1e-15);
        }
    }

    #[test]
    fn fit_needs_two_rows() {
        assert!(matches!(fit_scaler(&[vec![1.0]]), Err(Error::InsufficientData(_))));
    }

    proptest! {
        #[test]
        fn standardizes_fit_data(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..40)) {
            let m = fit_scaler(&rows).unwrap();
            let z = m.transform(&rows).unwrap();
            let n = rows.len() as f64;
            for k in 0..3 {
                let mean: f64 = z.iter().map(|r| r[k]).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                if m.scale[k] != 1.0 || rows.iter().any(|r| (r[k] - rows[0][k]).abs() > 1e-9) {
                    let var: f64 = z.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
                    prop_assert!((var.sqrt() - 1.0).abs() < 1e-6);
                }
            }
            let back = m.inverse_transform(&z).unwrap();
            for (a, b) in rows.iter().flatten().zip(back.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
