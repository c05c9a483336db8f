use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::scaler::check_matrix;
use crate::error::{Error, Result};

/// Mean-centering followed by projection onto the top-`k` principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Sum of all per-feature variances of the fit data.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn retained_ratio(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(i) = rows.iter().position(|r| r.len() != self.dim()) {
            return Err(Error::Shape(format!(
                "row {i} has {} columns but the PCA model expects {}",
                rows[i].len(),
                self.dim()
            )));
        }
        Ok(rows
            .iter()
            .map(|r| {
                let centered: Vec<f64> = r.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
                self.components
                    .iter()
                    .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect())
    }

    /// Maps projected rows back into the original feature space.
    pub fn inverse_transform(&self, projected: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(i) = projected.iter().position(|r| r.len() != self.k()) {
            return Err(Error::Shape(format!("projected row {i} has {} values, expected {}", projected[i].len(), self.k())));
        }
        Ok(projected
            .iter()
            .map(|z| {
                let mut x = self.mean.clone();
                for (zi, c) in z.iter().zip(&self.components) {
                    for (xj, cj) in x.iter_mut().zip(c) {
                        *xj += zi * cj;
                    }
                }
                x
            })
            .collect())
    }
}

/// Fits a PCA keeping `min(target_dim, k_var, rank)` components, where
/// `k_var` is the smallest count reaching `min_variance` cumulative ratio.
pub fn fit_pca(rows: &[Vec<f64>], target_dim: usize, min_variance: f64) -> Result<PcaModel> {
    let d = check_matrix(rows, 2, "PCA fit")?;
    if target_dim == 0 {
        return Err(Error::Parameter("PCA target dimension must be positive".into()));
    }
    if target_dim > d {
        return Err(Error::Dimension(format!(
            "PCA target dimension {target_dim} exceeds feature count {d}"
        )));
    }
    if !(min_variance > 0.0 && min_variance <= 1.0) {
        return Err(Error::Parameter(format!("min_variance must lie in (0, 1], got {min_variance}")));
    }
    let n = rows.len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    // Eigen-solve the smaller of the covariance (d×d) and Gram (n×n) matrices.
    let (eigvals, vectors): (Vec<f64>, Vec<Vec<f64>>) = if d <= n {
        let cov = (centered.transpose() * &centered) / denom;
        let eig = SymmetricEigen::new(cov);
        let vecs = (0..d).map(|i| eig.eigenvectors.column(i).iter().cloned().collect()).collect();
        (eig.eigenvalues.iter().cloned().collect(), vecs)
    } else {
        let gram = (&centered * centered.transpose()) / denom;
        let eig = SymmetricEigen::new(gram);
        let mut vals = Vec::with_capacity(n);
        let mut vecs = Vec::with_capacity(n);
        for i in 0..n {
            let u = eig.eigenvectors.column(i);
            let v = centered.transpose() * u;
            let vn = v.norm();
            vals.push(eig.eigenvalues[i]);
            vecs.push(if vn > 0.0 { v.iter().map(|x| x / vn).collect() } else { vec![0.0; d] });
        }
        (vals, vecs)
    };

    let mut order: Vec<usize> = (0..eigvals.len()).collect();
    order.sort_by(|&a, &b| eigvals[b].total_cmp(&eigvals[a]));
    let eigvals: Vec<f64> = order.iter().map(|&i| eigvals[i].max(0.0)).collect();
    let mut vectors: Vec<Vec<f64>> = order.into_iter().map(|i| vectors[i].clone()).collect();

    let total_variance: f64 = (0..d)
        .map(|j| centered.column(j).iter().map(|x| x * x).sum::<f64>() / denom)
        .sum();
    if total_variance <= 0.0 {
        return Err(Error::InsufficientData("PCA fit data has zero variance".into()));
    }

    let top = eigvals[0];
    let rank_tol = top * 1e-10 * n.max(d) as f64;
    let rank = eigvals.iter().filter(|&&v| v > rank_tol).count().max(1);
    let ratios: Vec<f64> = eigvals.iter().map(|v| v / total_variance).collect();
    let mut cumulative = 0.0;
    let mut k_var = ratios.len();
    for (i, r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= min_variance - 1e-12 {
            k_var = i + 1;
            break;
        }
    }
    let k = target_dim.min(k_var).min(rank);

    vectors.truncate(k);
    for v in &mut vectors {
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best });
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }

    Ok(PcaModel {
        mean,
        components: vectors,
        explained_variance: eigvals[..k].to_vec(),
        explained_variance_ratio: ratios[..k].to_vec(),
        total_variance,
    })
}

pub fn apply_pca(model: &PcaModel, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    model.transform(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_line() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64 - 4.5;
                vec![1.0 + 2.0 * t, -1.0 + t, 0.5 * t]
            })
            .collect();
        let m = fit_pca(&rows, 2, 0.99).unwrap();
        assert_eq!(m.k(), 1);
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn target_larger_than_features_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![0.0, 0.5]];
        assert!(matches!(fit_pca(&rows, 3, 0.99), Err(Error::Dimension(_))));
    }

    #[test]
    fn wide_data_uses_gram_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = fit_pca(&rows, 30, 1.0).unwrap();
        // Row rank of 12 centered points is at most 11.
        assert_eq!(m.k(), 11);
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-6);
            }
        }
        let back = m.inverse_transform(&m.transform(&rows).unwrap()).unwrap();
        for (a, b) in rows.iter().flatten().zip(back.iter().flatten()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn visual_width_reduced_to_at_most_512() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..2304).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = fit_pca(&rows, 512, 0.99).unwrap();
        let out = m.transform(&rows).unwrap();
        assert!(out[0].len() <= 512);
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let t: f64 = rng.gen_range(-1.0..1.0);
                vec![-3.0 * t + 0.01 * rng.gen_range(-1.0..1.0), t, 0.2 * rng.gen_range(-1.0..1.0)]
            })
            .collect();
        let m = fit_pca(&rows, 3, 1.0).unwrap();
        for c in &m.components {
            let max = c.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(max > 0.0);
        }
    }
}
