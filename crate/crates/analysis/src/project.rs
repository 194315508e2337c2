//! Principal-component projection to two dimensions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectError {
    #[error("need at least 3 vectors, got {0}")]
    TooFew(usize),
    #[error("vectors have inconsistent dimensions")]
    Ragged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub coords: Vec<[f64; 2]>,
    /// Unit loading vectors of the two components.
    pub components: [Vec<f64>; 2],
    /// Covariance eigenvalues (n - 1 denominator), descending.
    pub eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
}

impl Projection {
    /// Variance captured by each of the two components.
    pub fn explained(&self) -> [f64; 2] {
        [
            self.eigenvalues.first().copied().unwrap_or(0.0),
            self.eigenvalues.get(1).copied().unwrap_or(0.0),
        ]
    }
}

/// Rank below this fraction of the leading eigenvalue counts as zero.
const RANK_TOL: f64 = 1e-12;

/// Projects onto the top two covariance eigenvectors. Each loading vector is
/// flipped so its largest-magnitude entry is positive. A second component
/// with no variance is reported as zeros.
pub fn project_2d(vectors: &[Vec<f64>]) -> Result<Projection, ProjectError> {
    let n = vectors.len();
    if n < 3 {
        return Err(ProjectError::TooFew(n));
    }
    let dim = vectors[0].len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(ProjectError::Ragged);
    }
    let data = DMatrix::from_fn(n, dim, |i, j| vectors[i][j]);
    let mean: Vec<f64> = (0..dim).map(|j| data.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, dim, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let lead = eigenvalues[0];
    let component = |rank: usize| -> Vec<f64> {
        let Some(&idx) = order.get(rank) else {
            return vec![0.0; dim];
        };
        if eigenvalues[rank] <= RANK_TOL * lead.max(f64::MIN_POSITIVE) {
            return vec![0.0; dim];
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let components = [component(0), component(1)];
    let coords = (0..n)
        .map(|i| {
            let row = centered.row(i);
            let dot = |c: &[f64]| row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&components[0]), dot(&components[1])]
        })
        .collect();
    Ok(Projection {
        coords,
        components,
        eigenvalues,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_in_ten_dimensions_has_flat_second_component() {
        let dir: Vec<f64> = (0..10).map(|j| (j as f64 + 1.0).sqrt()).collect();
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| dir.iter().map(|d| d * (i as f64 - 7.0)).collect())
            .collect();
        let p = project_2d(&pts).unwrap();
        assert!(p.coords.iter().all(|c| c[1].abs() < 1e-9));
        assert!(p.components[1].iter().all(|x| *x == 0.0));
        assert!(p.explained()[0] > 0.0);
    }

    #[test]
    fn sign_convention() {
        let pts = vec![vec![0.0, 0.0], vec![-1.0, -2.0], vec![1.0, 2.1], vec![2.0, 3.9]];
        let p = project_2d(&pts).unwrap();
        for c in &p.components {
            let pivot = c.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(pivot >= 0.0);
        }
    }

    #[test]
    fn too_few() {
        assert_eq!(project_2d(&[vec![1.0], vec![2.0]]), Err(ProjectError::TooFew(2)));
    }
}
