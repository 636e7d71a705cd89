use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal directions of a sample covariance (denominator n − 1).
///
/// Rows of `components` are the top-k eigenvectors, ordered by decreasing
/// eigenvalue; each row's largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn fit(xs: &Array2<f64>, k: usize) -> Result<Self> {
        let (n, p) = xs.dim();
        if k == 0 || k > p {
            return Err(Error::Dimension(format!("k = {k} must be in 1..={p}")));
        }
        if n < 2 {
            return Err(Error::Size("PCA needs at least two rows".into()));
        }
        let mean = xs.mean_axis(Axis(0)).expect("n >= 2");
        let centered = xs - &mean;
        let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
        let cov = DMatrix::from_fn(p, p, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });

        let mut components = Vec::with_capacity(k);
        let mut explained_variance = Vec::with_capacity(k);
        for &c in order.iter().take(k) {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            explained_variance.push(eig.eigenvalues[c].max(0.0));
        }
        Ok(PcaModel {
            mean: mean.to_vec(),
            components,
            explained_variance,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    fn component_matrix(&self) -> Array2<f64> {
        let p = self.mean.len();
        Array2::from_shape_fn((self.k(), p), |(i, j)| self.components[i][j])
    }

    /// Centered projection onto the principal directions (n×k).
    pub fn transform(&self, xs: &Array2<f64>) -> Result<Array2<f64>> {
        if xs.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "expected {} columns, got {}",
                self.mean.len(),
                xs.ncols()
            )));
        }
        let mean = Array1::from(self.mean.clone());
        Ok((xs - &mean).dot(&self.component_matrix().t()))
    }

    pub fn inverse_transform(&self, zs: &Array2<f64>) -> Result<Array2<f64>> {
        if zs.ncols() != self.k() {
            return Err(Error::Dimension(format!(
                "expected {} columns, got {}",
                self.k(),
                zs.ncols()
            )));
        }
        let mean = Array1::from(self.mean.clone());
        Ok(zs.dot(&self.component_matrix()) + &mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = crate::rng::seeded(seed);
        Array2::from_shape_fn((n, p), |_| rng.random::<f64>() * 4.0 - 2.0)
    }

    #[test]
    fn rank_one_data_is_captured_by_first_component() {
        let xs = Array2::from_shape_fn((50, 2), |(i, j)| {
            let t = i as f64 * 0.1;
            if j == 0 {
                t
            } else {
                2.0 * t + 1.0
            }
        });
        let m = PcaModel::fit(&xs, 1).unwrap();
        let total: f64 = {
            let full = PcaModel::fit(&xs, 2).unwrap();
            full.explained_variance.iter().sum()
        };
        assert!(m.explained_variance[0] / total >= 0.999);
        assert!(m.components[0].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let xs = random_matrix(100, 4, 3);
        let m = PcaModel::fit(&xs, 4).unwrap();
        let back = m.inverse_transform(&m.transform(&xs).unwrap()).unwrap();
        let err = (&back - &xs).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(err <= 1e-8, "max reconstruction error {err}");
    }

    #[test]
    fn k_larger_than_p_is_rejected() {
        assert!(matches!(
            PcaModel::fit(&random_matrix(10, 2, 1), 3),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zero_variance_directions_get_zero_variance() {
        let mut xs = random_matrix(30, 3, 9);
        xs.column_mut(2).fill(4.0);
        let m = PcaModel::fit(&xs, 3).unwrap();
        assert!(m.explained_variance[2].abs() < 1e-12);
        assert!(m.explained_variance.iter().all(|&v| v >= 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn components_orthonormal_and_sorted(seed in any::<u64>(), n in 5usize..60, p in 1usize..6) {
            let xs = random_matrix(n, p, seed);
            let m = PcaModel::fit(&xs, p).unwrap();
            for i in 0..p {
                for j in 0..p {
                    let dot: f64 = m.components[i].iter().zip(&m.components[j]).map(|(a, b)| a * b).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() <= 1e-8);
                }
            }
            for w in m.explained_variance.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert!(m.explained_variance.iter().all(|&v| v >= 0.0));
        }
    }
}
