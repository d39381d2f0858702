//! Principal components and small symmetric eigenproblems.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dimensions above this use randomized subspace iteration instead of a
/// dense eigendecomposition of the covariance matrix.
const DENSE_EIGEN_MAX_DIM: usize = 256;
const SUBSPACE_OVERSAMPLE: usize = 10;
const SUBSPACE_ITERS: usize = 8;

/// A fitted linear projection onto the leading principal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// One principal direction per row, unit norm, ordered by variance.
    pub components: Array2<f64>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl Pca {
    /// Fits `k` components to the rows of `data`. Each component is signed so
    /// that its largest-magnitude loading is positive.
    pub fn fit(data: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<Pca> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(Error::TooFewSamples {
                samples: n,
                components: k,
            });
        }
        if k == 0 || k > d {
            return Err(Error::Config(format!(
                "cannot extract {k} components from {d} dimensions"
            )));
        }
        let mean = data.mean_axis(Axis(0)).expect("n >= 2");
        let centered = &data - &mean;
        let total_variance =
            centered.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);

        let (mut components, explained_variance) = if d <= DENSE_EIGEN_MAX_DIM {
            dense_components(&centered, k)
        } else {
            subspace_components(&centered, k, seed)
        };
        for mut row in components.rows_mut() {
            fix_sign(row.view_mut());
        }
        Ok(Pca {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    /// Number of components carrying non-negligible variance.
    pub fn rank(&self) -> usize {
        let top = self.explained_variance.first().copied().unwrap_or(0.0);
        let tol = 1e-12 * top.max(self.total_variance).max(f64::MIN_POSITIVE);
        self.explained_variance.iter().filter(|&&v| v > tol).count()
    }

    pub fn project(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let centered = &x - &self.mean;
        Ok(self.components.dot(&centered))
    }

    pub fn project_rows(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if data.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: data.ncols(),
            });
        }
        let centered = &data - &self.mean;
        Ok(centered.dot(&self.components.t()))
    }
}

fn fix_sign(mut v: ndarray::ArrayViewMut1<'_, f64>) {
    let mut best = 0usize;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
pub fn symmetric_eigen(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(to_nalgebra(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    // column j of the result is the j-th eigenvector
    let vectors = Array2::from_shape_fn((n, n), |(r, j)| eig.eigenvectors[(r, order[j])]);
    (values, vectors)
}

pub fn min_symmetric_eigenvalue(m: &Array2<f64>) -> f64 {
    let (values, _) = symmetric_eigen(m);
    values.last().copied().unwrap_or(0.0)
}

fn dense_components(centered: &Array2<f64>, k: usize) -> (Array2<f64>, Vec<f64>) {
    let n = centered.nrows() as f64;
    let cov = centered.t().dot(centered) / (n - 1.0);
    let (values, vectors) = symmetric_eigen(&cov);
    let d = cov.nrows();
    let comps = Array2::from_shape_fn((k, d), |(i, j)| vectors[[j, i]]);
    let vars = values[..k].iter().map(|v| v.max(0.0)).collect();
    (comps, vars)
}

/// Randomized range finder followed by Rayleigh-Ritz on the captured subspace.
fn subspace_components(centered: &Array2<f64>, k: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let (n, d) = centered.dim();
    let width = (k + SUBSPACE_OVERSAMPLE).min(d).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Array2::from_shape_fn((d, width), |_| StandardNormal.sample(&mut rng));

    let mut basis = centered.t().dot(&centered.dot(&omega));
    orthonormalize_columns(&mut basis);
    for _ in 0..SUBSPACE_ITERS {
        basis = centered.t().dot(&centered.dot(&basis));
        orthonormalize_columns(&mut basis);
    }

    let projected = centered.dot(&basis);
    let small = projected.t().dot(&projected) / (n as f64 - 1.0);
    let (values, vectors) = symmetric_eigen(&small);
    let rotated = basis.dot(&vectors);
    let keep = k.min(width);
    let mut comps = Array2::<f64>::zeros((k, d));
    for i in 0..keep {
        comps.row_mut(i).assign(&rotated.column(i));
    }
    let mut vars: Vec<f64> = values[..keep].iter().map(|v| v.max(0.0)).collect();
    vars.resize(k, 0.0);
    (comps, vars)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that
/// collapse numerically are zeroed.
fn orthonormalize_columns(m: &mut Array2<f64>) {
    let cols = m.ncols();
    for j in 0..cols {
        let scale = m.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        for _ in 0..2 {
            for i in 0..j {
                let dot = m.column(i).dot(&m.column(j));
                let qi = m.column(i).to_owned();
                m.column_mut(j).scaled_add(-dot, &qi);
            }
        }
        let norm = m.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale.max(f64::MIN_POSITIVE) || norm == 0.0 {
            m.column_mut(j).fill(0.0);
        } else {
            m.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
}
