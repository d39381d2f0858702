//! Fisher vectors of a diagonal mixture and the two novelty scores built on
//! them.
//!
//! The Fisher vector stacks, per component `i` and dimension `j`,
//!
//! ```text
//! G_μ = γ_i (x_j - μ_ij) / (σ_ij √ω_i)
//! G_σ = γ_i ((x_j - μ_ij)² / σ_ij² - 1) / √(2 ω_i)
//! ```
//!
//! which is the gradient of `ln p(x)` with respect to means and standard
//! deviations, whitened by the diagonal closed-form approximation of the
//! Fisher information. The weight gradients are not included, so the vector
//! has length `2Nd`: all mean entries first, then all deviation entries,
//! components in model order.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::GaussianMixture;

/// Floor on the per-component distance deviation of an [`MrfReference`].
pub const MRF_STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FisherVector {
    values: Vec<f64>,
    n_components: usize,
    dim: usize,
}

impl FisherVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean_block(&self) -> &[f64] {
        &self.values[..self.n_components * self.dim]
    }

    pub fn variance_block(&self) -> &[f64] {
        &self.values[self.n_components * self.dim..]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &FisherVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Per-entry factors `(F_μ^{-1/2}, F_σ^{-1/2})` mapping the raw score onto
/// the Fisher vector: `σ/√ω` for means and `σ/√(2ω)` for deviations.
fn whitening(gm: &GaussianMixture, i: usize, j: usize) -> (f64, f64) {
    let w = gm.weights()[i];
    let sigma = gm.variances()[[i, j]].sqrt();
    (sigma / w.sqrt(), sigma / (2.0 * w).sqrt())
}

/// Unnormalized Fisher score: `∂ ln p / ∂μ_ij` then `∂ ln p / ∂σ_ij`, in the
/// same layout as [`FisherVector`].
pub fn fisher_score(gm: &GaussianMixture, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
    let gamma = gm.responsibilities(x)?;
    let (n, d) = (gm.n_components(), gm.dim());
    let mut out = vec![0.0; 2 * n * d];
    for i in 0..n {
        for j in 0..d {
            let var = gm.variances()[[i, j]];
            let sigma = var.sqrt();
            let diff = x[j] - gm.means()[[i, j]];
            out[i * d + j] = gamma[i] * diff / var;
            out[n * d + i * d + j] = gamma[i] * (diff * diff / (var * sigma) - 1.0 / sigma);
        }
    }
    Ok(out)
}

pub fn fisher_vector(gm: &GaussianMixture, x: ArrayView1<'_, f64>) -> Result<FisherVector> {
    let gamma = gm.responsibilities(x)?;
    let (n, d) = (gm.n_components(), gm.dim());
    let mut values = vec![0.0; 2 * n * d];
    for i in 0..n {
        let w = gm.weights()[i];
        let mean_scale = gamma[i] / w.sqrt();
        let var_scale = gamma[i] / (2.0 * w).sqrt();
        for j in 0..d {
            let var = gm.variances()[[i, j]];
            let diff = x[j] - gm.means()[[i, j]];
            values[i * d + j] = mean_scale * diff / var.sqrt();
            values[n * d + i * d + j] = var_scale * (diff * diff / var - 1.0);
        }
    }
    Ok(FisherVector {
        values,
        n_components: n,
        dim: d,
    })
}

/// Maps a raw score onto the Fisher vector by the diagonal whitening.
pub fn whiten_score(gm: &GaussianMixture, score: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = (gm.n_components(), gm.dim());
    if score.len() != 2 * n * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * n * d,
            actual: score.len(),
        });
    }
    let mut out = score.to_vec();
    for i in 0..n {
        for j in 0..d {
            let (fm, fs) = whitening(gm, i, j);
            out[i * d + j] *= fm;
            out[n * d + i * d + j] *= fs;
        }
    }
    Ok(out)
}

/// `K(x, y) = ⟨G(x), G(y)⟩`.
pub fn fisher_kernel(
    gm: &GaussianMixture,
    x: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> Result<f64> {
    let gx = fisher_vector(gm, x)?;
    let gy = fisher_vector(gm, y)?;
    Ok(gx.dot(&gy))
}

pub fn fisher_gram(gm: &GaussianMixture, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let vectors = points
        .rows()
        .into_iter()
        .map(|row| fisher_vector(gm, row))
        .collect::<Result<Vec<_>>>()?;
    let n = vectors.len();
    let mut gram = Array2::zeros((n, n));
    for a in 0..n {
        for b in a..n {
            let k = vectors[a].dot(&vectors[b]);
            gram[[a, b]] = k;
            gram[[b, a]] = k;
        }
    }
    Ok(gram)
}

/// Min and max of a raw score over a training window, for min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
}

impl NormStats {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Option<NormStats> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Some(NormStats { min, max })
    }

    /// `clamp((raw - min) / (max - min), 0, 1)`, or 0 when the window has a
    /// single distinct value.
    pub fn scale(&self, raw: f64) -> f64 {
        if self.max <= self.min {
            return 0.0;
        }
        ((raw - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// Raw FVGMM novelty `‖G(x)‖` and its min-max scaled form.
pub fn fvgmm_novelty(
    gm: &GaussianMixture,
    x: ArrayView1<'_, f64>,
    stats: &NormStats,
) -> Result<(f64, f64)> {
    let raw = fisher_vector(gm, x)?.norm();
    Ok((raw, stats.scale(raw)))
}

/// Mixture means plus the mean and standard deviation of each distance
/// `d_i(x) = ‖x - μ_i‖` over a reference window.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfReference {
    pub means: Array2<f64>,
    pub mean_dist: Vec<f64>,
    pub std_dist: Vec<f64>,
}

impl MrfReference {
    pub fn new(means: Array2<f64>, mean_dist: Vec<f64>, std_dist: Vec<f64>) -> Result<Self> {
        let n = means.nrows();
        if mean_dist.len() != n || std_dist.len() != n {
            return Err(Error::Validation("MRF statistics length mismatch".into()));
        }
        let std_dist = std_dist.into_iter().map(|s| s.max(MRF_STD_FLOOR)).collect();
        Ok(MrfReference {
            means,
            mean_dist,
            std_dist,
        })
    }

    /// Empirical distance statistics over `window` (population deviation).
    pub fn estimate(gm: &GaussianMixture, window: ArrayView2<'_, f64>) -> Result<Self> {
        if window.nrows() == 0 {
            return Err(Error::TooFewSamples {
                samples: 0,
                components: gm.n_components(),
            });
        }
        if window.ncols() != gm.dim() {
            return Err(Error::DimensionMismatch {
                expected: gm.dim(),
                actual: window.ncols(),
            });
        }
        let means = gm.means().clone();
        let n = gm.n_components();
        let rows = window.nrows() as f64;
        let dists: Vec<Vec<f64>> = (0..window.nrows())
            .into_par_iter()
            .map(|r| distances(&means, window.row(r)))
            .collect();
        let mut mean_dist = vec![0.0; n];
        for d in &dists {
            for i in 0..n {
                mean_dist[i] += d[i];
            }
        }
        mean_dist.iter_mut().for_each(|m| *m /= rows);
        let mut var = vec![0.0; n];
        for d in &dists {
            for i in 0..n {
                let diff = d[i] - mean_dist[i];
                var[i] += diff * diff;
            }
        }
        let std_dist = var.iter().map(|v| (v / rows).sqrt()).collect();
        MrfReference::new(means, mean_dist, std_dist)
    }

    pub fn n_components(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }
}

fn distances(means: &Array2<f64>, x: ArrayView1<'_, f64>) -> Vec<f64> {
    means
        .rows()
        .into_iter()
        .map(|mu| {
            mu.iter()
                .zip(x.iter())
                .map(|(m, v)| (v - m) * (v - m))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Standardized distance vector `(d_i(x) - E[d_i]) / Std[d_i]` and its
/// score `‖·‖ / √N`.
pub fn fvmrf_novelty(reference: &MrfReference, x: ArrayView1<'_, f64>) -> Result<(Vec<f64>, f64)> {
    if x.len() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            actual: x.len(),
        });
    }
    let d = distances(&reference.means, x);
    let z: Vec<f64> = d
        .iter()
        .zip(&reference.mean_dist)
        .zip(&reference.std_dist)
        .map(|((di, m), s)| (di - m) / s)
        .collect();
    let score = (z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64).sqrt();
    Ok((z, score))
}

/// Everything needed to scale scores against the model's training window.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub fvgmm: NormStats,
    pub fvmrf: NormStats,
    pub aic: NormStats,
    pub mrf: MrfReference,
}

impl Calibration {
    pub fn estimate(gm: &GaussianMixture, window: ArrayView2<'_, f64>) -> Result<Self> {
        let mrf = MrfReference::estimate(gm, window)?;
        let raw: Vec<(f64, f64, f64)> = (0..window.nrows())
            .into_par_iter()
            .map(|r| {
                let x = window.row(r);
                let fv = fisher_vector(gm, x)?.norm();
                let (_, mrf_score) = fvmrf_novelty(&mrf, x)?;
                let aic = gm.aic_per_image(x)?;
                Ok((fv, mrf_score, aic))
            })
            .collect::<Result<_>>()?;
        let stats = |f: fn(&(f64, f64, f64)) -> f64| {
            NormStats::from_values(raw.iter().map(f)).expect("window is nonempty")
        };
        Ok(Calibration {
            fvgmm: stats(|t| t.0),
            fvmrf: stats(|t| t.1),
            aic: stats(|t| t.2),
            mrf,
        })
    }
}
