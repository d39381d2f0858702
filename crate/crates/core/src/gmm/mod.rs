//! Diagonal-covariance Gaussian mixtures and their EM fit.

mod kmeans;
mod model;

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kmeans::{nearest_center, plus_plus};
pub use model::{fit_model, read_model, write_model, NoveltyModel, ScoreMethod};

/// Components whose weight drops below this are re-seeded.
pub const RESCUE_WEIGHT: f64 = 1e-8;

/// `p(x) = Σ_i ω_i N(x; μ_i, diag(σ_i²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
    /// `ln ω_i - ½ Σ_j ln(2π σ_ij²)`, cached per component.
    log_norm: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Array2<f64>, variances: Array2<f64>) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::Validation("mixture needs at least one component".into()));
        }
        if means.dim() != variances.dim() || means.nrows() != n || means.ncols() == 0 {
            return Err(Error::Validation(format!(
                "inconsistent shapes: {} weights, means {:?}, variances {:?}",
                n,
                means.dim(),
                variances.dim()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("weights sum to {total}, not 1")));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("variances must be finite and positive".into()));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("means must be finite".into()));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_norm = compute_log_norm(&weights, &variances);
        Ok(GaussianMixture {
            weights,
            means,
            variances,
            log_norm,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn variances(&self) -> &Array2<f64> {
        &self.variances
    }

    /// Free parameters of a diagonal mixture: `N(2d + 1) - 1`.
    pub fn n_free_parameters(&self) -> usize {
        self.n_components() * (2 * self.dim() + 1) - 1
    }

    fn check_dim(&self, x: ArrayView1<'_, f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// `ln(ω_i g_i(x))` for every component, without dimension checks.
    fn weighted_log_densities_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let mean = self.means.row(i);
            let var = self.variances.row(i);
            let mut quad = 0.0;
            for j in 0..x.len() {
                let diff = x[j] - mean[j];
                quad += diff * diff / var[j];
            }
            *slot = self.log_norm[i] - 0.5 * quad;
        }
    }

    pub fn weighted_log_densities(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.n_components()];
        self.weighted_log_densities_into(x, &mut out);
        Ok(out)
    }

    /// `ln p(x)` via log-sum-exp over components.
    pub fn log_pdf(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let terms = self.weighted_log_densities(x)?;
        Ok(log_sum_exp(&terms))
    }

    /// Posterior membership probabilities `γ_i(x)`.
    pub fn responsibilities(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        let mut terms = self.weighted_log_densities(x)?;
        let lse = log_sum_exp(&terms);
        for t in terms.iter_mut() {
            *t = (*t - lse).exp();
        }
        Ok(terms)
    }

    /// Per-image AIC, `2k - 2 ln p(x)`.
    pub fn aic_per_image(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        let lp = self.log_pdf(x)?;
        Ok(2.0 * self.n_free_parameters() as f64 - 2.0 * lp)
    }

    /// Mean log-likelihood contribution summed over rows, in row order.
    pub fn total_log_likelihood(&self, data: ArrayView2<'_, f64>) -> Result<f64> {
        let mut total = 0.0;
        for row in data.rows() {
            total += self.log_pdf(row)?;
        }
        Ok(total)
    }

    /// Same mixture with components reordered: component `i` of the result is
    /// component `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_components() {
            return Err(Error::Validation("permutation length mismatch".into()));
        }
        let weights = order.iter().map(|&i| self.weights[i]).collect();
        let means = self.means.select(Axis(0), order);
        let variances = self.variances.select(Axis(0), order);
        GaussianMixture::new(weights, means, variances)
    }
}

fn compute_log_norm(weights: &[f64], variances: &Array2<f64>) -> Vec<f64> {
    weights
        .iter()
        .zip(variances.rows())
        .map(|(&w, var)| {
            let log_det: f64 = var.iter().map(|v| (2.0 * PI * v).ln()).sum();
            w.ln() - 0.5 * log_det
        })
        .collect()
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// EM settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub n_components: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Variances are floored at this fraction of the per-dimension data variance.
    pub variance_floor: f64,
    pub seed: u64,
    /// Project onto this many principal components before fitting.
    pub pca_dim: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_components: 16,
            max_iters: 200,
            rel_tol: 1e-6,
            variance_floor: 1e-6,
            seed: 7,
            pca_dim: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::Config("n_components must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::Config("rel_tol must be positive".into()));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::Config("variance_floor must be positive".into()));
        }
        if self.pca_dim == Some(0) {
            return Err(Error::Config("pca_dim must be positive".into()));
        }
        Ok(())
    }
}

/// What happened during a fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    /// Training log-likelihood of the parameters at the start of each iteration.
    pub log_likelihoods: Vec<f64>,
    /// Iterations at which a collapsed component was re-seeded.
    pub rescues: Vec<usize>,
    pub converged: bool,
}

pub fn fit_gmm(data: ArrayView2<'_, f64>, cfg: &FitConfig) -> Result<GaussianMixture> {
    fit_gmm_traced(data, cfg).map(|(gm, _)| gm)
}

/// EM with k-means++ initialization.
///
/// Rows are processed in parallel in the E-step and components in parallel
/// in the M-step; every reduction runs in a fixed order so the result is
/// bit-identical for any thread count.
pub fn fit_gmm_traced(
    data: ArrayView2<'_, f64>,
    cfg: &FitConfig,
) -> Result<(GaussianMixture, FitTrace)> {
    cfg.validate()?;
    let (n, d) = data.dim();
    let k = cfg.n_components;
    if n < k {
        return Err(Error::TooFewSamples {
            samples: n,
            components: k,
        });
    }
    if d == 0 {
        return Err(Error::Validation("data has zero columns".into()));
    }
    if let Some((r, _)) = data
        .rows()
        .into_iter()
        .enumerate()
        .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFinite { row: r });
    }

    let data_var = column_variance(data);
    let positive: Vec<f64> = data_var.iter().cloned().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::ZeroVariance);
    }
    let fallback = positive.iter().sum::<f64>() / positive.len() as f64;
    let floor: Array1<f64> = data_var.mapv(|v| cfg.variance_floor * if v > 0.0 { v } else { fallback });
    let global_var: Array1<f64> = data_var
        .iter()
        .zip(floor.iter())
        .map(|(&v, &f)| v.max(f))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers = plus_plus(data, k, &mut rng);
    let mut params = initial_params(data, &centers, &floor, &global_var);

    let mut trace = FitTrace::default();
    let mut resp = vec![0.0; n * k];
    let mut row_ll = vec![0.0; n];
    let mut gm = params.to_mixture()?;
    for iter in 0..cfg.max_iters.max(1) {
        e_step(&gm, data, &mut resp, &mut row_ll);
        let ll: f64 = row_ll.iter().sum();
        if let Some(&prev) = trace.log_likelihoods.last() {
            trace.log_likelihoods.push(ll);
            let rel = (ll - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if rel < cfg.rel_tol {
                trace.converged = true;
                break;
            }
        } else {
            trace.log_likelihoods.push(ll);
        }
        if iter + 1 == cfg.max_iters.max(1) {
            break;
        }
        params = m_step(data, &resp, k, &floor);
        if rescue_components(&mut params, data, &row_ll, &global_var) {
            trace.rescues.push(iter + 1);
        }
        gm = params.to_mixture()?;
    }
    Ok((gm, trace))
}

struct Params {
    weights: Vec<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
}

impl Params {
    fn to_mixture(&self) -> Result<GaussianMixture> {
        let total: f64 = self.weights.iter().sum();
        let weights = self.weights.iter().map(|w| w / total).collect();
        GaussianMixture::new(weights, self.means.clone(), self.variances.clone())
    }
}

fn column_variance(data: ArrayView2<'_, f64>) -> Array1<f64> {
    let n = data.nrows() as f64;
    let mean = data.mean_axis(Axis(0)).expect("nonempty");
    let mut var = Array1::<f64>::zeros(data.ncols());
    for row in data.rows() {
        for j in 0..row.len() {
            let diff = row[j] - mean[j];
            var[j] += diff * diff;
        }
    }
    var / n
}

/// One hard-assignment pass from the seeded centers.
fn initial_params(
    data: ArrayView2<'_, f64>,
    centers: &Array2<f64>,
    floor: &Array1<f64>,
    global_var: &Array1<f64>,
) -> Params {
    let (n, d) = data.dim();
    let k = centers.nrows();
    let mut counts = vec![0usize; k];
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut sq = Array2::<f64>::zeros((k, d));
    for row in data.rows() {
        let c = nearest_center(row, centers);
        counts[c] += 1;
        for j in 0..d {
            sums[[c, j]] += row[j];
            sq[[c, j]] += row[j] * row[j];
        }
    }
    let mut means = centers.clone();
    let mut variances = Array2::<f64>::zeros((k, d));
    let mut weights = vec![0.0; k];
    for c in 0..k {
        let m = counts[c] as f64;
        weights[c] = m.max(1.0) / n as f64;
        for j in 0..d {
            if counts[c] >= 2 {
                let mean = sums[[c, j]] / m;
                means[[c, j]] = mean;
                variances[[c, j]] = (sq[[c, j]] / m - mean * mean).max(floor[j]);
            } else {
                variances[[c, j]] = global_var[j];
            }
        }
    }
    Params {
        weights,
        means,
        variances,
    }
}

fn e_step(gm: &GaussianMixture, data: ArrayView2<'_, f64>, resp: &mut [f64], row_ll: &mut [f64]) {
    let k = gm.n_components();
    resp.par_chunks_mut(k)
        .zip(row_ll.par_iter_mut())
        .enumerate()
        .for_each(|(r, (gamma, ll))| {
            gm.weighted_log_densities_into(data.row(r), gamma);
            let lse = log_sum_exp(gamma);
            for g in gamma.iter_mut() {
                *g = (*g - lse).exp();
            }
            *ll = lse;
        });
}

fn m_step(data: ArrayView2<'_, f64>, resp: &[f64], k: usize, floor: &Array1<f64>) -> Params {
    let (n, d) = data.dim();
    let per_component: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..k)
        .into_par_iter()
        .map(|c| {
            let mut nk = 0.0;
            let mut sum = vec![0.0; d];
            for r in 0..n {
                let g = resp[r * k + c];
                nk += g;
                let row = data.row(r);
                for j in 0..d {
                    sum[j] += g * row[j];
                }
            }
            if nk <= 0.0 {
                return (0.0, vec![0.0; d], floor.to_vec());
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / nk).collect();
            let mut var = vec![0.0; d];
            for r in 0..n {
                let g = resp[r * k + c];
                let row = data.row(r);
                for j in 0..d {
                    let diff = row[j] - mean[j];
                    var[j] += g * diff * diff;
                }
            }
            for j in 0..d {
                var[j] = (var[j] / nk).max(floor[j]);
            }
            (nk, mean, var)
        })
        .collect();

    let mut weights = vec![0.0; k];
    let mut means = Array2::<f64>::zeros((k, d));
    let mut variances = Array2::<f64>::zeros((k, d));
    for (c, (nk, mean, var)) in per_component.into_iter().enumerate() {
        weights[c] = nk / n as f64;
        means.row_mut(c).assign(&Array1::from(mean));
        variances.row_mut(c).assign(&Array1::from(var));
    }
    Params {
        weights,
        means,
        variances,
    }
}

/// Re-seeds components with weight below [`RESCUE_WEIGHT`] at the rows the
/// current model explains worst. Returns whether anything changed.
fn rescue_components(
    params: &mut Params,
    data: ArrayView2<'_, f64>,
    row_ll: &[f64],
    global_var: &Array1<f64>,
) -> bool {
    let collapsed: Vec<usize> = (0..params.weights.len())
        .filter(|&c| !(params.weights[c] >= RESCUE_WEIGHT))
        .collect();
    if collapsed.is_empty() {
        return false;
    }
    let mut worst: Vec<usize> = (0..row_ll.len()).collect();
    worst.sort_by(|&a, &b| row_ll[a].total_cmp(&row_ll[b]).then(a.cmp(&b)));
    let n = data.nrows() as f64;
    for (slot, &c) in collapsed.iter().enumerate() {
        let r = worst[slot % worst.len()];
        params.means.row_mut(c).assign(&data.row(r));
        params.variances.row_mut(c).assign(global_var);
        params.weights[c] = 1.0 / n;
    }
    true
}
