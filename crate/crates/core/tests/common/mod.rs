//! Independent reference implementations and seeded fixtures shared by the
//! integration tests. Nothing here calls the library code it checks.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use novelty_core::GaussianMixture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------- mixtures

/// Plain parameters of a diagonal mixture; `sigmas` are standard deviations.
#[derive(Debug, Clone)]
pub struct Params {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub sigmas: Vec<Vec<f64>>,
}

impl Params {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Params {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        Params {
            weights: raw.iter().map(|w| w / total).collect(),
            means: (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
            sigmas: (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(0.5..2.0)).collect())
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn d(&self) -> usize {
        self.means[0].len()
    }

    pub fn to_mixture(&self) -> GaussianMixture {
        let (n, d) = (self.n(), self.d());
        let means = Array2::from_shape_fn((n, d), |(i, j)| self.means[i][j]);
        let vars = Array2::from_shape_fn((n, d), |(i, j)| self.sigmas[i][j] * self.sigmas[i][j]);
        GaussianMixture::new(self.weights.clone(), means, vars).unwrap()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, count: usize) -> Array2<f64> {
        let d = self.d();
        let mut out = Array2::zeros((count, d));
        for r in 0..count {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.n() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = i;
                    break;
                }
            }
            for j in 0..d {
                out[[r, j]] = self.means[k][j] + self.sigmas[k][j] * normal(rng);
            }
        }
        out
    }
}

/// `ln p(x)` straight from the definition, with a max-shift for stability.
pub fn log_density(p: &Params, x: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..p.n())
        .map(|i| {
            let mut t = p.weights[i].ln();
            for j in 0..p.d() {
                let s = p.sigmas[i][j];
                let z = (x[j] - p.means[i][j]) / s;
                t += -0.5 * (2.0 * std::f64::consts::PI).ln() - s.ln() - 0.5 * z * z;
            }
            t
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Central finite-difference gradient of `ln p(x)` in every mean, then every
/// standard deviation, components in order.
pub fn fd_score(p: &Params, x: &[f64]) -> Vec<f64> {
    let (n, d) = (p.n(), p.d());
    let mut out = vec![0.0; 2 * n * d];
    for i in 0..n {
        for j in 0..d {
            for (block, is_sigma) in [(0usize, false), (1, true)] {
                let base = if is_sigma { p.sigmas[i][j] } else { p.means[i][j] };
                let h = 1e-5 * base.abs().max(1.0);
                let eval = |v: f64| {
                    let mut q = p.clone();
                    if is_sigma {
                        q.sigmas[i][j] = v;
                    } else {
                        q.means[i][j] = v;
                    }
                    log_density(&q, x)
                };
                out[block * n * d + i * d + j] = (eval(base + h) - eval(base - h)) / (2.0 * h);
            }
        }
    }
    out
}

/// Fisher vector from the closed-form per-entry expressions.
pub fn fisher_vector_oracle(p: &Params, x: &[f64]) -> Vec<f64> {
    let (n, d) = (p.n(), p.d());
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            let mut t = p.weights[i].ln();
            for j in 0..d {
                let s = p.sigmas[i][j];
                let z = (x[j] - p.means[i][j]) / s;
                t += -s.ln() - 0.5 * z * z;
            }
            t
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|t| (t - m).exp()).sum();
    let gamma: Vec<f64> = logs.iter().map(|t| (t - m).exp() / z).collect();
    let mut out = vec![0.0; 2 * n * d];
    for i in 0..n {
        let w = p.weights[i];
        for j in 0..d {
            let u = (x[j] - p.means[i][j]) / p.sigmas[i][j];
            out[i * d + j] = gamma[i] * u / w.sqrt();
            out[n * d + i * d + j] = gamma[i] * (u * u - 1.0) / (2.0 * w).sqrt();
        }
    }
    out
}

/// Largest entrywise deviation relative to the largest reference magnitude.
pub fn rel_error(actual: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    actual
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, r)| m.max((a - r).abs()))
        / scale
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

// ---------------------------------------------------------------- tags

/// Two passes per image: count earlier images per tag from scratch, then
/// evaluate the surprise.
pub fn tag_novelty_oracle(images: &[Vec<String>]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(images.len());
    for (i, tags) in images.iter().enumerate() {
        let mut focal: Vec<&String> = tags.iter().collect();
        focal.sort();
        focal.dedup();
        if focal.is_empty() {
            out.push((0.0, 0.0));
            continue;
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for earlier in &images[..i] {
            let mut seen: Vec<&String> = earlier.iter().collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let total = (i + 1) as f64;
        let raw = focal
            .iter()
            .map(|t| -((counts.get(t.as_str()).copied().unwrap_or(0) + 1) as f64 / total).ln())
            .sum::<f64>()
            / focal.len() as f64;
        let norm = if i == 0 { 1.0 } else { (raw / total.ln()).clamp(0.0, 1.0) };
        out.push((raw, norm));
    }
    out
}

pub fn random_tag_corpus(rng: &mut ChaCha8Rng, images: usize, vocab: usize) -> Vec<Vec<String>> {
    (0..images)
        .map(|_| {
            let k = rng.random_range(0..5);
            (0..k).map(|_| format!("t{}", rng.random_range(0..vocab))).collect()
        })
        .collect()
}

// ---------------------------------------------------------------- networks

/// Exact rational `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub fn new(num: i128, den: i128) -> Ratio {
        let g = gcd(num, den).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn zero() -> Ratio {
        Ratio { num: 0, den: 1 }
    }

    pub fn add(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Ratio) -> Ratio {
        Ratio::new(self.num * o.num, self.den * o.den)
    }

    /// Correctly rounded for the small magnitudes used here.
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetOracle {
    pub in_degree: usize,
    pub out_degree: usize,
    pub closeness: Ratio,
    pub constraint: Ratio,
    pub density: Ratio,
}

/// Metrics from an adjacency matrix: Floyd–Warshall distances on the
/// undirected projection and Burt's formula with exact fractions.
pub fn net_oracle(adj: &[Vec<bool>], u: usize) -> NetOracle {
    let n = adj.len();
    let und = |a: usize, b: usize| a != b && (adj[a][b] || adj[b][a]);
    const INF: usize = usize::MAX / 4;
    let mut dist = vec![vec![INF; n]; n];
    for a in 0..n {
        dist[a][a] = 0;
        for b in 0..n {
            if und(a, b) {
                dist[a][b] = 1;
            }
        }
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if dist[a][k] + dist[k][b] < dist[a][b] {
                    dist[a][b] = dist[a][k] + dist[k][b];
                }
            }
        }
    }
    let reach: Vec<usize> = (0..n).filter(|&v| v != u && dist[u][v] < INF).collect();
    let r = reach.len() as i128;
    let total: i128 = reach.iter().map(|&v| dist[u][v] as i128).sum();
    let closeness = if r == 0 {
        Ratio::zero()
    } else {
        Ratio::new(r * r, (n as i128 - 1) * total)
    };

    let alters: Vec<usize> = (0..n).filter(|&v| adj[u][v] && v != u).collect();
    let mut ego = vec![u];
    ego.extend(&alters);
    let deg = |i: usize| ego.iter().filter(|&&j| und(i, j)).count() as i128;
    let p = |i: usize, j: usize| {
        if und(i, j) {
            Ratio::new(1, deg(i))
        } else {
            Ratio::zero()
        }
    };
    let mut constraint = Ratio::zero();
    for &j in &alters {
        let mut c = p(u, j);
        for &q in &alters {
            if q != j {
                c = c.add(p(u, q).mul(p(q, j)));
            }
        }
        constraint = constraint.add(c.mul(c));
    }
    let s = alters.len() as i128;
    let density = if s < 2 {
        Ratio::zero()
    } else {
        let ties = alters
            .iter()
            .flat_map(|&a| alters.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| a != b && adj[a][b])
            .count() as i128;
        Ratio::new(ties, s * (s - 1))
    };
    NetOracle {
        in_degree: (0..n).filter(|&v| adj[v][u]).count(),
        out_degree: alters.len(),
        closeness,
        constraint,
        density,
    }
}

/// Adjacency matrix of the `code`-th directed graph on `n` labeled nodes;
/// bit `k` enables the `k`-th ordered pair of distinct nodes.
pub fn graph_from_code(n: usize, code: u64) -> (Vec<Vec<bool>>, Vec<(usize, usize)>) {
    let mut adj = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    let mut k = 0;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            if code >> k & 1 == 1 {
                adj[a][b] = true;
                edges.push((a, b));
            }
            k += 1;
        }
    }
    (adj, edges)
}

// ---------------------------------------------------------------- statistics

/// Exact two-sided Mann–Whitney p-value by enumerating every split of the
/// pooled sample; U counts pairwise wins with half credit for ties.
pub fn mwu_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let n1 = a.len();
    let u_of = |mask: u32| -> f64 {
        let mut u = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 0 {
                continue;
            }
            for j in 0..n {
                if mask >> j & 1 == 1 {
                    continue;
                }
                if pooled[i] > pooled[j] {
                    u += 1.0;
                } else if pooled[i] == pooled[j] {
                    u += 0.5;
                }
            }
        }
        u
    };
    let observed = u_of((1u32 << n1) - 1);
    let center = (n1 * (n - n1)) as f64 / 2.0;
    let dev = (observed - center).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        if (u_of(mask) - center).abs() >= dev {
            extreme += 1;
        }
    }
    (observed, extreme as f64 / total as f64)
}

// ---------------------------------------------------------------- images

/// GLCM by testing every ordered pair of pixels against each offset.
pub fn haralick_oracle(q: &Array2<usize>, levels: usize) -> [f64; 4] {
    let (h, w) = q.dim();
    let offsets: [(i64, i64); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    let mut avg = vec![vec![0.0f64; levels]; levels];
    let mut used = 0.0;
    for (dx, dy) in offsets {
        let mut counts = vec![vec![0.0; levels]; levels];
        let mut pairs = 0.0;
        for r1 in 0..h {
            for c1 in 0..w {
                for r2 in 0..h {
                    for c2 in 0..w {
                        if c2 as i64 - c1 as i64 == dx && r2 as i64 - r1 as i64 == dy {
                            let (a, b) = (q[[r1, c1]], q[[r2, c2]]);
                            counts[a][b] += 1.0;
                            counts[b][a] += 1.0;
                            pairs += 2.0;
                        }
                    }
                }
            }
        }
        if pairs == 0.0 {
            continue;
        }
        used += 1.0;
        for a in 0..levels {
            for b in 0..levels {
                avg[a][b] += counts[a][b] / pairs;
            }
        }
    }
    let (mut ent, mut en, mut hom, mut con) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for a in 0..levels {
        for b in 0..levels {
            let p = avg[a][b] / used;
            if p > 0.0 {
                let d = a as f64 - b as f64;
                ent -= p * p.ln();
                en += p * p;
                hom += p / (1.0 + d.abs());
                con += d * d * p;
            }
        }
    }
    [ent, en, hom, con]
}

/// Seeded gray-level fixtures of every shape up to `max_side`.
pub fn glcm_fixtures(max_side: usize, levels: usize) -> Vec<Array2<usize>> {
    let mut out = Vec::new();
    let mut r = rng(31);
    for h in 1..=max_side {
        for w in 1..=max_side {
            if h * w < 2 {
                continue;
            }
            out.push(Array2::from_shape_fn((h, w), |_| r.random_range(0..levels)));
            out.push(Array2::from_shape_fn((h, w), |(y, x)| (x + 2 * y) % levels));
            out.push(Array2::from_shape_fn((h, w), |(y, x)| if (x + y) % 2 == 0 { 0 } else { levels - 1 }));
        }
    }
    out
}

/// O(n²) 2-D DFT; the inverse is scaled by `1/(hw)`.
pub fn naive_dft2(data: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = data.dim();
    let sign = if inverse { 1.0 } else { -1.0 };
    let src = data.clone();
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = sign
                        * 2.0
                        * std::f64::consts::PI
                        * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                    acc += src[[y, x]] * Complex64::from_polar(1.0, phase);
                }
            }
            data[[u, v]] = if inverse { acc / (h * w) as f64 } else { acc };
        }
    }
}

pub fn row_vec(x: ArrayView1<'_, f64>) -> Vec<f64> {
    x.to_vec()
}
