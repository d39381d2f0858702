//! k-means++ seeding.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Picks `k` rows of `data` as initial centers with D² sampling.
///
/// The first center is uniform over rows; each later center is drawn with
/// probability proportional to the squared distance to its nearest chosen
/// center. When every remaining distance is zero the draw falls back to
/// uniform.
pub fn plus_plus(data: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, d) = data.dim();
    assert!(k >= 1 && n >= k, "k-means++ needs 1 <= k <= n");
    let mut centers = Array2::<f64>::zeros((k, d));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&data.row(first));

    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // guard against rounding leaving us on a zero-weight tail row
            if nearest[chosen] == 0.0 {
                chosen = nearest
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&data.row(pick));
        for (i, best) in nearest.iter_mut().enumerate() {
            let dist = sq_dist(data.row(i), centers.row(c));
            if dist < *best {
                *best = dist;
            }
        }
    }
    centers
}

/// Index of the nearest center, lowest index on ties.
pub fn nearest_center(x: ndarray::ArrayView1<'_, f64>, centers: &Array2<f64>) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (c, center) in centers.rows().into_iter().enumerate() {
        let dist = sq_dist(x, center);
        if dist < best_dist {
            best_dist = dist;
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn separated_points_get_distinct_centers() {
        let data = array![[0.0], [0.1], [100.0], [100.1], [-100.0]];
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = plus_plus(data.view(), 3, &mut rng);
            let mut picked: Vec<i64> = c.column(0).iter().map(|v| v.round() as i64).collect();
            picked.sort();
            assert_eq!(picked, vec![-100, 0, 100], "seed {seed}");
        }
    }

    #[test]
    fn duplicate_rows_fall_back_to_uniform() {
        let data = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = plus_plus(data.view(), 3, &mut rng);
        assert!(c.iter().all(|&v| v == 1.0));
    }
}
