//! Gray-level co-occurrence matrices and four Haralick statistics.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Gray levels used by the compositional extractor.
pub const LEVELS: usize = 32;

/// Column/row shifts averaged into the co-occurrence matrix.
pub const OFFSETS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Haralick {
    pub entropy: f64,
    pub energy: f64,
    pub homogeneity: f64,
    pub contrast: f64,
}

/// Maps gray values in `[0, 255]` onto `levels` equal-width bins.
pub fn quantize(gray: &Array2<f64>, levels: usize) -> Array2<usize> {
    gray.mapv(|g| {
        let q = (g.clamp(0.0, 255.0) * levels as f64 / 256.0).floor() as usize;
        q.min(levels - 1)
    })
}

/// Symmetric, normalized co-occurrence matrix for one `(dx, dy)` offset,
/// pairing pixel `(r, c)` with `(r + dy, c + dx)`. `None` when the image
/// has no pixel pair at that offset.
pub fn glcm(q: &Array2<usize>, levels: usize, (dx, dy): (isize, isize)) -> Option<Array2<f64>> {
    let (h, w) = q.dim();
    let mut m = Array2::<f64>::zeros((levels, levels));
    let mut pairs = 0usize;
    for r in 0..h {
        let r2 = r as isize + dy;
        if r2 < 0 || r2 >= h as isize {
            continue;
        }
        for c in 0..w {
            let c2 = c as isize + dx;
            if c2 < 0 || c2 >= w as isize {
                continue;
            }
            let a = q[[r, c]];
            let b = q[[r2 as usize, c2 as usize]];
            m[[a, b]] += 1.0;
            m[[b, a]] += 1.0;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return None;
    }
    let total = 2.0 * pairs as f64;
    Some(m / total)
}

/// Mean of the per-offset matrices over [`OFFSETS`].
pub fn averaged_glcm(q: &Array2<usize>, levels: usize) -> Result<Array2<f64>> {
    if q.is_empty() {
        return Err(Error::Validation("empty gray matrix".into()));
    }
    if let Some(&bad) = q.iter().find(|&&v| v >= levels) {
        return Err(Error::Validation(format!(
            "gray level {bad} outside 0..{levels}"
        )));
    }
    let mats: Vec<Array2<f64>> = OFFSETS.iter().filter_map(|&o| glcm(q, levels, o)).collect();
    if mats.is_empty() {
        return Err(Error::Validation("image has no neighbouring pixel pairs".into()));
    }
    let count = mats.len() as f64;
    let sum = mats
        .into_iter()
        .fold(Array2::<f64>::zeros((levels, levels)), |acc, m| acc + m);
    Ok(sum / count)
}

/// Entropy (natural log), energy, homogeneity and contrast of a normalized
/// co-occurrence matrix.
pub fn haralick_from_glcm(p: &Array2<f64>) -> Haralick {
    let mut entropy = 0.0;
    let mut energy = 0.0;
    let mut homogeneity = 0.0;
    let mut contrast = 0.0;
    for ((i, j), &v) in p.indexed_iter() {
        if v <= 0.0 {
            continue;
        }
        let diff = i as f64 - j as f64;
        entropy -= v * v.ln();
        energy += v * v;
        homogeneity += v / (1.0 + diff.abs());
        contrast += diff * diff * v;
    }
    Haralick {
        entropy,
        energy,
        homogeneity,
        contrast,
    }
}

pub fn haralick_features(q: &Array2<usize>, levels: usize) -> Result<Haralick> {
    Ok(haralick_from_glcm(&averaged_glcm(q, levels)?))
}
