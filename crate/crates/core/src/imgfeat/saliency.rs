//! Spectral-residual saliency.
//!
//! The log-amplitude spectrum minus its 3×3 local mean is recombined with
//! the original phase, transformed back, squared, smoothed with a 5×5
//! Gaussian (σ = 2.5) and rescaled to `[0, 1]`.

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Side length the gray image is resampled to before the transform.
pub const SALIENCY_SIZE: usize = 64;
pub const BLUR_SIGMA: f64 = 2.5;
/// Pixels above this multiple of the mean map value form salient regions.
pub const REGION_THRESHOLD: f64 = 3.0;

const LOG_EPS: f64 = 1e-12;

/// In-place 2-D DFT (rows, then columns). The inverse is scaled by `1/(hw)`.
pub fn fft2(data: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = data.dim();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); w.max(h)];
    for r in 0..h {
        for c in 0..w {
            buf[c] = data[[r, c]];
        }
        row_fft.process(&mut buf[..w]);
        for c in 0..w {
            data[[r, c]] = buf[c];
        }
    }
    for c in 0..w {
        for r in 0..h {
            buf[r] = data[[r, c]];
        }
        col_fft.process(&mut buf[..h]);
        for r in 0..h {
            data[[r, c]] = buf[r];
        }
    }
    if inverse {
        let scale = 1.0 / (h * w) as f64;
        data.mapv_inplace(|v| v * scale);
    }
}

/// Correlates `src` with a square `kernel`, replicating border pixels.
pub fn filter_replicate(src: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
    let (h, w) = src.dim();
    let k = kernel.nrows();
    let half = (k / 2) as isize;
    Array2::from_shape_fn((h, w), |(r, c)| {
        let mut acc = 0.0;
        for kr in 0..k {
            let rr = (r as isize + kr as isize - half).clamp(0, h as isize - 1) as usize;
            for kc in 0..k {
                let cc = (c as isize + kc as isize - half).clamp(0, w as isize - 1) as usize;
                acc += kernel[[kr, kc]] * src[[rr, cc]];
            }
        }
        acc
    })
}

pub fn box_kernel(size: usize) -> Array2<f64> {
    Array2::from_elem((size, size), 1.0 / (size * size) as f64)
}

pub fn gaussian_kernel(size: usize, sigma: f64) -> Array2<f64> {
    let half = (size / 2) as f64;
    let k = Array2::from_shape_fn((size, size), |(r, c)| {
        let y = r as f64 - half;
        let x = c as f64 - half;
        (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
    });
    let total = k.sum();
    k / total
}

/// Rescales to `[0, 1]`; a flat map becomes all zeros.
pub fn normalize_unit(map: &Array2<f64>) -> Array2<f64> {
    let min = map.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = map.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if !(span > 0.0) || !span.is_finite() {
        return Array2::zeros(map.dim());
    }
    map.mapv(|v| ((v - min) / span).clamp(0.0, 1.0))
}

/// Saliency map of a gray image (any size; callers resample to
/// [`SALIENCY_SIZE`] first). Constant input yields an all-zero map.
pub fn spectral_saliency(gray: &Array2<f64>) -> Array2<f64> {
    let first = gray.iter().next().copied().unwrap_or(0.0);
    if gray.iter().all(|&v| v == first) {
        return Array2::zeros(gray.dim());
    }
    let mut spec = gray.mapv(|v| Complex64::new(v, 0.0));
    fft2(&mut spec, false);
    residual_to_map(&spec, fft2)
}

/// Shared tail of the pipeline, parameterized by the transform so tests can
/// swap in an independent DFT.
pub fn residual_to_map(
    spectrum: &Array2<Complex64>,
    mut transform: impl FnMut(&mut Array2<Complex64>, bool),
) -> Array2<f64> {
    let log_amp = spectrum.mapv(|z| (z.norm() + LOG_EPS).ln());
    let phase = spectrum.mapv(|z| z.arg());
    let smoothed = filter_replicate(&log_amp, &box_kernel(3));
    let residual = &log_amp - &smoothed;
    let mut back = Array2::from_shape_fn(spectrum.dim(), |idx| {
        Complex64::from_polar(residual[idx].exp(), phase[idx])
    });
    transform(&mut back, true);
    let energy = back.mapv(|z| z.norm_sqr());
    let blurred = filter_replicate(&energy, &gaussian_kernel(5, BLUR_SIGMA));
    normalize_unit(&blurred)
}

/// 4-connected components of pixels strictly above `3 · mean(map)`.
pub fn salient_regions(map: &Array2<f64>) -> usize {
    let (h, w) = map.dim();
    if map.is_empty() {
        return 0;
    }
    let threshold = REGION_THRESHOLD * map.mean().unwrap_or(0.0);
    let mut seen = Array2::from_elem((h, w), false);
    let mut regions = 0;
    let mut stack = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if seen[[r, c]] || !(map[[r, c]] > threshold) {
                continue;
            }
            regions += 1;
            seen[[r, c]] = true;
            stack.push((r, c));
            while let Some((y, x)) = stack.pop() {
                let mut visit = |yy: usize, xx: usize| {
                    if !seen[[yy, xx]] && map[[yy, xx]] > threshold {
                        seen[[yy, xx]] = true;
                        stack.push((yy, xx));
                    }
                };
                if y > 0 {
                    visit(y - 1, x);
                }
                if y + 1 < h {
                    visit(y + 1, x);
                }
                if x > 0 {
                    visit(y, x - 1);
                }
                if x + 1 < w {
                    visit(y, x + 1);
                }
            }
        }
    }
    regions
}

/// Bilinear resampling with pixel-center alignment.
pub fn resize_bilinear(src: &Array2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let sample = |pos: f64, len: usize| -> (usize, usize, f64) {
        let p = pos.clamp(0.0, (len - 1) as f64);
        let lo = p.floor() as usize;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, p - lo as f64)
    };
    Array2::from_shape_fn((out_h, out_w), |(r, c)| {
        let y = (r as f64 + 0.5) * h as f64 / out_h as f64 - 0.5;
        let x = (c as f64 + 0.5) * w as f64 / out_w as f64 - 0.5;
        let (y0, y1, fy) = sample(y, h);
        let (x0, x1, fx) = sample(x, w);
        // a + (b - a) t keeps flat regions exactly flat
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let top = lerp(src[[y0, x0]], src[[y0, x1]], fx);
        let bottom = lerp(src[[y1, x0]], src[[y1, x1]], fx);
        lerp(top, bottom, fy)
    })
}
