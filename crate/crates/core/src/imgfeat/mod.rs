//! The 47 compositional features of an RGB image.
//!
//! Layout of the feature vector (see [`FEATURE_NAMES`]):
//!
//! | index | features |
//! |-------|----------|
//! | 0 | luminance contrast (std of relative luminance) |
//! | 1-3 | mean hue, saturation, brightness |
//! | 4-6 | the same means over the central third |
//! | 7-9 | std of hue, saturation, brightness |
//! | 10-12 | pleasure, arousal, dominance |
//! | 13-24 | Itten hue histogram, 12 uniform bins |
//! | 25-29 | Itten saturation histogram, cuts at .2 .4 .6 .8 |
//! | 30-32 | Itten brightness histogram, cuts at 1/3 2/3 |
//! | 33-35 | Itten contrasts: std of each histogram's bins |
//! | 36-38 | saliency mean, max, std |
//! | 39 | salient region count |
//! | 40 | horizontal symmetry |
//! | 41-44 | Haralick entropy, energy, homogeneity, contrast |
//! | 45 | colorfulness |
//! | 46 | hue count |
//!
//! Hue is undefined for achromatic pixels (zero saturation); those pixels
//! are left out of every hue statistic. An image with no chromatic pixel
//! has hue mean and std 0 and all hue-histogram mass in bin 0.
//!
//! The emotional dimensions use the affective-image coefficients
//! `pleasure = .69V + .22S`, `arousal = -.31V + .60S`,
//! `dominance = .76V + .32S` on the mean saturation `S` and brightness `V`.

pub mod haralick;
pub mod saliency;

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use haralick::{haralick_features, Haralick};
pub use saliency::{salient_regions, spectral_saliency};

pub const N_FEATURES: usize = 47;
pub const MIN_SIDE: u32 = 8;

pub const HUE_BINS: usize = 12;
pub const SATURATION_CUTS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const BRIGHTNESS_CUTS: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];

/// Hue-count settings: 20 bins over pixels with saturation above 0.2 and
/// brightness within (0.15, 0.95); a bin counts when it holds more than 5%
/// of the fullest bin.
const HUE_COUNT_BINS: usize = 20;
const HUE_COUNT_ALPHA: f64 = 0.05;

pub const IDX_LUMINANCE_CONTRAST: usize = 0;
pub const IDX_MEAN_HSV: usize = 1;
pub const IDX_CENTER_HSV: usize = 4;
pub const IDX_STD_HSV: usize = 7;
pub const IDX_PAD: usize = 10;
pub const IDX_HUE_HIST: usize = 13;
pub const IDX_SAT_HIST: usize = 25;
pub const IDX_BRIGHT_HIST: usize = 30;
pub const IDX_ITTEN_CONTRAST: usize = 33;
pub const IDX_SALIENCY: usize = 36;
pub const IDX_SALIENT_REGIONS: usize = 39;
pub const IDX_SYMMETRY: usize = 40;
pub const IDX_HARALICK: usize = 41;
pub const IDX_COLORFULNESS: usize = 45;
pub const IDX_HUE_COUNT: usize = 46;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "luminance_contrast",
    "mean_hue",
    "mean_saturation",
    "mean_brightness",
    "center_hue",
    "center_saturation",
    "center_brightness",
    "std_hue",
    "std_saturation",
    "std_brightness",
    "pleasure",
    "arousal",
    "dominance",
    "itten_hue_0",
    "itten_hue_1",
    "itten_hue_2",
    "itten_hue_3",
    "itten_hue_4",
    "itten_hue_5",
    "itten_hue_6",
    "itten_hue_7",
    "itten_hue_8",
    "itten_hue_9",
    "itten_hue_10",
    "itten_hue_11",
    "itten_saturation_0",
    "itten_saturation_1",
    "itten_saturation_2",
    "itten_saturation_3",
    "itten_saturation_4",
    "itten_brightness_0",
    "itten_brightness_1",
    "itten_brightness_2",
    "itten_hue_contrast",
    "itten_saturation_contrast",
    "itten_brightness_contrast",
    "saliency_mean",
    "saliency_max",
    "saliency_std",
    "salient_regions",
    "symmetry",
    "haralick_entropy",
    "haralick_energy",
    "haralick_homogeneity",
    "haralick_contrast",
    "colorfulness",
    "hue_count",
];

/// 8-bit RGB pixels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation("image has zero area".into()));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::Validation(format!(
                "expected {expected} RGB bytes, got {}",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        RasterImage::new(width, height, pixels)
    }

    /// Decodes PNG, JPEG or GIF (first frame).
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        RasterImage::new(w, h, rgb.into_raw())
    }

    /// Encodes by file extension (`.png`, `.jpg`, `.gif`).
    pub fn save(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn mirrored(&self) -> RasterImage {
        RasterImage::from_fn(self.width, self.height, |x, y| self.pixel(self.width - 1 - x, y))
            .expect("same shape")
    }

    /// Luma `0.299R + 0.587G + 0.114B` in `[0, 255]`.
    pub fn gray(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.height as usize, self.width as usize), |(r, c)| {
            let [red, green, blue] = self.pixel(c as u32, r as u32);
            luma(red, green, blue)
        })
    }
}

fn luma(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

/// Hue in `[0, 1)` (`None` when achromatic), saturation and value in `[0, 1]`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (Option<f64>, f64, f64) {
    let (rf, gf, bf) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (None, s, v);
    }
    let sector = if max == rf {
        ((gf - bf) / delta).rem_euclid(6.0)
    } else if max == gf {
        (bf - rf) / delta + 2.0
    } else {
        (rf - gf) / delta + 4.0
    };
    ((Some((sector / 6.0).rem_euclid(1.0))), s, v)
}

/// `(pleasure, arousal, dominance)` from mean saturation and brightness.
pub fn emotional_dims(mean_s: f64, mean_v: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..=1.0).contains(&mean_s) || !(0.0..=1.0).contains(&mean_v) {
        return Err(Error::Validation(format!(
            "saturation {mean_s} and brightness {mean_v} must lie in [0, 1]"
        )));
    }
    Ok((
        0.69 * mean_v + 0.22 * mean_s,
        -0.31 * mean_v + 0.60 * mean_s,
        0.76 * mean_v + 0.32 * mean_s,
    ))
}

/// Fraction of hues per 12 uniform bins. Hues are taken modulo one turn;
/// with no hues at all the mass goes to bin 0.
pub fn itten_hue_histogram(hues: &[f64]) -> [f64; HUE_BINS] {
    let mut hist = [0.0; HUE_BINS];
    if hues.is_empty() {
        hist[0] = 1.0;
        return hist;
    }
    for &h in hues {
        let bin = ((h.rem_euclid(1.0) * HUE_BINS as f64) as usize).min(HUE_BINS - 1);
        hist[bin] += 1.0;
    }
    let n = hues.len() as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    hist
}

fn cut_histogram<const B: usize>(values: &[f64], cuts: &[f64]) -> [f64; B] {
    let mut hist = [0.0; B];
    for &v in values {
        let bin = cuts.iter().take_while(|&&c| v >= c).count();
        hist[bin] += 1.0;
    }
    let n = values.len().max(1) as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    hist
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `1 - mean |g - mirror(g)| / 255` on the gray image.
pub fn symmetry(gray: &Array2<f64>) -> f64 {
    let (h, w) = gray.dim();
    // each mirrored pair once, so the sum is identical for the mirror image
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w / 2 {
            total += (gray[[r, c]] - gray[[r, w - 1 - c]]).abs();
        }
    }
    1.0 - 2.0 * total / (h * w) as f64 / 255.0
}

/// Opponent-space colorfulness `√(σ_rg² + σ_yb²) + 0.3 √(μ_rg² + μ_yb²)`.
pub fn colorfulness(img: &RasterImage) -> f64 {
    let mut rg = Vec::with_capacity((img.width * img.height) as usize);
    let mut yb = Vec::with_capacity(rg.capacity());
    for px in img.pixels.chunks_exact(3) {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        rg.push(r - g);
        yb.push(0.5 * (r + g) - b);
    }
    let (m_rg, s_rg) = mean_std(&rg);
    let (m_yb, s_yb) = mean_std(&yb);
    (s_rg * s_rg + s_yb * s_yb).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt()
}

/// The 47 named compositional features.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionalFeatures {
    values: [f64; N_FEATURES],
}

impl CompositionalFeatures {
    pub fn values(&self) -> &[f64; N_FEATURES] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.to_vec()
    }
}

pub fn extract_compositional(img: &RasterImage) -> Result<CompositionalFeatures> {
    if img.width < MIN_SIDE || img.height < MIN_SIDE {
        return Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
            min: MIN_SIDE,
        });
    }
    let (w, h) = (img.width as usize, img.height as usize);
    let (r0, r1) = (h / 3, h - h / 3);
    let (c0, c1) = (w / 3, w - w / 3);

    let n = w * h;
    let mut hues = Vec::with_capacity(n);
    let mut sats = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    let mut lum = Vec::with_capacity(n);
    let mut center_hues = Vec::new();
    let mut center_sats = Vec::new();
    let mut center_vals = Vec::new();
    let mut count_hist = [0usize; HUE_COUNT_BINS];
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = img.pixel(x as u32, y as u32);
            let (hue, s, v) = rgb_to_hsv(r, g, b);
            let central = (r0..r1).contains(&y) && (c0..c1).contains(&x);
            if let Some(hue) = hue {
                hues.push(hue);
                if central {
                    center_hues.push(hue);
                }
                if s > 0.2 && v > 0.15 && v < 0.95 {
                    let bin = ((hue * HUE_COUNT_BINS as f64) as usize).min(HUE_COUNT_BINS - 1);
                    count_hist[bin] += 1;
                }
            }
            sats.push(s);
            vals.push(v);
            lum.push(luma(r, g, b) / 255.0);
            if central {
                center_sats.push(s);
                center_vals.push(v);
            }
        }
    }

    let mut f = [0.0; N_FEATURES];
    f[IDX_LUMINANCE_CONTRAST] = mean_std(&lum).1;

    let (hue_mean, hue_std) = mean_std(&hues);
    let (sat_mean, sat_std) = mean_std(&sats);
    let (val_mean, val_std) = mean_std(&vals);
    f[IDX_MEAN_HSV..IDX_MEAN_HSV + 3].copy_from_slice(&[hue_mean, sat_mean, val_mean]);
    f[IDX_CENTER_HSV..IDX_CENTER_HSV + 3].copy_from_slice(&[
        mean_std(&center_hues).0,
        mean_std(&center_sats).0,
        mean_std(&center_vals).0,
    ]);
    f[IDX_STD_HSV..IDX_STD_HSV + 3].copy_from_slice(&[hue_std, sat_std, val_std]);

    let (p, a, d) = emotional_dims(sat_mean.clamp(0.0, 1.0), val_mean.clamp(0.0, 1.0))?;
    f[IDX_PAD..IDX_PAD + 3].copy_from_slice(&[p, a, d]);

    let hue_hist = itten_hue_histogram(&hues);
    let sat_hist: [f64; 5] = cut_histogram(&sats, &SATURATION_CUTS);
    let bright_hist: [f64; 3] = cut_histogram(&vals, &BRIGHTNESS_CUTS);
    f[IDX_HUE_HIST..IDX_HUE_HIST + HUE_BINS].copy_from_slice(&hue_hist);
    f[IDX_SAT_HIST..IDX_SAT_HIST + 5].copy_from_slice(&sat_hist);
    f[IDX_BRIGHT_HIST..IDX_BRIGHT_HIST + 3].copy_from_slice(&bright_hist);
    f[IDX_ITTEN_CONTRAST..IDX_ITTEN_CONTRAST + 3].copy_from_slice(&[
        mean_std(&hue_hist).1,
        mean_std(&sat_hist).1,
        mean_std(&bright_hist).1,
    ]);

    let gray = img.gray();
    let small = saliency::resize_bilinear(&gray, saliency::SALIENCY_SIZE, saliency::SALIENCY_SIZE);
    let map = spectral_saliency(&small);
    let map_values: Vec<f64> = map.iter().copied().collect();
    let (sal_mean, sal_std) = mean_std(&map_values);
    let sal_max = map_values.iter().cloned().fold(0.0, f64::max);
    f[IDX_SALIENCY..IDX_SALIENCY + 3].copy_from_slice(&[sal_mean, sal_max, sal_std]);
    f[IDX_SALIENT_REGIONS] = salient_regions(&map) as f64;

    f[IDX_SYMMETRY] = symmetry(&gray);

    let q = haralick::quantize(&gray, haralick::LEVELS);
    let hf = haralick_features(&q, haralick::LEVELS)?;
    f[IDX_HARALICK..IDX_HARALICK + 4]
        .copy_from_slice(&[hf.entropy, hf.energy, hf.homogeneity, hf.contrast]);

    f[IDX_COLORFULNESS] = colorfulness(img);
    let fullest = count_hist.iter().copied().max().unwrap_or(0);
    f[IDX_HUE_COUNT] = if fullest == 0 {
        0.0
    } else {
        count_hist
            .iter()
            .filter(|&&c| c as f64 > HUE_COUNT_ALPHA * fullest as f64)
            .count() as f64
    };

    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "feature {} is not finite",
            FEATURE_NAMES[i]
        )));
    }
    Ok(CompositionalFeatures { values: f })
}
