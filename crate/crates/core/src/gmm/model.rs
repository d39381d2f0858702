//! A fitted mixture bundled with its optional PCA projection and training
//! window calibration, plus the `.gmm` file format.
//!
//! The file starts with a text header of `key=value` lines closed by a line
//! reading `data`. Little-endian `f64` blocks follow, in this order:
//! weights (N), means (N·d), variances (N·d); when `pca=1` the projection
//! mean (D), components (d·D), explained variances (d) and total variance (1);
//! when `calibration=1` the FVGMM min/max, the MRF distance means (N) and
//! deviations (N), the FVMRF min/max and the AIC min/max.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{fit_gmm_traced, FitConfig, FitTrace, GaussianMixture};
use crate::error::{Error, Result};
use crate::fisher::{fisher_vector, fvmrf_novelty, Calibration, MrfReference, NormStats};
use crate::linalg::Pca;

const MAGIC: &str = "novelty-gmm";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreMethod {
    Fvgmm,
    Fvmrf,
    Aic,
}

impl FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fvgmm" => Ok(ScoreMethod::Fvgmm),
            "fvmrf" => Ok(ScoreMethod::Fvmrf),
            "aic" => Ok(ScoreMethod::Aic),
            other => Err(Error::Config(format!("unknown scoring method {other:?}"))),
        }
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMethod::Fvgmm => "fvgmm",
            ScoreMethod::Fvmrf => "fvmrf",
            ScoreMethod::Aic => "aic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyModel {
    pub projection: Option<Pca>,
    pub mixture: GaussianMixture,
    pub calibration: Option<Calibration>,
}

/// Fits projection, mixture and calibration on the rows of `window`.
pub fn fit_model(window: ArrayView2<'_, f64>, cfg: &FitConfig) -> Result<(NoveltyModel, FitTrace)> {
    cfg.validate()?;
    if window.nrows() < cfg.n_components {
        return Err(Error::TooFewSamples {
            samples: window.nrows(),
            components: cfg.n_components,
        });
    }
    let projection = match cfg.pca_dim {
        Some(k) if k < window.ncols() => Some(Pca::fit(window, k, cfg.seed)?),
        _ => None,
    };
    let projected;
    let fit_rows = match &projection {
        Some(p) => {
            projected = p.project_rows(window)?;
            projected.view()
        }
        None => window,
    };
    let (mixture, trace) = fit_gmm_traced(fit_rows, cfg)?;
    let calibration = Calibration::estimate(&mixture, fit_rows)?;
    Ok((
        NoveltyModel {
            projection,
            mixture,
            calibration: Some(calibration),
        },
        trace,
    ))
}

impl NoveltyModel {
    pub fn input_dim(&self) -> usize {
        match &self.projection {
            Some(p) => p.input_dim(),
            None => self.mixture.dim(),
        }
    }

    /// Maps a raw feature row into the mixture's space.
    pub fn prepare(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        match &self.projection {
            Some(p) => p.project(x),
            None => {
                if x.len() != self.mixture.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.mixture.dim(),
                        actual: x.len(),
                    });
                }
                Ok(x.to_owned())
            }
        }
    }

    fn calibration(&self) -> Result<&Calibration> {
        self.calibration
            .as_ref()
            .ok_or_else(|| Error::Model("model carries no training-window calibration".into()))
    }

    /// Raw and min-max scaled score of a raw feature row.
    pub fn score(&self, x: ArrayView1<'_, f64>, method: ScoreMethod) -> Result<(f64, f64)> {
        let cal = self.calibration()?;
        let z = self.prepare(x)?;
        let (raw, stats) = match method {
            ScoreMethod::Fvgmm => (fisher_vector(&self.mixture, z.view())?.norm(), &cal.fvgmm),
            ScoreMethod::Fvmrf => (fvmrf_novelty(&cal.mrf, z.view())?.1, &cal.fvmrf),
            ScoreMethod::Aic => (self.mixture.aic_per_image(z.view())?, &cal.aic),
        };
        Ok((raw, stats.scale(raw)))
    }
}

pub fn write_model(model: &NoveltyModel, path: &Path) -> Result<()> {
    let gm = &model.mixture;
    let mut header = format!(
        "{MAGIC} {VERSION}\ncomponents={}\ndim={}\ninput_dim={}\npca={}\ncalibration={}\ndata\n",
        gm.n_components(),
        gm.dim(),
        model.input_dim(),
        u8::from(model.projection.is_some()),
        u8::from(model.calibration.is_some()),
    )
    .into_bytes();

    let mut blob: Vec<f64> = Vec::new();
    blob.extend_from_slice(gm.weights());
    blob.extend(gm.means().iter());
    blob.extend(gm.variances().iter());
    if let Some(p) = &model.projection {
        blob.extend(p.mean.iter());
        blob.extend(p.components.iter());
        blob.extend(p.explained_variance.iter());
        blob.push(p.total_variance);
    }
    if let Some(c) = &model.calibration {
        blob.extend([c.fvgmm.min, c.fvgmm.max]);
        blob.extend(c.mrf.mean_dist.iter());
        blob.extend(c.mrf.std_dist.iter());
        blob.extend([c.fvmrf.min, c.fvmrf.max, c.aic.min, c.aic.max]);
    }
    for v in blob {
        header.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&header).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, count: usize) -> Result<Vec<f64>> {
        let end = self.pos + count * 8;
        if end > self.bytes.len() {
            return Err(Error::Model(format!(
                "truncated data block: need {end} bytes, have {}",
                self.bytes.len()
            )));
        }
        let out = self.bytes[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        self.pos = end;
        Ok(out)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let v = self.take(rows * cols)?;
        Array2::from_shape_vec((rows, cols), v).map_err(|e| Error::Model(e.to_string()))
    }
}

pub fn read_model(path: &Path) -> Result<NoveltyModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Model("header is not terminated by a data line".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::Model("header is not UTF-8".into()))?
            .trim()
            .to_string();
        pos += nl + 1;
        if line == "data" {
            break;
        }
        lines.push(line);
    }
    let first = lines.first().ok_or_else(|| Error::Model("empty header".into()))?;
    let version = first
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::Model(format!("bad magic line {first:?}")))?;
    if version != VERSION.to_string() {
        return Err(Error::Model(format!("unsupported version {version}")));
    }
    let field = |key: &str| -> Result<usize> {
        lines
            .iter()
            .find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
            .ok_or_else(|| Error::Model(format!("missing {key}")))?
            .parse()
            .map_err(|_| Error::Model(format!("bad {key}")))
    };
    let n = field("components")?;
    let d = field("dim")?;
    let input_dim = field("input_dim")?;
    let has_pca = field("pca")? == 1;
    let has_cal = field("calibration")? == 1;

    let mut r = Reader { bytes: &bytes, pos };
    let weights = r.take(n)?;
    let means = r.matrix(n, d)?;
    let variances = r.matrix(n, d)?;
    let mixture = GaussianMixture::new(weights, means, variances)?;
    let projection = if has_pca {
        let mean = Array1::from(r.take(input_dim)?);
        let components = r.matrix(d, input_dim)?;
        let explained_variance = r.take(d)?;
        let total_variance = r.take(1)?[0];
        Some(Pca {
            mean,
            components,
            explained_variance,
            total_variance,
        })
    } else {
        if input_dim != d {
            return Err(Error::Model("input_dim differs from dim without a projection".into()));
        }
        None
    };
    let calibration = if has_cal {
        let fv = r.take(2)?;
        let mean_dist = r.take(n)?;
        let std_dist = r.take(n)?;
        let tail = r.take(4)?;
        Some(Calibration {
            fvgmm: NormStats { min: fv[0], max: fv[1] },
            mrf: MrfReference::new(mixture.means().clone(), mean_dist, std_dist)?,
            fvmrf: NormStats { min: tail[0], max: tail[1] },
            aic: NormStats { min: tail[2], max: tail[3] },
        })
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::Model(format!(
            "{} trailing bytes after data blocks",
            bytes.len() - r.pos
        )));
    }
    Ok(NoveltyModel {
        projection,
        mixture,
        calibration,
    })
}
