//! The per-shot score table and its CSV form.

use std::path::Path;

use crate::error::{Error, Result};
use crate::netmet::NetworkFeatures;
use crate::time::Timestamp;

/// Visual novelty scores of one shot under one feature kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualScores {
    pub fvgmm_raw: f64,
    pub fvgmm: f64,
    pub fvmrf: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotScores {
    pub shot_id: String,
    pub user_id: String,
    pub timestamp: Timestamp,
    pub likes: u64,
    pub views: u64,
    pub window: usize,
    pub tagnov_raw: f64,
    pub tagnov: f64,
    pub compositional: Option<VisualScores>,
    pub embedding: Option<VisualScores>,
    pub network: NetworkFeatures,
    pub days_active: f64,
    pub n_prev_shots: usize,
}

pub const SCORE_COLUMNS: [&str; 23] = [
    "shot_id",
    "user_id",
    "timestamp",
    "likes",
    "views",
    "window",
    "tagnov_raw",
    "tagnov",
    "comp_fvgmm_raw",
    "comp_fvgmm",
    "comp_fvmrf",
    "comp_aic",
    "incep_fvgmm_raw",
    "incep_fvgmm",
    "incep_fvmrf",
    "incep_aic",
    "in_deg",
    "out_deg",
    "closeness",
    "constraint",
    "density",
    "days_active",
    "n_prev_shots",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ShotScores>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ShotScores {
    fn record(&self) -> Vec<String> {
        let c = self.compositional;
        let e = self.embedding;
        vec![
            self.shot_id.clone(),
            self.user_id.clone(),
            self.timestamp.to_rfc3339(),
            self.likes.to_string(),
            self.views.to_string(),
            self.window.to_string(),
            self.tagnov_raw.to_string(),
            self.tagnov.to_string(),
            opt(c.map(|v| v.fvgmm_raw)),
            opt(c.map(|v| v.fvgmm)),
            opt(c.map(|v| v.fvmrf)),
            opt(c.map(|v| v.aic)),
            opt(e.map(|v| v.fvgmm_raw)),
            opt(e.map(|v| v.fvgmm)),
            opt(e.map(|v| v.fvmrf)),
            opt(e.map(|v| v.aic)),
            self.network.in_degree.to_string(),
            self.network.out_degree.to_string(),
            self.network.closeness.to_string(),
            self.network.constraint.to_string(),
            self.network.density.to_string(),
            self.days_active.to_string(),
            self.n_prev_shots.to_string(),
        ]
    }

    /// Value of a numeric column by its CSV name.
    pub fn column(&self, name: &str) -> Option<f64> {
        let c = self.compositional;
        let e = self.embedding;
        match name {
            "likes" => Some(self.likes as f64),
            "views" => Some(self.views as f64),
            "log_likes" => Some((self.likes as f64).ln_1p()),
            "log_views" => Some((self.views as f64).ln_1p()),
            "tagnov_raw" => Some(self.tagnov_raw),
            "tagnov" => Some(self.tagnov),
            "comp_fvgmm_raw" => c.map(|v| v.fvgmm_raw),
            "comp_fvgmm" => c.map(|v| v.fvgmm),
            "comp_fvmrf" => c.map(|v| v.fvmrf),
            "comp_aic" => c.map(|v| v.aic),
            "incep_fvgmm_raw" => e.map(|v| v.fvgmm_raw),
            "incep_fvgmm" => e.map(|v| v.fvgmm),
            "incep_fvmrf" => e.map(|v| v.fvmrf),
            "incep_aic" => e.map(|v| v.aic),
            "in_deg" => Some(self.network.in_degree as f64),
            "log_in_deg" => Some((self.network.in_degree as f64).ln_1p()),
            "out_deg" => Some(self.network.out_degree as f64),
            "closeness" => Some(self.network.closeness),
            "constraint" => Some(self.network.constraint),
            "density" => Some(self.network.density),
            "days_active" => Some(self.days_active),
            "log_days_active" => Some(self.days_active.ln_1p()),
            "n_prev_shots" => Some(self.n_prev_shots as f64),
            _ => None,
        }
    }
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SCORE_COLUMNS)?;
        for row in &self.rows {
            w.write_record(row.record())?;
        }
        w.into_inner()
            .map_err(|e| Error::Validation(format!("csv flush: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<ScoreTable> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().ne(SCORE_COLUMNS.iter().copied()) {
            return Err(Error::parse(path, 1, "unexpected score table header"));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let num = |k: usize| -> Result<f64> {
                field(k).parse::<f64>().map_err(|_| {
                    Error::parse(path, line, format!("bad {} value {:?}", SCORE_COLUMNS[k], field(k)))
                })
            };
            let int = |k: usize| -> Result<u64> {
                field(k).parse::<u64>().map_err(|_| {
                    Error::parse(path, line, format!("bad {} value {:?}", SCORE_COLUMNS[k], field(k)))
                })
            };
            let visual = |k: usize| -> Result<Option<VisualScores>> {
                if (k..k + 4).all(|j| field(j).is_empty()) {
                    return Ok(None);
                }
                Ok(Some(VisualScores {
                    fvgmm_raw: num(k)?,
                    fvgmm: num(k + 1)?,
                    fvmrf: num(k + 2)?,
                    aic: num(k + 3)?,
                }))
            };
            rows.push(ShotScores {
                shot_id: field(0).to_string(),
                user_id: field(1).to_string(),
                timestamp: Timestamp::parse(field(2))
                    .ok_or_else(|| Error::parse(path, line, "bad timestamp"))?,
                likes: int(3)?,
                views: int(4)?,
                window: int(5)? as usize,
                tagnov_raw: num(6)?,
                tagnov: num(7)?,
                compositional: visual(8)?,
                embedding: visual(12)?,
                network: NetworkFeatures {
                    in_degree: int(16)? as usize,
                    out_degree: int(17)? as usize,
                    closeness: num(18)?,
                    constraint: num(19)?,
                    density: num(20)?,
                },
                days_active: num(21)?,
                n_prev_shots: int(22)? as usize,
            });
        }
        Ok(ScoreTable { rows })
    }
}
