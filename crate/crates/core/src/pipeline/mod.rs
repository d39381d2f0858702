//! The temporal scoring loop.
//!
//! Shots are ordered by `(timestamp, shot_id)`. Tag novelty is a single fold
//! over that order, network features come from the follow graph as it stood
//! just before each shot, and visual novelty is scored window by window
//! against models fitted on the preceding training year.

pub mod schedule;
pub mod synth;
mod table;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::{sort_shots, FeaturePack, Follow, ShotRecord};
use crate::gmm::{fit_model, FitConfig, NoveltyModel, ScoreMethod};
use crate::netmet::{NetworkFeatures, TemporalGraph};
use crate::tagnov::score_corpus;
use crate::time::Timestamp;

pub use schedule::{build_schedule, build_schedule_with, Window, WindowSchedule};
pub use table::{ScoreTable, ShotScores, VisualScores, SCORE_COLUMNS};

/// Everything `run` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train_days: i64,
    pub score_days: i64,
    /// Drop users with fewer shots than this before anything else (0 keeps all).
    pub min_user_shots: usize,
    pub compositional: FitConfig,
    pub embedding: FitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train_days: schedule::TRAIN_DAYS,
            score_days: schedule::SCORE_DAYS,
            min_user_shots: 0,
            compositional: FitConfig::default(),
            embedding: FitConfig {
                pca_dim: Some(64),
                ..FitConfig::default()
            },
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.compositional.seed = seed;
        self.embedding.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_days <= 0 || self.score_days <= 0 {
            return Err(Error::Config("train_days and score_days must be positive".into()));
        }
        self.compositional.validate()?;
        self.embedding.validate()
    }
}

/// Fit outcome of one feature kind in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct KindReport {
    pub kind: &'static str,
    pub n_train: usize,
    /// Latest training timestamp; always before the window's `score_start`.
    pub latest_train: Option<Timestamp>,
    pub skipped: bool,
    pub converged: bool,
    pub rescues: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub window: Window,
    pub n_scored: usize,
    pub kinds: Vec<KindReport>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub table: ScoreTable,
    pub warnings: Vec<String>,
    /// Shots absent from at least one supplied pack; they are not scored.
    pub missing: Vec<String>,
    pub windows: Vec<WindowReport>,
}

/// Per-shot context that does not depend on the visual models.
struct Context {
    tagnov: (f64, f64),
    network: NetworkFeatures,
    days_active: f64,
    n_prev_shots: usize,
}

fn shot_context(shots: &[ShotRecord], follows: &[Follow]) -> Result<Vec<Context>> {
    let tags = score_corpus(shots);
    let graph = TemporalGraph::from_follows(follows)?;
    let mut cursor = graph.cursor();
    let mut first_seen: HashMap<&str, Timestamp> = HashMap::new();
    let mut prev: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(shots.len());
    for (shot, tagnov) in shots.iter().zip(tags) {
        let snap = cursor.advance_to(shot.timestamp);
        let network = snap
            .node(&shot.user_id)
            .map(|u| snap.features_at(u))
            .unwrap_or_default();
        let first = *first_seen.entry(&shot.user_id).or_insert(shot.timestamp);
        let count = prev.entry(&shot.user_id).or_insert(0);
        out.push(Context {
            tagnov,
            network,
            days_active: shot.timestamp.days_since(first),
            n_prev_shots: *count,
        });
        *count += 1;
    }
    Ok(out)
}

struct Kind<'a> {
    name: &'static str,
    pack: &'a FeaturePack,
    index: HashMap<&'a str, usize>,
    cfg: &'a FitConfig,
}

fn score_row(model: &NoveltyModel, row: ndarray::ArrayView1<'_, f64>) -> Result<VisualScores> {
    let (fvgmm_raw, fvgmm) = model.score(row, ScoreMethod::Fvgmm)?;
    let (fvmrf, _) = model.score(row, ScoreMethod::Fvmrf)?;
    let (aic, _) = model.score(row, ScoreMethod::Aic)?;
    Ok(VisualScores {
        fvgmm_raw,
        fvgmm,
        fvmrf,
        aic,
    })
}

/// Scores a corpus. Output is identical for any rayon pool size.
pub fn run(
    shots: &[ShotRecord],
    follows: &[Follow],
    comp: Option<&FeaturePack>,
    embed: Option<&FeaturePack>,
    cfg: &RunConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    let mut shots = shots.to_vec();
    sort_shots(&mut shots);
    if cfg.min_user_shots > 0 {
        let mut per_user: HashMap<String, usize> = HashMap::new();
        for s in &shots {
            *per_user.entry(s.user_id.clone()).or_insert(0) += 1;
        }
        shots.retain(|s| per_user[&s.user_id] >= cfg.min_user_shots);
    }
    let mut out = RunOutput::default();
    let (Some(first), Some(last)) = (shots.first(), shots.last()) else {
        out.warnings.push("corpus is empty".into());
        return Ok(out);
    };
    let schedule = build_schedule_with(first.timestamp, last.timestamp, cfg.train_days, cfg.score_days);
    if let Some(w) = &schedule.warning {
        warn!("{w}");
        out.warnings.push(w.clone());
    }
    let context = shot_context(&shots, follows)?;

    let mut kinds = Vec::new();
    for (name, pack, fit) in [
        ("compositional", comp, &cfg.compositional),
        ("embedding", embed, &cfg.embedding),
    ] {
        if let Some(pack) = pack {
            kinds.push(Kind {
                name,
                pack,
                index: pack.index(),
                cfg: fit,
            });
        }
    }
    let mut missing = HashSet::new();
    for s in &shots {
        if kinds.iter().any(|k| !k.index.contains_key(s.shot_id.as_str())) {
            missing.insert(s.shot_id.as_str());
        }
    }
    out.missing = shots
        .iter()
        .filter(|s| missing.contains(s.shot_id.as_str()))
        .map(|s| s.shot_id.clone())
        .collect();
    if !out.missing.is_empty() {
        let w = format!("{} shots are missing from a feature pack and were excluded", out.missing.len());
        warn!("{w}");
        out.warnings.push(w);
    }
    let usable: Vec<usize> = (0..shots.len())
        .filter(|&i| !missing.contains(shots[i].shot_id.as_str()))
        .collect();

    for (wi, window) in schedule.windows.iter().enumerate() {
        let scored: Vec<usize> = usable
            .iter()
            .copied()
            .filter(|&i| window.scores(shots[i].timestamp))
            .collect();
        let train: Vec<usize> = usable
            .iter()
            .copied()
            .filter(|&i| window.trains_on(shots[i].timestamp))
            .collect();
        let mut visual: Vec<Vec<Option<VisualScores>>> = Vec::new();
        let mut reports = Vec::new();
        for kind in &kinds {
            let mut report = KindReport {
                kind: kind.name,
                n_train: train.len(),
                latest_train: train.last().map(|&i| shots[i].timestamp),
                skipped: true,
                converged: false,
                rescues: 0,
            };
            if train.len() < kind.cfg.n_components || scored.is_empty() {
                if !scored.is_empty() {
                    let w = format!(
                        "window {wi}: {} training rows for {} components; {} scores skipped",
                        train.len(),
                        kind.cfg.n_components,
                        kind.name
                    );
                    warn!("{w}");
                    out.warnings.push(w);
                }
                visual.push(vec![None; scored.len()]);
                reports.push(report);
                continue;
            }
            let rows = Array2::from_shape_fn((train.len(), kind.pack.dim()), |(r, c)| {
                kind.pack.data[[kind.index[shots[train[r]].shot_id.as_str()], c]] as f64
            });
            let (model, trace) = fit_model(rows.view(), kind.cfg)?;
            report.skipped = false;
            report.converged = trace.converged;
            report.rescues = trace.rescues.len();
            let scores = scored
                .par_iter()
                .map(|&i| {
                    let row = kind.pack.row_f64(kind.index[shots[i].shot_id.as_str()]);
                    score_row(&model, ndarray::ArrayView1::from(&row[..])).map(Some)
                })
                .collect::<Result<Vec<_>>>()?;
            visual.push(scores);
            reports.push(report);
        }
        info!(
            "window {wi}: trained on {} shots, scored {}",
            train.len(),
            scored.len()
        );
        for (j, &i) in scored.iter().enumerate() {
            let s = &shots[i];
            let ctx = &context[i];
            let pick = |name: &str| {
                kinds
                    .iter()
                    .position(|k| k.name == name)
                    .and_then(|p| visual[p][j])
            };
            out.table.rows.push(ShotScores {
                shot_id: s.shot_id.clone(),
                user_id: s.user_id.clone(),
                timestamp: s.timestamp,
                likes: s.likes,
                views: s.views,
                window: wi,
                tagnov_raw: ctx.tagnov.0,
                tagnov: ctx.tagnov.1,
                compositional: pick("compositional"),
                embedding: pick("embedding"),
                network: ctx.network,
                days_active: ctx.days_active,
                n_prev_shots: ctx.n_prev_shots,
            });
        }
        out.windows.push(WindowReport {
            window: *window,
            n_scored: scored.len(),
            kinds: reports,
        });
    }
    Ok(out)
}
