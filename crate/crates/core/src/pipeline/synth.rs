//! Seeded synthetic corpora: users joined by preferential attachment, shots
//! with Zipf-distributed tags, and features drawn from a low-rank Gaussian
//! mixture. An optional trend plants a new tag at a given instant; shots
//! carrying it draw their features from a previously unseen cluster.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use std::path::Path;

use crate::error::{Error, Result};
use crate::feature_store::{
    write_follows, write_pack, write_shots, FeaturePack, Follow, ShotRecord, KIND_COMPOSITIONAL,
    KIND_EMBEDDING,
};
use crate::imgfeat::RasterImage;
use crate::time::{Timestamp, SECONDS_PER_DAY};

const BASE_TAGS: [&str; 24] = [
    "ui", "logo", "icon", "illustration", "typography", "web", "mobile", "app", "branding",
    "flat", "dashboard", "landing", "minimal", "poster", "vector", "character", "lettering",
    "pattern", "sketch", "infographic", "badge", "animation", "photo", "print",
];

const LATENT_DIM: usize = 6;
const BASE_CLUSTERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_users: usize,
    pub n_shots: usize,
    pub start: Timestamp,
    pub span_days: i64,
    pub trend_at: Option<Timestamp>,
    pub planted_tag: String,
    /// Probability that a shot after `trend_at` follows the trend.
    pub trend_share: f64,
    pub comp_dim: usize,
    pub embed_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let start = Timestamp::parse("2012-01-01T00:00:00Z").expect("valid literal");
        SynthConfig {
            seed: 7,
            n_users: 60,
            n_shots: 2000,
            start,
            span_days: 3 * 365,
            trend_at: Some(start.add_days(540)),
            planted_tag: "neomorph".into(),
            trend_share: 0.3,
            comp_dim: 47,
            embed_dim: 2048,
        }
    }
}

/// Generator ground truth, in feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub embed_base_centers: Vec<Array1<f64>>,
    pub embed_trend_center: Array1<f64>,
    pub comp_base_centers: Vec<Array1<f64>>,
    pub comp_trend_center: Array1<f64>,
    pub trend_shots: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub shots: Vec<ShotRecord>,
    pub follows: Vec<Follow>,
    pub compositional: FeaturePack,
    pub embedding: FeaturePack,
    pub truth: SynthTruth,
}

/// Low-rank feature space: `x = offset + loadings · z + noise`.
struct Space {
    loadings: Array2<f64>,
    offset: Array1<f64>,
    noise: f64,
}

impl Space {
    fn new(dim: usize, scale: f64, noise: f64, rng: &mut ChaCha8Rng) -> Space {
        let loadings = Array2::from_shape_fn((dim, LATENT_DIM), |_| {
            let v: f64 = StandardNormal.sample(rng);
            v * scale / (LATENT_DIM as f64).sqrt()
        });
        let offset = Array1::from_shape_fn(dim, |_| rng.random_range(0.0..1.0));
        Space {
            loadings,
            offset,
            noise,
        }
    }

    fn center(&self, z: &Array1<f64>) -> Array1<f64> {
        &self.offset + &self.loadings.dot(z)
    }

    fn sample(&self, z: &Array1<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let c = self.center(z);
        c.iter()
            .map(|m| {
                let e: f64 = StandardNormal.sample(rng);
                m + self.noise * e
            })
            .collect()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn latent_point(center: &Array1<f64>, spread: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    center.mapv(|c| {
        let e: f64 = StandardNormal.sample(rng);
        c + spread * e
    })
}

pub fn synth_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.n_shots == 0 {
        return Err(Error::Config("n_shots must be at least 1".into()));
    }
    if cfg.n_users == 0 {
        return Err(Error::Config("n_users must be at least 1".into()));
    }
    if cfg.span_days <= 0 || cfg.comp_dim == 0 || cfg.embed_dim == 0 {
        return Err(Error::Config("span and dimensions must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.trend_share) {
        return Err(Error::Config("trend_share must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let span = cfg.span_days * SECONDS_PER_DAY;
    let width = (cfg.n_users.max(2) - 1).to_string().len();
    let users: Vec<String> = (0..cfg.n_users).map(|i| format!("u{i:0width$}")).collect();

    // users join over the first half of the span; each follows up to three
    // earlier users picked in proportion to followers + 1
    let join: Vec<i64> = (0..cfg.n_users)
        .map(|i| cfg.start.seconds() + (i as i64 * span / 2) / cfg.n_users as i64)
        .collect();
    let mut in_deg = vec![0usize; cfg.n_users];
    let mut follows = Vec::new();
    for i in 1..cfg.n_users {
        let m = i.min(3);
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m {
            let weights: Vec<f64> = (0..i)
                .map(|j| if chosen.contains(&j) { 0.0 } else { in_deg[j] as f64 + 1.0 })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut target = rng.random::<f64>() * total;
            let mut pick = i - 1;
            for (j, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    pick = j;
                    break;
                }
                target -= w;
            }
            if chosen.contains(&pick) {
                pick = (0..i).find(|j| !chosen.contains(j)).expect("m <= i");
            }
            chosen.push(pick);
        }
        for j in chosen {
            let t = join[i] + rng.random_range(0..30 * SECONDS_PER_DAY);
            follows.push(Follow {
                src: users[i].clone(),
                dst: users[j].clone(),
                timestamp: Timestamp(t),
            });
            in_deg[j] += 1;
            if rng.random::<f64>() < 0.3 {
                let back = t + rng.random_range(0..60 * SECONDS_PER_DAY);
                follows.push(Follow {
                    src: users[j].clone(),
                    dst: users[i].clone(),
                    timestamp: Timestamp(back),
                });
                in_deg[i] += 1;
            }
        }
    }
    follows.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.src.cmp(&b.src))
            .then_with(|| a.dst.cmp(&b.dst))
    });

    let base_latent: Vec<Array1<f64>> = (0..BASE_CLUSTERS)
        .map(|_| Array1::from_shape_fn(LATENT_DIM, |_| 3.0 * normal(&mut rng)))
        .collect();
    let mut direction: Array1<f64> = Array1::from_shape_fn(LATENT_DIM, |_| normal(&mut rng));
    direction /= direction.dot(&direction).sqrt();
    let centroid = base_latent.iter().fold(Array1::zeros(LATENT_DIM), |acc, c| acc + c)
        / BASE_CLUSTERS as f64;
    let embed_trend = &centroid + &(direction.clone() * 12.0);
    let comp_trend = &centroid + &(direction * 4.0);

    let embed_space = Space::new(cfg.embed_dim, 1.0, 0.5, &mut rng);
    let comp_space = Space::new(cfg.comp_dim, 0.3, 0.1, &mut rng);

    let author_weights: Vec<f64> = (0..cfg.n_users).map(|i| 1.0 / ((i + 1) as f64).sqrt()).collect();
    let author_total: f64 = author_weights.iter().sum();
    let tag_weights: Vec<f64> = (0..BASE_TAGS.len()).map(|i| 1.0 / (i + 1) as f64).collect();
    let tag_total: f64 = tag_weights.iter().sum();
    let draw = |weights: &[f64], total: f64, rng: &mut ChaCha8Rng| -> usize {
        let mut target = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                return i;
            }
            target -= w;
        }
        weights.len() - 1
    };

    let mut times: Vec<i64> = (0..cfg.n_shots)
        .map(|_| cfg.start.seconds() + rng.random_range(0..span))
        .collect();
    times.sort_unstable();
    let id_width = (cfg.n_shots.max(2) - 1).to_string().len();
    let views_dist = Normal::new(5.0, 1.0).expect("valid parameters");

    let mut shots = Vec::with_capacity(cfg.n_shots);
    let mut comp_rows = Vec::with_capacity(cfg.n_shots);
    let mut embed_rows = Vec::with_capacity(cfg.n_shots);
    let mut trend_shots = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let shot_id = format!("s{k:0id_width$}");
        let author = draw(&author_weights, author_total, &mut rng);
        let trending = cfg.trend_at.is_some_and(|at| t >= at.seconds())
            && rng.random::<f64>() < cfg.trend_share;

        let n_base = if trending {
            rng.random_range(0..=2)
        } else {
            rng.random_range(1..=4)
        };
        let mut tags: Vec<String> = Vec::new();
        if trending {
            tags.push(cfg.planted_tag.clone());
        }
        while tags.len() < n_base + usize::from(trending) {
            let tag = BASE_TAGS[draw(&tag_weights, tag_total, &mut rng)].to_string();
            if !tags.contains(&tag) {
                tags.push(tag);
            }
        }
        tags.shuffle(&mut rng);

        let (embed_center, comp_center) = if trending {
            trend_shots.push(shot_id.clone());
            (embed_trend.clone(), comp_trend.clone())
        } else {
            let c = rng.random_range(0..BASE_CLUSTERS);
            (base_latent[c].clone(), base_latent[c].clone())
        };
        let z_embed = latent_point(&embed_center, 1.0, &mut rng);
        let z_comp = latent_point(&comp_center, 1.0, &mut rng);
        embed_rows.push(embed_space.sample(&z_embed, &mut rng));
        comp_rows.push(comp_space.sample(&z_comp, &mut rng));

        let views = Distribution::<f64>::sample(&views_dist, &mut rng).exp().floor() as u64;
        let likes = (views as f64 * rng.random_range(0.0..0.1)).floor() as u64;
        shots.push(ShotRecord {
            shot_id: shot_id.clone(),
            user_id: users[author].clone(),
            timestamp: Timestamp(t),
            tags,
            likes,
            views,
            media_ref: Some(format!("{shot_id}.png")),
        });
    }

    let ids: Vec<String> = shots.iter().map(|s| s.shot_id.clone()).collect();
    let created = cfg.start.to_rfc3339();
    let mut compositional = FeaturePack::from_rows(ids.clone(), cfg.comp_dim, &comp_rows, KIND_COMPOSITIONAL)?;
    compositional.created = created.clone();
    let mut embedding = FeaturePack::from_rows(ids, cfg.embed_dim, &embed_rows, KIND_EMBEDDING)?;
    embedding.created = created;

    let truth = SynthTruth {
        embed_base_centers: base_latent.iter().map(|z| embed_space.center(z)).collect(),
        embed_trend_center: embed_space.center(&embed_trend),
        comp_base_centers: base_latent.iter().map(|z| comp_space.center(z)).collect(),
        comp_trend_center: comp_space.center(&comp_trend),
        trend_shots,
    };
    Ok(SynthCorpus {
        shots,
        follows,
        compositional,
        embedding,
        truth,
    })
}

pub const SHOTS_FILE: &str = "shots.jsonl";
pub const FOLLOWS_FILE: &str = "follows.csv";
pub const COMP_DIR: &str = "pack-comp";
pub const EMBED_DIR: &str = "pack-embed";

/// Writes shots, follows and both packs under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_shots(&corpus.shots, &dir.join(SHOTS_FILE))?;
    write_follows(&corpus.follows, &dir.join(FOLLOWS_FILE))?;
    write_pack(&corpus.compositional, &dir.join(COMP_DIR))?;
    write_pack(&corpus.embedding, &dir.join(EMBED_DIR))
}

/// A small seeded picture: a two-color gradient with a few rectangles.
pub fn render_image(seed: u64, index: usize, width: u32, height: u32) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..255.0));
    let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..255.0));
    let rects: Vec<(u32, u32, u32, u32, [u8; 3])> = (0..rng.random_range(1..5))
        .map(|_| {
            let x0 = rng.random_range(0..width);
            let y0 = rng.random_range(0..height);
            let x1 = rng.random_range(x0..=width);
            let y1 = rng.random_range(y0..=height);
            (x0, y0, x1, y1, std::array::from_fn(|_| rng.random::<u8>()))
        })
        .collect();
    RasterImage::from_fn(width, height, |x, y| {
        if let Some(r) = rects
            .iter()
            .rev()
            .find(|r| x >= r.0 && x < r.2 && y >= r.1 && y < r.3)
        {
            return r.4;
        }
        let t = x as f64 / width.max(2).saturating_sub(1) as f64;
        std::array::from_fn(|c| (a[c] + (b[c] - a[c]) * t).round() as u8)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_users: 12,
            n_shots: 300,
            embed_dim: 64,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = synth_corpus(&small()).unwrap();
        let b = synth_corpus(&small()).unwrap();
        assert_eq!(a.shots, b.shots);
        assert_eq!(a.follows, b.follows);
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.compositional, b.compositional);
        let c = synth_corpus(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.shots, c.shots);
    }

    #[test]
    fn single_user_has_no_follows() {
        let c = synth_corpus(&SynthConfig {
            n_users: 1,
            ..small()
        })
        .unwrap();
        assert!(c.follows.is_empty());
        assert!(c.shots.iter().all(|s| s.user_id == "u0"));
    }

    #[test]
    fn planted_tag_only_after_trend() {
        let cfg = small();
        let c = synth_corpus(&cfg).unwrap();
        let at = cfg.trend_at.unwrap();
        let planted: Vec<_> = c
            .shots
            .iter()
            .filter(|s| s.tags.contains(&cfg.planted_tag))
            .collect();
        assert!(!planted.is_empty());
        assert!(planted.iter().all(|s| s.timestamp >= at));
        assert_eq!(planted.len(), c.truth.trend_shots.len());
        assert!(c.follows.iter().all(|f| f.src != f.dst));
    }

    #[test]
    fn no_trend_means_no_planted_tag() {
        let c = synth_corpus(&SynthConfig {
            trend_at: None,
            ..small()
        })
        .unwrap();
        assert!(c.truth.trend_shots.is_empty());
        assert!(c.shots.iter().all(|s| !s.tags.iter().any(|t| t == "neomorph")));
    }

    #[test]
    fn zero_shots_is_an_error() {
        assert!(synth_corpus(&SynthConfig {
            n_shots: 0,
            ..small()
        })
        .is_err());
    }
}
