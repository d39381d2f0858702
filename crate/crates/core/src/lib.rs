//! Temporal novelty scoring for streams of design images.
//!
//! Each image is compared against a diagonal Gaussian mixture fitted on the
//! images that preceded it, either through the norm of its Fisher vector or
//! through standardized distances to the mixture means. Tag surprise and
//! point-in-time ego-network features of the author complete the per-image
//! analysis table.
//!
//! Module map:
//!
//! * [`feature_store`] - feature packs on disk, shot and follow input files
//! * [`imgfeat`] - the 47 compositional (aesthetic) image features
//! * [`gmm`] - diagonal-covariance mixtures fitted by EM, model files
//! * [`fisher`] - Fisher vectors, Fisher kernel and the two visual novelty scores
//! * [`tagnov`] - tag-surprise novelty
//! * [`netmet`] - temporal follow graph and network features
//! * [`pipeline`] - rolling-window scoring loop and synthetic corpora
//! * [`stats`] - correlation, Mann-Whitney U, emerging tags, PCA export

pub mod error;
pub mod feature_store;
pub mod fisher;
pub mod gmm;
pub mod imgfeat;
pub mod linalg;
pub mod netmet;
pub mod pipeline;
pub mod stats;
pub mod tagnov;
pub mod time;

pub use error::{Error, Result};
pub use feature_store::{FeaturePack, Follow, ShotRecord};
pub use fisher::{FisherVector, MrfReference, NormStats};
pub use gmm::{FitConfig, GaussianMixture, NoveltyModel};
pub use imgfeat::{CompositionalFeatures, RasterImage};
pub use netmet::{NetworkFeatures, Snapshot, TemporalGraph};
pub use pipeline::{RunConfig, ScoreTable, ShotScores, WindowSchedule};
pub use tagnov::TagLedger;
pub use time::Timestamp;
