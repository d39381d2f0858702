//! `novelty`: ingest features, fit mixtures, score shots and analyse the
//! resulting novelty table.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "novelty", version, about = "Temporal visual and tag novelty scoring")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (-v info, -vv debug). RUST_LOG takes precedence.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the 47 compositional features of every shot's image.
    ExtractCompositional(ExtractArgs),
    /// Validate an externally produced embedding pack and copy it.
    IngestEmbeddings(IngestArgs),
    /// Fit a mixture model on a pack.
    Fit(FitArgs),
    /// Score a pack against a fitted model.
    Score(ScoreArgs),
    /// Tag novelty of every shot.
    TagNovelty(TagNoveltyArgs),
    /// Network features of every shot's author at posting time.
    NetMetrics(NetMetricsArgs),
    /// The full rolling-window scoring pipeline.
    Run(RunArgs),
    /// Pearson correlation matrix of score columns.
    Correlate(CorrelateArgs),
    /// Find emerging tags and compare their early and late novelty.
    ValidateEmerging(ValidateArgs),
    /// Regression-ready table.
    Export(ExportArgs),
    /// 2-D principal component coordinates of a pack.
    Pca(PcaArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub shots: PathBuf,
    /// Directory that `media_ref` paths are relative to.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Value of the pack's `created` field (default: now).
    #[arg(long)]
    pub created: Option<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub pack: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Required dimension.
    #[arg(long, default_value_t = 2048)]
    pub dim: usize,
    /// Report shots missing from the pack.
    #[arg(long)]
    pub shots: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub pack: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with FitConfig keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub pca_dim: Option<usize>,
    /// Restrict training to shots in [from, until); needs --shots.
    #[arg(long, requires = "shots")]
    pub from: Option<String>,
    #[arg(long, requires = "shots")]
    pub until: Option<String>,
    #[arg(long)]
    pub shots: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub pack: PathBuf,
    #[arg(long, default_value = "fvgmm", value_parser = ["fvgmm", "fvmrf", "aic"])]
    pub method: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagNoveltyArgs {
    #[arg(long)]
    pub shots: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NetMetricsArgs {
    #[arg(long)]
    pub follows: PathBuf,
    /// Per-shot features at each shot's timestamp.
    #[arg(long, conflicts_with = "at")]
    pub shots: Option<PathBuf>,
    /// Per-user features of the snapshot at this instant.
    #[arg(long)]
    pub at: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub shots: PathBuf,
    #[arg(long)]
    pub follows: Option<PathBuf>,
    #[arg(long)]
    pub pack_comp: Option<PathBuf>,
    #[arg(long)]
    pub pack_embed: Option<PathBuf>,
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_days: Option<i64>,
    #[arg(long)]
    pub score_days: Option<i64>,
    #[arg(long)]
    pub min_user_shots: Option<usize>,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated column names.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub shots: PathBuf,
    /// Tags first used after this date qualify. A bare date means its end.
    #[arg(long, default_value = "2013-12-31")]
    pub cutoff: String,
    #[arg(long, default_value_t = 200)]
    pub topk: usize,
    #[arg(long, default_value_t = 0.10)]
    pub frac: f64,
    /// Test this tag instead of the detected ones.
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub pack: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n_shots: usize,
    #[arg(long, default_value_t = 60)]
    pub n_users: usize,
    #[arg(long, default_value_t = 1095)]
    pub span_days: i64,
    #[arg(long, default_value_t = 2048)]
    pub embed_dim: usize,
    /// When the planted trend starts (default: 540 days in).
    #[arg(long, conflicts_with = "no_trend")]
    pub trend_at: Option<String>,
    #[arg(long)]
    pub no_trend: bool,
    /// Also render PNGs for the first N shots into <out>/images.
    #[arg(long, default_value_t = 0)]
    pub images: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
