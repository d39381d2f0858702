use std::fs;
use std::io::Write;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use novelty_core::error::{Error, Result};
use novelty_core::feature_store::{
    load_follows, load_shots, read_pack, write_pack, FeaturePack, ShotRecord, KIND_COMPOSITIONAL,
    KIND_EMBEDDING,
};
use novelty_core::gmm::{fit_model, read_model, write_model, FitConfig, ScoreMethod};
use novelty_core::imgfeat::{extract_compositional, N_FEATURES};
use novelty_core::netmet::TemporalGraph;
use novelty_core::pipeline::synth::{render_image, synth_corpus, write_corpus, SynthConfig};
use novelty_core::pipeline::{run, RunConfig};
use novelty_core::stats::{
    correlation_matrix, early_late_test, emerging_tags, export_analysis_table, pca2d,
    write_correlations, write_projection, CORRELATION_COLUMNS,
};
use novelty_core::tagnov::score_corpus;
use novelty_core::{RasterImage, ScoreTable, Timestamp};

use crate::{Cli, Command};

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::ExtractCompositional(a) => extract(a),
        Command::IngestEmbeddings(a) => ingest(a),
        Command::Fit(a) => fit(a, cli.seed),
        Command::Score(a) => score(a),
        Command::TagNovelty(a) => tag_novelty(a),
        Command::NetMetrics(a) => net_metrics(a),
        Command::Run(a) => run_pipeline(a, cli.seed),
        Command::Correlate(a) => correlate(a),
        Command::ValidateEmerging(a) => validate(a),
        Command::Export(a) => export_analysis_table(&ScoreTable::read_csv(&a.scores)?, &a.out),
        Command::Pca(a) => pca(a, cli.seed),
        Command::Synth(a) => synth(a, cli.seed),
    }
}

fn parse_time(s: &str) -> Result<Timestamp> {
    Timestamp::parse(s).ok_or_else(|| Error::Config(format!("cannot parse time {s:?}")))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn extract(a: &crate::ExtractArgs) -> Result<()> {
    let shots = load_shots(&a.shots)?;
    let results: Vec<(String, Result<Vec<f64>>)> = shots
        .par_iter()
        .map(|s| {
            let rel = s.media_ref.clone().unwrap_or_else(|| s.shot_id.clone());
            let features = RasterImage::open(&a.images.join(rel))
                .and_then(|img| extract_compositional(&img))
                .map(|f| f.to_vec());
            (s.shot_id.clone(), features)
        })
        .collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut skipped = String::new();
    for (id, r) in results {
        match r {
            Ok(row) => {
                ids.push(id);
                rows.push(row);
            }
            Err(e) => {
                info!("skipping {id}: {e}");
                skipped.push_str(&format!("{id}\t{e}\n"));
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::Validation("no image could be processed".into()));
    }
    let mut pack = FeaturePack::from_rows(ids, N_FEATURES, &rows, KIND_COMPOSITIONAL)?;
    if let Some(c) = &a.created {
        pack.created = c.clone();
    }
    write_pack(&pack, &a.out)?;
    let sidecar = a.out.join("skipped.tsv");
    fs::write(&sidecar, &skipped).map_err(|e| Error::io(&sidecar, e))?;
    println!(
        "extracted {} shots, skipped {}",
        pack.len(),
        skipped.lines().count()
    );
    Ok(())
}

fn ingest(a: &crate::IngestArgs) -> Result<()> {
    let pack = read_pack(&a.pack)?;
    if pack.dim() != a.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            actual: pack.dim(),
        });
    }
    if !pack.kind.is_empty() && pack.kind != KIND_EMBEDDING {
        warn!("pack kind is {:?}, expected {KIND_EMBEDDING:?}", pack.kind);
    }
    if let Some(path) = &a.shots {
        let shots = load_shots(path)?;
        let index = pack.index();
        let missing: Vec<&str> = shots
            .iter()
            .map(|s| s.shot_id.as_str())
            .filter(|id| !index.contains_key(id))
            .collect();
        for id in &missing {
            println!("missing\t{id}");
        }
        if !missing.is_empty() {
            warn!("{} shots have no embedding", missing.len());
        }
    }
    write_pack(&pack, &a.out)?;
    println!("ingested {} rows of dimension {}", pack.len(), pack.dim());
    Ok(())
}

fn fit(a: &crate::FitArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<FitConfig>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => FitConfig::default(),
    };
    if let Some(n) = a.components {
        cfg.n_components = n;
    }
    if a.pca_dim.is_some() {
        cfg.pca_dim = a.pca_dim;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let pack = read_pack(&a.pack)?;
    let data = match &a.shots {
        Some(path) => {
            let shots = load_shots(path)?;
            let from = a.from.as_deref().map(parse_time).transpose()?;
            let until = a.until.as_deref().map(parse_time).transpose()?;
            let keep: std::collections::HashSet<&str> = shots
                .iter()
                .filter(|s| {
                    from.map_or(true, |t| s.timestamp >= t) && until.map_or(true, |t| s.timestamp < t)
                })
                .map(|s| s.shot_id.as_str())
                .collect();
            let (ids, rows): (Vec<String>, Vec<Vec<f64>>) = (0..pack.len())
                .filter(|&i| keep.contains(pack.ids[i].as_str()))
                .map(|i| (pack.ids[i].clone(), pack.row_f64(i)))
                .unzip();
            if ids.is_empty() {
                return Err(Error::Validation("no pack rows fall in the training range".into()));
            }
            FeaturePack::from_rows(ids, pack.dim(), &rows, pack.kind.clone())?.to_f64()
        }
        None => pack.to_f64(),
    };
    let (model, trace) = fit_model(data.view(), &cfg)?;
    write_model(&model, &a.out)?;
    println!(
        "fitted {} components on {} rows: {} iterations, converged={}, rescues={}",
        model.mixture.n_components(),
        data.nrows(),
        trace.log_likelihoods.len(),
        trace.converged,
        trace.rescues.len()
    );
    Ok(())
}

fn score(a: &crate::ScoreArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let method: ScoreMethod = a.method.parse()?;
    let pack = read_pack(&a.pack)?;
    let data = pack.to_f64();
    let scores = (0..pack.len())
        .into_par_iter()
        .map(|i| model.score(data.row(i), method))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv_writer(&a.out)?;
    w.write_record(["shot_id", "raw", "scaled"])?;
    for (id, (raw, scaled)) in pack.ids.iter().zip(scores) {
        w.write_record([id.clone(), raw.to_string(), scaled.to_string()])?;
    }
    finish(w, &a.out)
}

fn tag_novelty(a: &crate::TagNoveltyArgs) -> Result<()> {
    let shots = load_shots(&a.shots)?;
    let scores = score_corpus(&shots);
    let mut w = csv_writer(&a.out)?;
    w.write_record(["shot_id", "timestamp", "raw", "normalized"])?;
    for (s, (raw, norm)) in shots.iter().zip(scores) {
        w.write_record([
            s.shot_id.clone(),
            s.timestamp.to_rfc3339(),
            raw.to_string(),
            norm.to_string(),
        ])?;
    }
    finish(w, &a.out)
}

const NET_COLUMNS: [&str; 5] = ["in_deg", "out_deg", "closeness", "constraint", "density"];

fn net_metrics(a: &crate::NetMetricsArgs) -> Result<()> {
    let graph = TemporalGraph::from_follows(&load_follows(&a.follows)?)?;
    let mut w = csv_writer(&a.out)?;
    let push = |w: &mut csv::Writer<fs::File>, lead: Vec<String>, f: novelty_core::NetworkFeatures| {
        let mut rec = lead;
        rec.extend([
            f.in_degree.to_string(),
            f.out_degree.to_string(),
            f.closeness.to_string(),
            f.constraint.to_string(),
            f.density.to_string(),
        ]);
        w.write_record(&rec)
    };
    match (&a.shots, &a.at) {
        (Some(path), _) => {
            let shots: Vec<ShotRecord> = load_shots(path)?;
            let mut header = vec!["shot_id", "user_id", "timestamp"];
            header.extend(NET_COLUMNS);
            w.write_record(&header)?;
            let mut cursor = graph.cursor();
            for s in &shots {
                let snap = cursor.advance_to(s.timestamp);
                let f = snap
                    .node(&s.user_id)
                    .map(|u| snap.features_at(u))
                    .unwrap_or_default();
                push(
                    &mut w,
                    vec![s.shot_id.clone(), s.user_id.clone(), s.timestamp.to_rfc3339()],
                    f,
                )?;
            }
        }
        (None, Some(at)) => {
            let snap = graph.snapshot_at(parse_time(at)?);
            let mut header = vec!["user_id"];
            header.extend(NET_COLUMNS);
            w.write_record(&header)?;
            let mut users: Vec<&String> = graph.nodes().iter().collect();
            users.sort();
            for user in users {
                let f = snap.node(user).map(|u| snap.features_at(u)).unwrap_or_default();
                push(&mut w, vec![user.clone()], f)?;
            }
        }
        (None, None) => {
            return Err(Error::Config("net-metrics needs --shots or --at".into()));
        }
    }
    finish(w, &a.out)
}

fn run_pipeline(a: &crate::RunArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(d) = a.train_days {
        cfg.train_days = d;
    }
    if let Some(d) = a.score_days {
        cfg.score_days = d;
    }
    if let Some(m) = a.min_user_shots {
        cfg.min_user_shots = m;
    }
    if let Some(n) = a.components {
        cfg.compositional.n_components = n;
        cfg.embedding.n_components = n;
    }
    cfg.validate()?;
    if a.pack_comp.is_none() && a.pack_embed.is_none() {
        warn!("no feature pack given; only tag and network columns are filled");
    }
    let shots = load_shots(&a.shots)?;
    let follows = match &a.follows {
        Some(p) => load_follows(p)?,
        None => Vec::new(),
    };
    let comp = a.pack_comp.as_deref().map(read_pack).transpose()?;
    let embed = a.pack_embed.as_deref().map(read_pack).transpose()?;
    let out = run(&shots, &follows, comp.as_ref(), embed.as_ref(), &cfg)?;
    out.table.write_csv(&a.out)?;
    for id in &out.missing {
        info!("not in every pack: {id}");
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "scored {} of {} shots in {} windows",
        out.table.len(),
        shots.len(),
        out.windows.len()
    );
    Ok(())
}

fn correlate(a: &crate::CorrelateArgs) -> Result<()> {
    let table = ScoreTable::read_csv(&a.scores)?;
    let columns: Vec<&str> = match &a.columns {
        Some(c) => c.iter().map(String::as_str).collect(),
        None => CORRELATION_COLUMNS.to_vec(),
    };
    let m = correlation_matrix(&table, &columns);
    if m.n_rows < 2 {
        warn!("only {} complete rows; correlations are undefined", m.n_rows);
    }
    write_correlations(&m, &a.out)
}

/// A bare date cutoff covers that whole day.
fn parse_cutoff(s: &str) -> Result<Timestamp> {
    let t = parse_time(s)?;
    if s.trim().len() == 10 {
        return Ok(Timestamp(t.add_days(1).seconds() - 1));
    }
    Ok(t)
}

fn validate(a: &crate::ValidateArgs) -> Result<()> {
    let table = ScoreTable::read_csv(&a.scores)?;
    let shots = load_shots(&a.shots)?;
    let tags = match &a.tag {
        Some(t) => vec![t.clone()],
        None => emerging_tags(&shots, parse_cutoff(&a.cutoff)?, a.topk),
    };
    if tags.is_empty() {
        println!("no emerging tags");
        return Ok(());
    }
    let mut lines = vec!["tag,column,n_early,n_late,early_mean,late_mean,u,p".to_string()];
    for tag in &tags {
        match early_late_test(&table, &shots, tag, a.frac) {
            Ok(report) => {
                for c in &report.columns {
                    lines.push(format!(
                        "{},{},{},{},{},{},{},{}",
                        tag, c.column, c.n_early, c.n_late, c.early_mean, c.late_mean, c.test.u, c.test.p
                    ));
                }
            }
            Err(e) if a.tag.is_none() => warn!("{tag}: {e}"),
            Err(e) => return Err(e),
        }
    }
    let text = lines.join("\n") + "\n";
    match &a.out {
        Some(path) => fs::write(path, &text).map_err(|e| Error::io(path, e))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e))?,
    }
    Ok(())
}

fn pca(a: &crate::PcaArgs, seed: Option<u64>) -> Result<()> {
    let pack = read_pack(&a.pack)?;
    let p = pca2d(&pack, seed.unwrap_or(0))?;
    if let Some(w) = &p.warning {
        eprintln!("warning: {w}");
    }
    write_projection(&p, &a.out)?;
    println!(
        "explained variance: {:.4} {:.4}",
        p.explained_ratio[0], p.explained_ratio[1]
    );
    Ok(())
}

fn synth(a: &crate::SynthArgs, seed: Option<u64>) -> Result<()> {
    let defaults = SynthConfig::default();
    let trend_at = if a.no_trend {
        None
    } else {
        match &a.trend_at {
            Some(t) => Some(parse_time(t)?),
            None => defaults.trend_at,
        }
    };
    let cfg = SynthConfig {
        seed: seed.unwrap_or(defaults.seed),
        n_users: a.n_users,
        n_shots: a.n_shots,
        span_days: a.span_days,
        embed_dim: a.embed_dim,
        trend_at,
        ..defaults
    };
    let corpus = synth_corpus(&cfg)?;
    write_corpus(&corpus, &a.out)?;
    if a.images > 0 {
        let dir = a.out.join("images");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (i, shot) in corpus.shots.iter().take(a.images).enumerate() {
            let name = shot.media_ref.clone().unwrap_or_else(|| format!("{}.png", shot.shot_id));
            render_image(cfg.seed, i, 48, 40)?.save(&dir.join(name))?;
        }
    }
    println!(
        "wrote {} shots, {} follows, {} trend shots",
        corpus.shots.len(),
        corpus.follows.len(),
        corpus.truth.trend_shots.len()
    );
    Ok(())
}
