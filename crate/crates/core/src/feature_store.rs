//! Feature-pack directories and the shot / follow input files.
//!
//! A pack directory holds three files:
//!
//! * `meta` - `key=value` lines with `n`, `dim`, `created` and `kind`
//! * `ids.txt` - one shot id per line, each terminated by `\n`
//! * `data.f32le` - `n * dim` little-endian `f32` values, row-major
//!
//! Shot files are newline-delimited JSON objects with the fields of
//! [`ShotRecord`]; follow files are `src,dst,timestamp` CSV lines.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

pub const META_FILE: &str = "meta";
pub const IDS_FILE: &str = "ids.txt";
pub const DATA_FILE: &str = "data.f32le";

pub const KIND_COMPOSITIONAL: &str = "compositional";
pub const KIND_EMBEDDING: &str = "embedding";

/// One image post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_id: String,
    pub user_id: String,
    pub timestamp: Timestamp,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub views: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
}

impl ShotRecord {
    /// Lowercases, trims and deduplicates tags, keeping first occurrences.
    pub fn normalize_tags(&mut self) {
        self.tags = normalize_tags(&self.tags);
    }
}

pub fn normalize_tags<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(tags.len());
    for tag in tags {
        let t = tag.as_ref().trim().to_lowercase();
        if !t.is_empty() && seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

/// Sorts shots by timestamp, ties broken by `shot_id`.
pub fn sort_shots(shots: &mut [ShotRecord]) {
    shots.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.shot_id.cmp(&b.shot_id))
    });
}

/// A directed follow edge created at `timestamp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Follow {
    pub src: String,
    pub dst: String,
    pub timestamp: Timestamp,
}

/// Id-indexed dense matrix of per-shot feature vectors.
///
/// Values are kept as `f32`, exactly as stored on disk; numeric code widens
/// rows to `f64` through [`FeaturePack::row_f64`] or [`FeaturePack::to_f64`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePack {
    pub ids: Vec<String>,
    pub data: Array2<f32>,
    pub kind: String,
    pub created: String,
}

impl FeaturePack {
    pub fn new(ids: Vec<String>, data: Array2<f32>, kind: impl Into<String>) -> Result<Self> {
        let pack = FeaturePack {
            ids,
            data,
            kind: kind.into(),
            created: Timestamp(chrono::Utc::now().timestamp()).to_rfc3339(),
        };
        pack.validate()?;
        Ok(pack)
    }

    pub fn from_rows(
        ids: Vec<String>,
        dim: usize,
        rows: &[Vec<f64>],
        kind: impl Into<String>,
    ) -> Result<Self> {
        let mut data = Array2::<f32>::zeros((rows.len(), dim));
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                data[[r, c]] = v as f32;
            }
        }
        FeaturePack::new(ids, data, kind)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f32> {
        self.data.row(i)
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn to_f64(&self) -> Array2<f64> {
        self.data.mapv(|v| v as f64)
    }

    /// Map from shot id to row index.
    pub fn index(&self) -> std::collections::HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.ncols() == 0 {
            return Err(Error::Validation("pack dimension must be positive".into()));
        }
        if self.ids.len() != self.data.nrows() {
            return Err(Error::Validation(format!(
                "{} ids for {} rows",
                self.ids.len(),
                self.data.nrows()
            )));
        }
        let mut seen = HashSet::with_capacity(self.ids.len());
        for id in &self.ids {
            if id.is_empty() || id.contains('\n') || id.contains('\r') {
                return Err(Error::Validation(format!("invalid shot id {id:?}")));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate id {id:?}")));
            }
        }
        for (r, row) in self.data.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: r });
            }
        }
        Ok(())
    }
}

/// Writes `pack` into `dir`, creating the directory if needed. The pack is
/// validated before anything touches the filesystem.
pub fn write_pack(pack: &FeaturePack, dir: &Path) -> Result<()> {
    pack.validate()?;
    if pack.kind.contains('\n') || pack.created.contains('\n') {
        return Err(Error::Validation("meta values must be single-line".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta = format!(
        "n={}\ndim={}\ncreated={}\nkind={}\n",
        pack.len(),
        pack.dim(),
        pack.created,
        pack.kind
    );
    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))?;

    let ids_path = dir.join(IDS_FILE);
    let mut ids = String::new();
    for id in &pack.ids {
        ids.push_str(id);
        ids.push('\n');
    }
    fs::write(&ids_path, ids).map_err(|e| Error::io(&ids_path, e))?;

    let data_path = dir.join(DATA_FILE);
    let file = fs::File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut w = BufWriter::new(file);
    for v in pack.data.iter() {
        w.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(&data_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&data_path, e))?;
    Ok(())
}

pub fn read_pack(dir: &Path) -> Result<FeaturePack> {
    let meta_path = dir.join(META_FILE);
    let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut n = None;
    let mut dim = None;
    let mut created = String::new();
    let mut kind = String::new();
    for (i, line) in meta.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&meta_path, i + 1, "expected key=value"))?;
        let value = value.trim();
        match key.trim() {
            "n" => {
                n = Some(value.parse::<usize>().map_err(|_| {
                    Error::parse(&meta_path, i + 1, format!("bad row count {value:?}"))
                })?)
            }
            "dim" => {
                dim = Some(value.parse::<usize>().map_err(|_| {
                    Error::parse(&meta_path, i + 1, format!("bad dimension {value:?}"))
                })?)
            }
            "created" => created = value.to_string(),
            "kind" => kind = value.to_string(),
            _ => {}
        }
    }
    let n = n.ok_or_else(|| Error::parse(&meta_path, 0, "missing n"))?;
    let dim = dim.ok_or_else(|| Error::parse(&meta_path, 0, "missing dim"))?;
    if dim == 0 {
        return Err(Error::parse(&meta_path, 0, "dim must be positive"));
    }

    let ids_path = dir.join(IDS_FILE);
    let ids_text = fs::read_to_string(&ids_path).map_err(|e| Error::io(&ids_path, e))?;
    let ids: Vec<String> = ids_text.lines().map(str::to_string).collect();
    if ids.len() != n {
        return Err(Error::Validation(format!(
            "{} lists {} ids, meta says n={n}",
            ids_path.display(),
            ids.len()
        )));
    }

    let data_path = dir.join(DATA_FILE);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let expected = (n * dim * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: data_path,
            expected,
            actual: bytes.len() as u64,
        });
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let data = Array2::from_shape_vec((n, dim), values)
        .map_err(|e| Error::Validation(e.to_string()))?;

    let pack = FeaturePack {
        ids,
        data,
        kind,
        created,
    };
    pack.validate()?;
    Ok(pack)
}

pub fn load_shots(path: &Path) -> Result<Vec<ShotRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_shots(BufReader::new(file), path)
}

/// Parses newline-delimited JSON shot records. Blank lines are skipped.
pub fn parse_shots<R: BufRead>(reader: R, path: &Path) -> Result<Vec<ShotRecord>> {
    let mut shots = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut shot: ShotRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if shot.shot_id.is_empty() {
            return Err(Error::parse(path, i + 1, "empty shot_id"));
        }
        if !seen.insert(shot.shot_id.clone()) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate shot_id {:?}", shot.shot_id),
            ));
        }
        shot.normalize_tags();
        shots.push(shot);
    }
    sort_shots(&mut shots);
    Ok(shots)
}

pub fn write_shots(shots: &[ShotRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for shot in shots {
        let line = serde_json::to_string(shot).map_err(|e| Error::Validation(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_follows(path: &Path) -> Result<Vec<Follow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_follows(BufReader::new(file), path)
}

/// Parses `src,dst,timestamp` lines; an optional header starting with
/// `src,` is skipped. Self-follows are rejected.
pub fn parse_follows<R: BufRead>(reader: R, path: &Path) -> Result<Vec<Follow>> {
    let mut follows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("src,")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let (src, dst) = (fields[0], fields[1]);
        if src.is_empty() || dst.is_empty() {
            return Err(Error::parse(path, i + 1, "empty user id"));
        }
        if src == dst {
            return Err(Error::parse(path, i + 1, format!("self-follow by {src:?}")));
        }
        let timestamp = Timestamp::parse(fields[2]).ok_or_else(|| {
            Error::parse(path, i + 1, format!("unparseable timestamp {:?}", fields[2]))
        })?;
        follows.push(Follow {
            src: src.to_string(),
            dst: dst.to_string(),
            timestamp,
        });
    }
    follows.sort_by_key(|f| f.timestamp);
    Ok(follows)
}

pub fn write_follows(follows: &[Follow], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for f in follows {
        writeln!(w, "{},{},{}", f.src, f.dst, f.timestamp).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
