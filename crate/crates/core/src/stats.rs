//! Analysis statistics over a score table: Pearson correlations, the
//! Mann–Whitney U test, emerging-tag selection and the early/late test,
//! 2-D PCA coordinates and the regression-ready export.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::feature_store::{FeaturePack, ShotRecord};
use crate::linalg::Pca;
use crate::pipeline::ScoreTable;
use crate::time::Timestamp;

/// Pooled sizes up to this use the exact null distribution.
pub const MWU_EXACT_MAX: usize = 20;

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Undefined("correlation needs at least two pairs".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Midranks (1-based) of `values`, ties sharing the average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Two-sided Mann–Whitney U test of `a` against `b`.
///
/// Up to [`MWU_EXACT_MAX`] pooled values the p-value comes from the exact
/// permutation distribution of U given the observed ties; beyond that from
/// the normal approximation with tie and continuity corrections.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("Mann-Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("Mann-Whitney U input is not finite".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    if n1 + n2 <= MWU_EXACT_MAX {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let p = exact_p(&doubled, n1, (2.0 * r1).round() as usize);
        return Ok(MannWhitney { u, p, exact: true });
    }
    let n = (n1 + n2) as f64;
    let mean = (n1 * n2) as f64 / 2.0;
    let mut tie_term = 0.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(MannWhitney { u, p: 1.0, exact: false });
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(MannWhitney { u, p, exact: false })
}

/// Exact two-sided p-value: the share of size-`n1` subsets of the doubled
/// ranks whose sum lies at least as far from the null mean as `observed`.
fn exact_p(doubled: &[usize], n1: usize, observed: usize) -> f64 {
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled-rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in doubled {
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[k - 1][s - r];
                if add != 0.0 {
                    ways[k][s] += add;
                }
            }
        }
    }
    let total: f64 = ways[n1].iter().sum();
    // all quantities are doubled, so the null mean n1 (N + 1) / 2 doubles to an integer
    let center = (n1 * (doubled.len() + 1)) as i64;
    let dev = (observed as i64 - center).abs();
    let extreme: f64 = ways[n1]
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - center).abs() >= dev)
        .map(|(_, w)| w)
        .sum();
    (extreme / total).min(1.0)
}

/// Tags first used after `cutoff` that rank among the `top_k` most used
/// tags overall. Ranking is by count, ties broken alphabetically.
pub fn emerging_tags(shots: &[ShotRecord], cutoff: Timestamp, top_k: usize) -> Vec<String> {
    let mut counts: HashMap<&str, (usize, Timestamp)> = HashMap::new();
    for shot in shots {
        for tag in &shot.tags {
            let e = counts.entry(tag.as_str()).or_insert((0, shot.timestamp));
            e.0 += 1;
            e.1 = e.1.min(shot.timestamp);
        }
    }
    let mut ranked: Vec<(&str, usize, Timestamp)> =
        counts.into_iter().map(|(t, (c, first))| (t, c, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(top_k)
        .filter(|&(_, _, first)| first > cutoff)
        .map(|(t, _, _)| t.to_string())
        .collect()
}

/// Novelty columns compared by [`early_late_test`].
pub const NOVELTY_COLUMNS: [&str; 7] = [
    "tagnov",
    "incep_fvgmm",
    "incep_fvmrf",
    "incep_aic",
    "comp_fvgmm",
    "comp_fvmrf",
    "comp_aic",
];

pub const MIN_TAGGED: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTest {
    pub column: String,
    pub n_early: usize,
    pub n_late: usize,
    pub early_mean: f64,
    pub late_mean: f64,
    pub test: MannWhitney,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyLateReport {
    pub tag: String,
    pub n_tagged: usize,
    pub group_size: usize,
    pub columns: Vec<ColumnTest>,
}

impl EarlyLateReport {
    pub fn column(&self, name: &str) -> Option<&ColumnTest> {
        self.columns.iter().find(|c| c.column == name)
    }
}

/// Compares the novelty of the earliest and latest `frac` of scored shots
/// carrying `tag`. Columns with no values in either group are left out.
pub fn early_late_test(
    table: &ScoreTable,
    shots: &[ShotRecord],
    tag: &str,
    frac: f64,
) -> Result<EarlyLateReport> {
    if !(frac > 0.0 && frac <= 0.5) {
        return Err(Error::Config(format!("frac must lie in (0, 0.5], got {frac}")));
    }
    let tagged: std::collections::HashSet<&str> = shots
        .iter()
        .filter(|s| s.tags.iter().any(|t| t == tag))
        .map(|s| s.shot_id.as_str())
        .collect();
    let mut rows: Vec<_> = table
        .rows
        .iter()
        .filter(|r| tagged.contains(r.shot_id.as_str()))
        .collect();
    rows.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.shot_id.cmp(&b.shot_id)));
    if rows.len() < MIN_TAGGED {
        return Err(Error::Validation(format!(
            "{} scored shots carry {tag:?}; at least {MIN_TAGGED} are needed",
            rows.len()
        )));
    }
    let group_size = (frac * rows.len() as f64).floor() as usize;
    if group_size < 1 {
        return Err(Error::Validation(format!(
            "frac {frac} of {} shots leaves an empty group",
            rows.len()
        )));
    }
    let early = &rows[..group_size];
    let late = &rows[rows.len() - group_size..];
    let mut columns = Vec::new();
    for name in NOVELTY_COLUMNS {
        let a: Vec<f64> = early.iter().filter_map(|r| r.column(name)).collect();
        let b: Vec<f64> = late.iter().filter_map(|r| r.column(name)).collect();
        if a.is_empty() || b.is_empty() {
            continue;
        }
        columns.push(ColumnTest {
            column: name.to_string(),
            n_early: a.len(),
            n_late: b.len(),
            early_mean: a.iter().sum::<f64>() / a.len() as f64,
            late_mean: b.iter().sum::<f64>() / b.len() as f64,
            test: mann_whitney_u(&a, &b)?,
        });
    }
    Ok(EarlyLateReport {
        tag: tag.to_string(),
        n_tagged: rows.len(),
        group_size,
        columns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2d {
    pub ids: Vec<String>,
    /// n × 2 coordinates.
    pub coords: Array2<f64>,
    /// Share of total variance carried by each axis.
    pub explained_ratio: [f64; 2],
    pub warning: Option<String>,
}

/// Projects pack rows onto their top two principal directions.
pub fn pca2d(pack: &FeaturePack, seed: u64) -> Result<Projection2d> {
    if pack.len() < 3 {
        return Err(Error::TooFewSamples {
            samples: pack.len(),
            components: 2,
        });
    }
    let data = pack.to_f64();
    let k = pack.dim().min(2);
    let pca = Pca::fit(data.view(), k, seed)?;
    let mut coords = Array2::zeros((pack.len(), 2));
    let projected = pca.project_rows(data.view())?;
    let rank = pca.rank();
    let mut ratio = [0.0; 2];
    for j in 0..k.min(rank) {
        coords.index_axis_mut(Axis(1), j).assign(&projected.index_axis(Axis(1), j));
        if pca.total_variance > 0.0 {
            ratio[j] = pca.explained_variance[j] / pca.total_variance;
        }
    }
    let warning = (rank < 2).then(|| format!("data has rank {rank}; missing axes are zero"));
    Ok(Projection2d {
        ids: pack.ids.clone(),
        coords,
        explained_ratio: ratio,
        warning,
    })
}

pub fn write_projection(p: &Projection2d, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["shot_id", "pc1", "pc2"])?;
    for (id, row) in p.ids.iter().zip(p.coords.rows()) {
        w.write_record([id.clone(), row[0].to_string(), row[1].to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns of the default correlation matrix.
pub const CORRELATION_COLUMNS: [&str; 5] =
    ["tagnov", "incep_fvgmm", "comp_fvgmm", "log_likes", "log_views"];

/// Pearson correlations over rows where every requested column is present.
/// Undefined entries are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub n_rows: usize,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn correlation_matrix(table: &ScoreTable, columns: &[&str]) -> CorrelationMatrix {
    let rows: Vec<Vec<f64>> = table
        .rows
        .iter()
        .filter_map(|r| columns.iter().map(|c| r.column(c)).collect::<Option<Vec<f64>>>())
        .collect();
    let series: Vec<Vec<f64>> = (0..columns.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let values = (0..columns.len())
        .map(|i| {
            (0..columns.len())
                .map(|j| pearson(&series[i], &series[j]).ok())
                .collect()
        })
        .collect();
    CorrelationMatrix {
        columns: columns.iter().map(|c| c.to_string()).collect(),
        n_rows: rows.len(),
        values,
    }
}

/// Writes the matrix with a `pearson` corner label; undefined cells are empty.
pub fn write_correlations(m: &CorrelationMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["pearson".to_string()];
    header.extend(m.columns.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in m.columns.iter().zip(&m.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const ANALYSIS_COLUMNS: [&str; 17] = [
    "shot_id",
    "user_id",
    "timestamp",
    "log_likes",
    "log_views",
    "tagnov",
    "incep_fvgmm",
    "comp_fvgmm",
    "incep_fvmrf",
    "comp_fvmrf",
    "log_days_active",
    "n_prev_shots",
    "in_deg",
    "out_deg",
    "closeness",
    "constraint",
    "density",
];

const ANALYSIS_COMMENT: &str = "# log_* columns are ln(1 + x); empty cells are scores not available\n";

/// Writes the regression-ready table: a `#` comment line, then the CSV.
pub fn export_analysis_table(table: &ScoreTable, path: &Path) -> Result<()> {
    let mut buf = ANALYSIS_COMMENT.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(ANALYSIS_COLUMNS)?;
        for r in &table.rows {
            let mut rec = vec![r.shot_id.clone(), r.user_id.clone(), r.timestamp.to_rfc3339()];
            for name in &ANALYSIS_COLUMNS[3..] {
                rec.push(r.column(name).map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(pearson(&x, &x).unwrap(), 1.0);
        assert_eq!(pearson(&x, &[-1.0, -2.0, -3.0]).unwrap(), -1.0);
        let r = pearson(&x, &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.98198).abs() < 5e-6, "{r}");
        assert!(matches!(pearson(&x, &[2.0; 3]), Err(Error::Undefined(_))));
    }

    #[test]
    fn mwu_examples() {
        assert_eq!(mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap().u, 0.0);
        assert_eq!(mann_whitney_u(&[1.0, 3.0], &[2.0, 4.0]).unwrap().u, 1.0);
        let a = [0.5, 1.5, 1.5, 7.0];
        let t = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(t.u, 8.0);
        assert_eq!(t.p, 1.0);
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn exact_p_for_full_separation() {
        // 2 of C(6, 3) = 20 labelings are as extreme
        let t = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!(t.exact);
        assert!((t.p - 0.1).abs() < 1e-15);
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = (30..60).map(f64::from).collect();
        let t = mann_whitney_u(&a, &b).unwrap();
        assert!(!t.exact);
        assert_eq!(t.u, 0.0);
        assert!(t.p < 1e-9);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn shot(id: &str, day: i64, tags: &[&str]) -> ShotRecord {
        ShotRecord {
            shot_id: id.into(),
            user_id: "u".into(),
            timestamp: Timestamp::from_days(day),
            tags: tags.iter().map(|t| t.to_string()).collect(),
            likes: 0,
            views: 0,
            media_ref: None,
        }
    }

    #[test]
    fn emerging_tag_selection() {
        let cutoff = Timestamp::from_days(10);
        let shots = vec![
            shot("a", 1, &["old"]),
            shot("b", 11, &["m", "old"]),
            shot("c", 12, &["m"]),
            shot("d", 13, &["m", "rare"]),
        ];
        assert_eq!(emerging_tags(&shots, cutoff, 1), vec!["m"]);
        assert_eq!(emerging_tags(&shots, cutoff, 3), vec!["m", "rare"]);
        assert!(emerging_tags(&shots, Timestamp::from_days(0), 3).contains(&"old".to_string()));
    }

    #[test]
    fn pca2d_on_a_line_has_zero_second_axis() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64;
                vec![t, 2.0 * t, -t, 0.5 * t, 3.0]
            })
            .collect();
        let ids = (0..10).map(|i| format!("s{i}")).collect();
        let pack = FeaturePack::from_rows(ids, 5, &rows, "embedding").unwrap();
        let p = pca2d(&pack, 1).unwrap();
        assert!(p.coords.column(1).iter().all(|v| v.abs() < 1e-9));
        assert!(p.warning.is_some());
    }

    #[test]
    fn export_of_empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        export_analysis_table(&ScoreTable::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with('#'));
        assert_eq!(lines[1], ANALYSIS_COLUMNS.join(","));
    }
}
