//! Tidy result rows and their CSV files.

use std::collections::BTreeMap;
use std::path::Path;

use opsel_core::stats::confidence_interval;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub study: String,
    pub instance: String,
    pub class: String,
    pub n: usize,
    pub portfolio: usize,
    pub agent: String,
    pub seed: usize,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    fn cell(&self) -> CellKey {
        (
            self.study.clone(),
            self.instance.clone(),
            self.class.clone(),
            self.n,
            self.portfolio,
            self.agent.clone(),
            self.metric.clone(),
        )
    }
}

type CellKey = (String, String, String, usize, usize, String, String);

/// One aggregated cell: mean and 95% half-width across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub study: String,
    pub instance: String,
    pub class: String,
    pub n: usize,
    pub portfolio: usize,
    pub agent: String,
    pub metric: String,
    pub seeds: usize,
    pub mean: f64,
    /// Empty when fewer than two seeds.
    pub halfwidth: Option<f64>,
}

impl CellSummary {
    pub fn interval(&self) -> Option<(f64, f64)> {
        self.halfwidth.map(|h| (self.mean - h, self.mean + h))
    }
}

/// Sorts rows into the canonical order used for every written file.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.cell()
            .cmp(&b.cell())
            .then(a.seed.cmp(&b.seed))
            .then(a.value.total_cmp(&b.value))
    });
}

pub fn aggregate(rows: &[ResultRow]) -> Result<Vec<CellSummary>> {
    let mut cells: BTreeMap<CellKey, Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        cells.entry(r.cell()).or_default().push((r.seed, r.value));
    }
    cells
        .into_iter()
        .map(|((study, instance, class, n, portfolio, agent, metric), mut values)| {
            values.sort_by_key(|&(seed, _)| seed);
            let v: Vec<f64> = values.iter().map(|&(_, x)| x).collect();
            let (mean, halfwidth) = if v.len() >= 2 {
                let (m, h) = confidence_interval(&v)?;
                (m, Some(h))
            } else {
                (v[0], None)
            };
            Ok(CellSummary {
                study,
                instance,
                class,
                n,
                portfolio,
                agent,
                metric,
                seeds: v.len(),
                mean,
                halfwidth,
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, records: &[T], header: &[&str]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const ROW_HEADER: [&str; 9] = ["study", "instance", "class", "n", "portfolio", "agent", "seed", "metric", "value"];
pub const SUMMARY_HEADER: [&str; 10] = [
    "study", "instance", "class", "n", "portfolio", "agent", "metric", "seeds", "mean", "halfwidth",
];

/// Writes `rows` in canonical order to `path` and the aggregated cells to
/// `<stem>.summary.csv` next to it.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    write_csv(path, &sorted, &ROW_HEADER)?;
    write_csv(&summary_path(path), &aggregate(&sorted)?, &SUMMARY_HEADER)
}

pub fn summary_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    path.with_file_name(format!("{stem}.summary.csv"))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ROW_HEADER {
        return Err(Error::parse(
            &path.display().to_string(),
            1,
            format!("expected header {}", ROW_HEADER.join(",")),
        ));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Finds the summary cell matching the given filters.
pub fn find<'a>(
    cells: &'a [CellSummary],
    study: &str,
    class: &str,
    n: usize,
    portfolio: usize,
    agent: &str,
    metric: &str,
) -> Option<&'a CellSummary> {
    cells.iter().find(|c| {
        c.study == study && c.class == class && c.n == n && c.portfolio == portfolio && c.agent == agent && c.metric == metric
    })
}
