use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One realization. `point` and `t` locate it on the experiment's grid;
/// `(seed, stream)` together with the spec reproduce it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub point: usize,
    pub t: f64,
    pub sample: usize,
    pub seed: u64,
    pub stream: u64,
    pub index: Option<i64>,
    /// Error class and message when the index is undefined.
    pub reason: Option<String>,
    pub localizer_gap: Option<f64>,
    pub flattening_gap: Option<f64>,
    /// Localizer gap at least half the Hamiltonian gap.
    pub guaranteed: bool,
    /// κ, ρ inside the admissibility bounds, when evaluated.
    pub admissible: Option<bool>,
    pub margin_ok: bool,
    /// Zero-mode redraws spent on this row.
    pub resamples: u32,
}

impl ResultRow {
    pub fn is_zero_mode(&self) -> bool {
        self.reason.as_deref().is_some_and(|r| r.starts_with("zero-mode"))
    }
}

/// Share of one index value at a grid point with its 95% Wilson interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueShare {
    pub value: i64,
    pub count: usize,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSummary {
    pub point: usize,
    pub t: f64,
    pub samples: usize,
    pub defined: usize,
    pub zero_modes: usize,
    pub resamples: u32,
    pub min_flattening_gap: Option<f64>,
    /// Shares among defined rows, by value.
    pub distribution: Vec<ValueShare>,
}

impl PointSummary {
    pub fn share(&self, value: i64) -> Option<&ValueShare> {
        self.distribution.iter().find(|s| s.value == value)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub points: Vec<PointSummary>,
    /// Total-variation distance between the index distributions of
    /// successive grid points.
    pub adjacent_tv: Vec<f64>,
    pub zero_modes: usize,
    pub resamples: u32,
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl ResultTable {
    /// Summarizes rows grouped by `point` (in order of first appearance).
    pub fn from_rows(rows: Vec<ResultRow>) -> Self {
        let mut order: Vec<usize> = Vec::new();
        let mut groups: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
        for r in &rows {
            if !groups.contains_key(&r.point) {
                order.push(r.point);
            }
            groups.entry(r.point).or_default().push(r);
        }
        let points: Vec<PointSummary> = order
            .iter()
            .map(|p| {
                let g = &groups[p];
                let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
                for r in g {
                    if let Some(v) = r.index {
                        *counts.entry(v).or_default() += 1;
                    }
                }
                let defined: usize = counts.values().sum();
                let distribution = counts
                    .into_iter()
                    .map(|(value, count)| {
                        let (lo, hi) = wilson_interval(count, defined);
                        ValueShare { value, count, p: count as f64 / defined as f64, lo, hi }
                    })
                    .collect();
                PointSummary {
                    point: *p,
                    t: g[0].t,
                    samples: g.len(),
                    defined,
                    zero_modes: g.iter().filter(|r| r.is_zero_mode()).count(),
                    resamples: g.iter().map(|r| r.resamples).sum(),
                    min_flattening_gap: g.iter().filter_map(|r| r.flattening_gap).reduce(f64::min),
                    distribution,
                }
            })
            .collect();
        let adjacent_tv = points.windows(2).map(|w| total_variation(&w[0], &w[1])).collect();
        let zero_modes = points.iter().map(|p| p.zero_modes).sum();
        let resamples = points.iter().map(|p| p.resamples).sum();
        Self { rows, points, adjacent_tv, zero_modes, resamples }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Plot-ready long format: one line per (grid point, index value).
    pub fn write_long_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["point", "t", "value", "count", "defined", "p", "lo", "hi"])?;
        for p in &self.points {
            for s in &p.distribution {
                out.write_record([
                    p.point.to_string(),
                    p.t.to_string(),
                    s.value.to_string(),
                    s.count.to_string(),
                    p.defined.to_string(),
                    s.p.to_string(),
                    s.lo.to_string(),
                    s.hi.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Summary JSON with the config echo and code version.
    pub fn summary_json<C: Serialize>(&self, config: &C) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": serde_json::to_value(config)?,
            "seeds": self.rows.iter().map(|r| (r.seed, r.stream)).collect::<std::collections::BTreeSet<_>>(),
            "points": serde_json::to_value(&self.points)?,
            "adjacent_tv": self.adjacent_tv,
            "zero_modes": self.zero_modes,
            "resamples": self.resamples,
        }))
    }

    /// Writes `rows.csv`, `distribution.csv` and `summary.json` into `dir`.
    pub fn write_all<C: Serialize>(&self, dir: &Path, config: &C) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("rows.csv"))?)?;
        self.write_long_csv(std::fs::File::create(dir.join("distribution.csv"))?)?;
        let json = self.summary_json(config)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&json)?)?;
        Ok(())
    }
}

fn total_variation(a: &PointSummary, b: &PointSummary) -> f64 {
    let mut values: Vec<i64> = a.distribution.iter().chain(&b.distribution).map(|s| s.value).collect();
    values.sort_unstable();
    values.dedup();
    let p = |s: &PointSummary, v| s.share(v).map_or(0.0, |x| x.p);
    0.5 * values.iter().map(|&v| (p(a, v) - p(b, v)).abs()).sum::<f64>()
}
