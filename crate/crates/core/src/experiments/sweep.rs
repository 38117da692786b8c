use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::point::{PointSpec, Prepared};
use super::table::{ResultRow, ResultTable};
use crate::error::{LabError, Result};

/// Which parameter the path moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathParameter {
    Mass,
    Lambda,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: PointSpec,
    pub parameter: PathParameter,
    /// Grid of path values, strictly monotone.
    pub values: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Fresh draws allowed per row after a zero mode.
    #[serde(default)]
    pub max_resamples: u32,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(LabError::InvalidArgument("a sweep needs at least one sample per point".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidArgument("sweep values must be finite".into()));
        }
        let up = self.values.windows(2).all(|w| w[0] < w[1]);
        let down = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(LabError::InvalidArgument("sweep values must be strictly monotone".into()));
        }
        if self.parameter == PathParameter::Mass && self.base.model.mass().is_none() {
            return Err(LabError::InvalidArgument(format!("{} has no mass parameter", self.base.model)));
        }
        Ok(())
    }

    pub fn point(&self, t: f64) -> PointSpec {
        let mut p = self.base.clone();
        match self.parameter {
            PathParameter::Mass => p.model = p.model.with_mass(t),
            PathParameter::Lambda => p.lambda = t,
        }
        p
    }
}

/// Stream used for draw `attempt` of sample `sample`. Redraws live above
/// 2³² so they never collide with first draws.
pub(crate) fn stream_for(sample: usize, attempt: u32) -> u64 {
    sample as u64 + ((attempt as u64) << 32)
}

/// Runs `sample` at `prepared`, redrawing after zero modes.
pub(crate) fn run_with_resampling(prepared: &Prepared, seed: u64, sample: usize, max_resamples: u32) -> ResultRow {
    let mut attempt = 0;
    loop {
        let mut row = prepared.run(seed, stream_for(sample, attempt));
        row.sample = sample;
        row.resamples = attempt;
        if !row.is_zero_mode() || attempt >= max_resamples {
            return row;
        }
        attempt += 1;
    }
}

/// Every point is prepared (and so every window checked) before any
/// realization runs; failures of single realizations end up in the rows.
pub fn sweep(spec: &SweepSpec, pool: &rayon::ThreadPool) -> Result<ResultTable> {
    spec.validate()?;
    let mut prepared: Vec<Prepared> = Vec::with_capacity(spec.values.len());
    for &t in &spec.values {
        let p = Prepared::new(&spec.point(t), prepared.last())?;
        prepared.push(p);
    }
    let tasks: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|i| (0..spec.samples).map(move |s| (i, s))).collect();
    let rows: Vec<ResultRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, s)| {
                let mut row = run_with_resampling(&prepared[i], spec.seed, s, spec.max_resamples);
                row.point = i;
                row.t = spec.values[i];
                row
            })
            .collect()
    });
    Ok(ResultTable::from_rows(rows))
}

/// Locates an index jump between `lo` and `hi` by bisection on a clean
/// (stream 0) realization; returns the final bracket and the two indices.
pub fn bisect_transition(spec: &SweepSpec, lo: f64, hi: f64, steps: usize) -> Result<((f64, f64), (i64, i64))> {
    let index_at = |t: f64| -> Result<i64> {
        let row = spec.point(t).prepare()?.run(spec.seed, 0);
        row.index.ok_or_else(|| LabError::InvalidArgument(format!("index undefined at t = {t}: {:?}", row.reason)))
    };
    let (mut a, mut b) = (lo, hi);
    let (ia, ib) = (index_at(a)?, index_at(b)?);
    if ia == ib {
        return Err(LabError::InvalidArgument(format!("no index change between {lo} and {hi}")));
    }
    for _ in 0..steps {
        let mid = 0.5 * (a + b);
        match index_at(mid) {
            Ok(v) if v == ia => a = mid,
            Ok(_) => b = mid,
            // an undefined midpoint sits on the transition; close in from the left
            Err(_) => b = mid,
        }
    }
    Ok(((a, b), (ia, ib)))
}
