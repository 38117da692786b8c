use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::point::{PointSpec, Prepared};
use super::sweep::run_with_resampling;
use super::table::ResultRow;
use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetSpec {
    /// The offset in `base.localizer` is replaced by each entry of `offsets`.
    pub base: PointSpec,
    pub offsets: Vec<Vec<f64>>,
    /// Disorder streams; `[0]` for a clean model.
    pub samples: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub max_resamples: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffsetVerdict {
    pub sample: usize,
    /// Index per offset, in the order of the spec.
    pub values: Vec<Option<i64>>,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffsetReport {
    /// `point` is the offset number, `t` is unused.
    pub rows: Vec<ResultRow>,
    pub verdicts: Vec<OffsetVerdict>,
    /// Human-readable descriptions of every disagreement.
    pub violations: Vec<String>,
    pub pass: bool,
}

/// `count` offsets drawn uniformly from `[lo, hi)^d`.
pub fn random_offsets(count: usize, d: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

/// Evaluates the index for every (sample, offset) pair. Each sample passes
/// iff its index is defined and identical at all offsets. The offsets are
/// checked against the lattice and the margin rule before any run.
pub fn offset_invariance(spec: &OffsetSpec, pool: &rayon::ThreadPool) -> Result<OffsetReport> {
    if spec.offsets.is_empty() || spec.samples.is_empty() {
        return Err(LabError::InvalidArgument("offset invariance needs offsets and samples".into()));
    }
    let prepared: Vec<Prepared> = spec
        .offsets
        .iter()
        .map(|z| {
            let mut p = spec.base.clone();
            p.localizer.offset = z.clone();
            p.prepare()
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> =
        spec.samples.iter().flat_map(|&s| (0..prepared.len()).map(move |o| (s, o))).collect();
    let rows: Vec<ResultRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(s, o)| {
                let mut row = run_with_resampling(&prepared[o], spec.seed, s, spec.max_resamples);
                row.point = o;
                row.t = o as f64;
                row
            })
            .collect()
    });
    let mut verdicts = Vec::new();
    let mut violations = Vec::new();
    for (k, &s) in spec.samples.iter().enumerate() {
        let chunk = &rows[k * prepared.len()..(k + 1) * prepared.len()];
        let values: Vec<Option<i64>> = chunk.iter().map(|r| r.index).collect();
        let consistent = values[0].is_some() && values.iter().all(|v| *v == values[0]);
        if !consistent {
            for (o, r) in chunk.iter().enumerate() {
                if r.index != values[0] || r.index.is_none() {
                    violations.push(format!(
                        "sample {s} (seed {}, stream {}): z = {:?} gives {:?} ({}) against {:?} at z = {:?}",
                        r.seed,
                        r.stream,
                        spec.offsets[o],
                        r.index,
                        r.reason.as_deref().unwrap_or("defined"),
                        values[0],
                        spec.offsets[0],
                    ));
                }
            }
        }
        verdicts.push(OffsetVerdict { sample: s, values, consistent });
    }
    let pass = verdicts.iter().all(|v| v.consistent);
    Ok(OffsetReport { rows, verdicts, violations, pass })
}
