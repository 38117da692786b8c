//! Ensembles of localizer runs: parameter sweeps, offset invariance,
//! interface probes and (κ, ρ) convergence scans.
//!
//! Every realization is a pure function of its spec, base seed and stream
//! number. Disorder for stream `s` is the ChaCha8 stream `s` of the base
//! seed, so the same `ω` is reused at every point of a path and rows can be
//! recomputed in any order or on any number of threads.

mod convergence;
mod interface;
mod offset;
mod point;
mod sweep;
mod table;

pub use convergence::{convergence_study, ConvergenceCell, ConvergenceReport, ConvergenceSpec, Plateau};
pub use interface::{
    bulk_limit_probes, glue, interface_probe, min_abs_eigenvalue, Glue, InterfaceReport, InterfaceSpec, Probe, ProbeResult, SpectrumStat,
};
pub use offset::{offset_invariance, random_offsets, OffsetReport, OffsetSpec, OffsetVerdict};
pub use point::{run_point, FlattenMode, PointSpec, Prepared};
pub use sweep::{bisect_transition, sweep, PathParameter, SweepSpec};
pub use table::{wilson_interval, PointSummary, ResultRow, ResultTable, ValueShare};

use crate::error::{LabError, Result};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "LOCALIZER_LAB_THREADS";

/// Pool size: the request (all cores when absent), capped by
/// [`THREADS_ENV`] when that is set to a positive integer.
pub fn worker_count(requested: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&v| v > 0);
    let n = requested.filter(|&v| v > 0).unwrap_or(available);
    cap.map_or(n, |c| n.min(c)).max(1)
}

pub fn build_pool(requested: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(requested))
        .build()
        .map_err(|e| LabError::InvalidArgument(format!("cannot start worker pool: {e}")))
}
