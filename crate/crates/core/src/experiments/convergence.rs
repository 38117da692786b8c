use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::point::{PointSpec, Prepared};
use super::sweep::run_with_resampling;
use super::table::ResultRow;
use crate::error::{LabError, Result};
use crate::localizer::{admissible_params, AdmissibleParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub base: PointSpec,
    pub kappas: Vec<f64>,
    pub rhos: Vec<f64>,
    /// Disorder streams; `[0]` for a clean model.
    pub samples: Vec<usize>,
    pub seed: u64,
    /// Cells whose smallest localizer gap falls below this are unreliable.
    pub gap_threshold: f64,
    /// Also report the admissibility bounds for the base configuration.
    #[serde(default)]
    pub admissibility: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceCell {
    pub i: usize,
    pub j: usize,
    pub kappa: f64,
    pub rho: f64,
    pub indices: Vec<Option<i64>>,
    /// The common index when every sample is defined and they agree.
    pub value: Option<i64>,
    pub min_gap: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Plateau {
    pub value: i64,
    /// `(i, j)` positions in the κ × ρ grid.
    pub cells: Vec<(usize, usize)>,
    pub kappa_range: (f64, f64),
    pub rho_range: (f64, f64),
    /// Mean κ and ρ over the plateau.
    pub centroid: (f64, f64),
    /// Plateau cell nearest to the centroid in grid units.
    pub recommended: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub cells: Vec<ConvergenceCell>,
    pub rows: Vec<ResultRow>,
    pub plateau: Option<Plateau>,
    pub admissible: Option<AdmissibleParams>,
}

/// Index over the κ × ρ grid. The plateau is the largest 4-connected set
/// of reliable cells sharing one index value; ties go to the set found
/// first in row-major order.
pub fn convergence_study(spec: &ConvergenceSpec, pool: &rayon::ThreadPool) -> Result<ConvergenceReport> {
    if spec.kappas.is_empty() || spec.rhos.is_empty() || spec.samples.is_empty() {
        return Err(LabError::InvalidArgument("convergence grids and samples must be non-empty".into()));
    }
    let (nk, nr) = (spec.kappas.len(), spec.rhos.len());
    let cells_ij: Vec<(usize, usize)> = (0..nk).flat_map(|i| (0..nr).map(move |j| (i, j))).collect();
    let point = |i: usize, j: usize| {
        let mut p = spec.base.clone();
        p.localizer.kappa = spec.kappas[i];
        p.localizer.rho = spec.rhos[j];
        p
    };
    // preparation failures (window too small for this ρ) mark the cell
    let prepared: Vec<std::result::Result<Prepared, String>> = cells_ij
        .iter()
        .map(|&(i, j)| point(i, j).prepare().map_err(|e| format!("{}: {e}", e.class())))
        .collect();
    let tasks: Vec<(usize, usize)> =
        (0..cells_ij.len()).flat_map(|c| spec.samples.iter().map(move |&s| (c, s))).collect();
    let rows: Vec<Option<ResultRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, s)| {
                prepared[c].as_ref().ok().map(|p| {
                    let mut row = run_with_resampling(p, spec.seed, s, 0);
                    row.point = c;
                    row.t = c as f64;
                    row
                })
            })
            .collect()
    });

    let ns = spec.samples.len();
    let cells: Vec<ConvergenceCell> = cells_ij
        .iter()
        .enumerate()
        .map(|(c, &(i, j))| {
            let mine = &rows[c * ns..(c + 1) * ns];
            let indices: Vec<Option<i64>> = mine.iter().map(|r| r.as_ref().and_then(|r| r.index)).collect();
            let value = indices[0].filter(|v| indices.iter().all(|x| *x == Some(*v)));
            let min_gap = mine.iter().map(|r| r.as_ref().and_then(|r| r.localizer_gap)).collect::<Option<Vec<_>>>();
            let reason = match &prepared[c] {
                Err(e) => Some(e.clone()),
                Ok(_) => mine.iter().find_map(|r| r.as_ref().and_then(|r| r.reason.clone())),
            };
            ConvergenceCell {
                i,
                j,
                kappa: spec.kappas[i],
                rho: spec.rhos[j],
                indices,
                value,
                min_gap: min_gap.and_then(|g| g.into_iter().reduce(f64::min)),
                reason,
            }
        })
        .collect();

    let plateau = find_plateau(&cells, nk, nr, spec.gap_threshold);
    let admissible = if spec.admissibility {
        let p = spec.base.prepare()?;
        let h = p.hamiltonian(spec.seed, spec.samples[0] as u64)?;
        let flat = p.flatten(&h)?;
        let g = if flat.is_flattened() { 1.0 } else { flat.gap() };
        Some(admissible_params(&flat, &p.dirac, g)?)
    } else {
        None
    };
    Ok(ConvergenceReport { cells, rows: rows.into_iter().flatten().collect(), plateau, admissible })
}

fn find_plateau(cells: &[ConvergenceCell], nk: usize, nr: usize, threshold: f64) -> Option<Plateau> {
    let reliable = |c: &ConvergenceCell| c.value.is_some() && c.min_gap.is_some_and(|g| g >= threshold);
    let at = |i: usize, j: usize| &cells[i * nr + j];
    let mut seen = vec![false; cells.len()];
    let mut best: Option<(i64, Vec<(usize, usize)>)> = None;
    for start in 0..cells.len() {
        if seen[start] || !reliable(&cells[start]) {
            continue;
        }
        let value = cells[start].value.unwrap();
        let mut component = Vec::new();
        let mut stack = vec![(cells[start].i, cells[start].j)];
        seen[start] = true;
        while let Some((i, j)) = stack.pop() {
            component.push((i, j));
            let mut nb = Vec::with_capacity(4);
            if i > 0 {
                nb.push((i - 1, j));
            }
            if i + 1 < nk {
                nb.push((i + 1, j));
            }
            if j > 0 {
                nb.push((i, j - 1));
            }
            if j + 1 < nr {
                nb.push((i, j + 1));
            }
            for (a, b) in nb {
                let k = a * nr + b;
                if !seen[k] && reliable(at(a, b)) && at(a, b).value == Some(value) {
                    seen[k] = true;
                    stack.push((a, b));
                }
            }
        }
        if best.as_ref().is_none_or(|(_, c)| component.len() > c.len()) {
            best = Some((value, component));
        }
    }
    let (value, mut cells_ij) = best?;
    cells_ij.sort_unstable();
    let ks: Vec<f64> = cells_ij.iter().map(|&(i, j)| at(i, j).kappa).collect();
    let rs: Vec<f64> = cells_ij.iter().map(|&(i, j)| at(i, j).rho).collect();
    let m = cells_ij.len() as f64;
    let centroid = (ks.iter().sum::<f64>() / m, rs.iter().sum::<f64>() / m);
    let (ci, cj) = (
        cells_ij.iter().map(|c| c.0 as f64).sum::<f64>() / m,
        cells_ij.iter().map(|c| c.1 as f64).sum::<f64>() / m,
    );
    let &(bi, bj) = cells_ij
        .iter()
        .min_by(|a, b| {
            let d = |c: &(usize, usize)| (c.0 as f64 - ci).powi(2) + (c.1 as f64 - cj).powi(2);
            d(a).total_cmp(&d(b))
        })
        .expect("non-empty plateau");
    let range = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    Some(Plateau {
        value,
        kappa_range: range(&ks),
        rho_range: range(&rs),
        centroid,
        recommended: (at(bi, bj).kappa, at(bi, bj).rho),
        cells: cells_ij,
    })
}

#[cfg(test)]
pub(super) fn plateau_of(cells: &[ConvergenceCell], nk: usize, nr: usize, threshold: f64) -> Option<Plateau> {
    find_plateau(cells, nk, nr, threshold)
}
