use serde::Serialize;

use super::flatten::FlattenedHamiltonian;
use crate::lattice::{dist, Region};

/// Averages below this are treated as numerical zero and left out of the fit.
const FIT_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, Serialize)]
pub struct DecayBin {
    /// Separation `|x − y|` rounded to the nearest integer.
    pub separation: usize,
    pub pairs: usize,
    /// Mean Frobenius norm of `⟨x|H|y⟩` over the pairs.
    pub mean_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayTable {
    pub bins: Vec<DecayBin>,
    /// Exponential rate `a` of the fit `mean ≈ C e^{−a s}` over bins `s ≥ 1`
    /// above the numerical floor; `None` with fewer than two such bins.
    pub rate: Option<f64>,
    /// `(k, sup_s ⟨s⟩^k · mean(s))` with `⟨s⟩ = (1 + s²)^{1/2}`.
    pub weighted_sup: Vec<(u32, f64)>,
}

/// Off-diagonal decay of `H` binned by separation. Row sites can be limited
/// to `rows` (for instance a collar); column sites range over the window.
pub fn decay_diagnostic(h: &FlattenedHamiltonian, k_list: &[u32], rows: Option<&Region>) -> DecayTable {
    let p = h.pattern().clone();
    let sites = h.sites();
    let mut sum: Vec<f64> = Vec::new();
    let mut count: Vec<usize> = Vec::new();
    for (px, &x) in sites.iter().enumerate() {
        if let Some(r) = rows {
            if !r.contains(&p, x) {
                continue;
            }
        }
        for (py, &y) in sites.iter().enumerate() {
            let s = dist(p.site(x), p.site(y)).round() as usize;
            if s >= sum.len() {
                sum.resize(s + 1, 0.0);
                count.resize(s + 1, 0);
            }
            let b = h.block(px, py);
            sum[s] += b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            count[s] += 1;
        }
    }
    let bins: Vec<DecayBin> = sum
        .iter()
        .zip(&count)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(s, (&t, &c))| DecayBin { separation: s, pairs: c, mean_norm: t / c as f64 })
        .collect();

    let pts: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.separation >= 1 && b.mean_norm > FIT_FLOOR)
        .map(|b| (b.separation as f64, b.mean_norm.ln()))
        .collect();
    let rate = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(-sxy / sxx)
    } else {
        None
    };
    let weighted_sup = k_list
        .iter()
        .map(|&k| {
            let v = bins
                .iter()
                .map(|b| (1.0 + (b.separation as f64).powi(2)).powf(k as f64 / 2.0) * b.mean_norm)
                .fold(0.0, f64::max);
            (k, v)
        })
        .collect();
    DecayTable { bins, rate, weighted_sup }
}
