//! Flattening of translation-invariant Hamiltonians on a large torus,
//! applied through FFTs. Deep inside the torus this is the infinite-volume
//! `sgn(h)` up to corrections that decay with the torus size.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::block::BlockOperator;
use crate::clifford::CliffordRep;
use crate::error::{LabError, Result};
use crate::lattice::Pattern;
use crate::linalg::eigh;

pub struct PeriodicFlattening {
    dim: usize,
    size: usize,
    fiber: usize,
    /// `sgn ĥ(k)` on the grid, row-major in `(k₁, …, k_d)`.
    symbol: Vec<Array2<C64>>,
    gap: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicFlattening {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicFlattening")
            .field("dim", &self.dim)
            .field("size", &self.size)
            .field("fiber", &self.fiber)
            .field("gap", &self.gap)
            .finish()
    }
}

/// Reads the hopping kernel off the row of `anchor`, which must sit far
/// enough from the window edge to see all of its couplings, and flattens the
/// Bloch Hamiltonian on a `size^d` momentum grid.
pub fn periodic_flatten(h: &BlockOperator, anchor: usize, size: usize, zero_tol: f64) -> Result<PeriodicFlattening> {
    let p = h.pattern();
    let d = p.dim();
    if !(1..=2).contains(&d) {
        return Err(LabError::InvalidArgument(format!("periodic flattening supports d = 1, 2; got {d}")));
    }
    let n = h.fiber_dim();
    let x0 = p.site(anchor).to_vec();
    let mut kernel = Vec::new();
    for (&y, b) in h.row(anchor) {
        let delta: Vec<f64> = x0.iter().zip(p.site(y)).map(|(a, c)| a - c).collect();
        if delta.iter().any(|v| v.fract() != 0.0 || 2.0 * v.abs() >= size as f64) {
            return Err(LabError::InvalidArgument(format!("hopping {delta:?} does not fit a torus of size {size}")));
        }
        kernel.push((delta, b.clone()));
    }
    let count = size.pow(d as u32);
    let mut symbol = Vec::with_capacity(count);
    let mut gap = f64::INFINITY;
    for idx in 0..count {
        let k = momentum(idx, d, size);
        let mut hk = Array2::<C64>::zeros((n, n));
        for (delta, b) in &kernel {
            let phase: f64 = -k.iter().zip(delta).map(|(a, c)| a * c).sum::<f64>();
            hk.scaled_add(C64::from_polar(1.0, phase), b);
        }
        let (vals, vecs) = eigh(&hk)?;
        let min = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        gap = gap.min(min);
        if min < zero_tol {
            return Err(LabError::ZeroMode { min_abs: min, tol: zero_tol });
        }
        let signs = Array2::from_diag(&vals.iter().map(|v| C64::new(v.signum(), 0.0)).collect::<ndarray::Array1<_>>());
        symbol.push(vecs.dot(&signs).dot(&vecs.t().mapv(|z| z.conj())));
    }
    let mut planner = FftPlanner::new();
    Ok(PeriodicFlattening {
        dim: d,
        size,
        fiber: n,
        symbol,
        gap,
        forward: planner.plan_fft_forward(size),
        inverse: planner.plan_fft_inverse(size),
    })
}

fn momentum(idx: usize, d: usize, size: usize) -> Vec<f64> {
    let mut k = vec![0.0; d];
    let mut rest = idx;
    for j in (0..d).rev() {
        k[j] = 2.0 * std::f64::consts::PI * (rest % size) as f64 / size as f64;
        rest /= size;
    }
    k
}

impl PeriodicFlattening {
    pub fn fiber_dim(&self) -> usize {
        self.fiber
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Smallest `|eigenvalue|` of the Bloch Hamiltonian over the grid.
    pub fn bloch_gap(&self) -> f64 {
        self.gap
    }

    fn fft(&self, data: &mut [C64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let p = self.size;
        match self.dim {
            1 => plan.process(data),
            _ => {
                for row in data.chunks_exact_mut(p) {
                    plan.process(row);
                }
                let mut col = vec![C64::new(0.0, 0.0); p];
                for c in 0..p {
                    for r in 0..p {
                        col[r] = data[r * p + c];
                    }
                    plan.process(&mut col);
                    for r in 0..p {
                        data[r * p + c] = col[r];
                    }
                }
            }
        }
    }

    fn grid_index(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &v| acc * self.size + (v as i64).rem_euclid(self.size as i64) as usize)
    }

    /// `H x` restricted to `sites`, with `x` a `(sites·n, cols)` array in
    /// `position · n + f` layout. The sites must map to distinct torus
    /// points.
    pub fn apply(&self, pattern: &Pattern, sites: &[usize], x: &Array2<C64>) -> Result<Array2<C64>> {
        let n = self.fiber;
        if pattern.dim() != self.dim || x.nrows() != sites.len() * n {
            return Err(LabError::Dimension("vector does not match the sites and fiber".into()));
        }
        let cells: Vec<usize> = sites.iter().map(|&s| self.grid_index(pattern.site(s))).collect();
        let mut sorted = cells.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(LabError::InvalidArgument(format!("sites wrap around the torus of size {}", self.size)));
        }
        let count = self.size.pow(self.dim as u32);
        let scale = 1.0 / count as f64;
        let mut out = Array2::zeros(x.dim());
        let mut grids = vec![vec![C64::new(0.0, 0.0); count]; n];
        for col in 0..x.ncols() {
            for g in grids.iter_mut() {
                g.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            }
            for (p, &c) in cells.iter().enumerate() {
                for (f, g) in grids.iter_mut().enumerate() {
                    g[c] = x[[p * n + f, col]];
                }
            }
            for g in grids.iter_mut() {
                self.fft(g, false);
            }
            let mut tmp = vec![C64::new(0.0, 0.0); n];
            for (k, s) in self.symbol.iter().enumerate() {
                for (a, t) in tmp.iter_mut().enumerate() {
                    *t = (0..n).map(|b| s[[a, b]] * grids[b][k]).sum();
                }
                for (a, t) in tmp.iter().enumerate() {
                    grids[a][k] = *t;
                }
            }
            for g in grids.iter_mut() {
                self.fft(g, true);
            }
            for (p, &c) in cells.iter().enumerate() {
                for (f, g) in grids.iter().enumerate() {
                    out[[p * n + f, col]] = g[c] * scale;
                }
            }
        }
        Ok(out)
    }

    /// Dense `⟨x| sgn h |y⟩` on `sites`, layout `position · n + f`.
    pub fn restrict(&self, pattern: &Pattern, sites: &[usize]) -> Result<Array2<C64>> {
        let n = self.fiber;
        if pattern.dim() != self.dim {
            return Err(LabError::Dimension("pattern and torus dimension differ".into()));
        }
        let span = (0..self.dim)
            .map(|j| {
                let coords = sites.iter().map(|&x| pattern.site(x)[j]);
                coords.clone().fold(f64::NEG_INFINITY, f64::max) - coords.fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        if 2.0 * span >= self.size as f64 {
            return Err(LabError::InvalidArgument(format!("sites span {span}, too wide for a torus of size {}", self.size)));
        }
        let kernel = self.kernel();
        let mut out = Array2::<C64>::zeros((sites.len() * n, sites.len() * n));
        for (p, &x) in sites.iter().enumerate() {
            for (q, &y) in sites.iter().enumerate() {
                let delta: Vec<f64> = pattern.site(x).iter().zip(pattern.site(y)).map(|(a, b)| a - b).collect();
                let k = &kernel[self.grid_index(&delta)];
                out.slice_mut(ndarray::s![p * n..(p + 1) * n, q * n..(q + 1) * n]).assign(k);
            }
        }
        Ok(out)
    }

    /// Real-space kernel `K(δ) = ⟨x + δ| sgn h |x⟩` on the torus, indexed
    /// like the momentum grid.
    fn kernel(&self) -> Vec<Array2<C64>> {
        let n = self.fiber;
        let count = self.symbol.len();
        let mut out = vec![Array2::<C64>::zeros((n, n)); count];
        let mut g = vec![C64::new(0.0, 0.0); count];
        for a in 0..n {
            for b in 0..n {
                for (k, s) in self.symbol.iter().enumerate() {
                    g[k] = s[[a, b]];
                }
                self.fft(&mut g, true);
                for (k, v) in g.iter().enumerate() {
                    out[k][[a, b]] = v / count as f64;
                }
            }
        }
        out
    }

    /// `‖[D, sgn h]‖` on the infinite lattice: the supremum over the grid of
    /// the symbol `Σ_j γ_j ⊗ FT(δ_j K(δ))`.
    pub fn commutator_symbol_norm(&self, rep: &CliffordRep) -> Result<f64> {
        if rep.dim() != self.dim {
            return Err(LabError::Dimension("Clifford representation and torus dimension differ".into()));
        }
        let n = self.fiber;
        let m = rep.matrix_size();
        let count = self.symbol.len();
        let kernel = self.kernel();
        let half = self.size as i64 / 2;
        let centered = |i: usize| {
            let v = i as i64;
            (if v > half { v - self.size as i64 } else { v }) as f64
        };
        let mut parts = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let mut part = vec![Array2::<C64>::zeros((n, n)); count];
            for a in 0..n {
                for b in 0..n {
                    let mut g: Vec<C64> = (0..count)
                        .map(|idx| {
                            let coord = (idx / self.size.pow((self.dim - 1 - j) as u32)) % self.size;
                            kernel[idx][[a, b]] * centered(coord)
                        })
                        .collect();
                    self.fft(&mut g, false);
                    for (k, v) in g.iter().enumerate() {
                        part[k][[a, b]] = *v;
                    }
                }
            }
            parts.push(part);
        }
        let mut best = 0.0_f64;
        for k in 0..count {
            let mut sym = Array2::<C64>::zeros((m * n, m * n));
            for (j, part) in parts.iter().enumerate() {
                let gamma = rep.gamma(j + 1);
                for c1 in 0..m {
                    for c2 in 0..m {
                        let g = gamma[[c1, c2]];
                        if g == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for a in 0..n {
                            for b in 0..n {
                                sym[[c1 * n + a, c2 * n + b]] += g * part[k][[a, b]];
                            }
                        }
                    }
                }
            }
            let (vals, _) = eigh(&sym.t().mapv(|z| z.conj()).dot(&sym))?;
            best = best.max(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt());
        }
        Ok(best)
    }
}
