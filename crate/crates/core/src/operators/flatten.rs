use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::block::BlockOperator;
use crate::error::{LabError, Result};
use crate::lattice::{Pattern, Region};
use crate::linalg::{eigh, HermitianLdl};

pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Dense Hamiltonian on a window, stored per connected component of its
/// coupling graph. Usually the flattening `sgn(h)`; the unflattened
/// restriction is available for spectrally gapped inputs.
#[derive(Clone, Debug)]
pub struct FlattenedHamiltonian {
    pattern: Arc<Pattern>,
    fiber: usize,
    window: Region,
    sites: Vec<usize>,
    /// pattern index → position in `sites`, `usize::MAX` outside
    position: Vec<usize>,
    components: Vec<Component>,
    /// dense window index → (component, local index)
    locate: Vec<(usize, usize)>,
    gap: f64,
    flattened: bool,
}

#[derive(Clone, Debug)]
struct Component {
    indices: Vec<usize>,
    matrix: Array2<C64>,
}

/// `sgn(h)` on the window via dense eigendecomposition of each decoupled
/// component. Fails with a zero-mode error when some `|eigenvalue|` is below
/// `zero_tol`; the smallest magnitude is recorded as the gap.
pub fn spectral_flatten(h: &BlockOperator, window: &Region, zero_tol: f64) -> Result<FlattenedHamiltonian> {
    build(h, window, Some(zero_tol))
}

impl FlattenedHamiltonian {
    /// Plain restriction of `h` to the window, with its smallest
    /// `|eigenvalue|` as gap.
    pub fn unflattened(h: &BlockOperator, window: &Region) -> Result<Self> {
        build(h, window, None)
    }

    /// Wraps an already flattened dense operator on `sites` (layout
    /// `position · n + f`), e.g. a torus flattening restricted to a ball.
    pub fn from_dense(pattern: Arc<Pattern>, fiber: usize, sites: Vec<usize>, matrix: Array2<C64>, gap: f64) -> Result<Self> {
        let m = sites.len() * fiber;
        if matrix.dim() != (m, m) {
            return Err(LabError::Dimension(format!("dense flattening must be {m}×{m}")));
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) || sites.last().is_some_and(|&s| s >= pattern.len()) {
            return Err(LabError::InvalidArgument("sites must be increasing pattern indices".into()));
        }
        let mut position = vec![usize::MAX; pattern.len()];
        for (k, &s) in sites.iter().enumerate() {
            position[s] = k;
        }
        Ok(Self {
            pattern,
            fiber,
            window: Region::Sites(sites.clone()),
            sites,
            position,
            components: vec![Component { indices: (0..m).collect(), matrix }],
            locate: (0..m).map(|i| (0, i)).collect(),
            gap,
            flattened: true,
        })
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber
    }

    pub fn window(&self) -> &Region {
        &self.window
    }

    /// Window sites in pattern order.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn dim(&self) -> usize {
        self.sites.len() * self.fiber
    }

    /// Smallest `|eigenvalue|` of the source restriction.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn is_flattened(&self) -> bool {
        self.flattened
    }

    /// Operator-norm bound: 1 when flattened.
    pub fn norm(&self) -> f64 {
        if self.flattened {
            1.0
        } else {
            self.components
                .iter()
                .map(|c| c.matrix.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max))
                .fold(0.0, f64::max)
        }
    }

    pub fn position(&self, site: usize) -> Option<usize> {
        self.position.get(site).copied().filter(|&p| p != usize::MAX)
    }

    pub fn component_sizes(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.indices.len()).collect()
    }

    /// Entry between dense window indices.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        let (ci, li) = self.locate[i];
        let (cj, lj) = self.locate[j];
        if ci == cj {
            self.components[ci].matrix[[li, lj]]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `⟨x|H|y⟩` for window positions `px`, `py`.
    pub fn block(&self, px: usize, py: usize) -> Array2<C64> {
        let n = self.fiber;
        Array2::from_shape_fn((n, n), |(a, b)| self.entry(px * n + a, py * n + b))
    }

    /// Dense restriction to pattern sites `sites`, layout `pos · n + f`.
    pub fn restrict(&self, sites: &[usize]) -> Result<Array2<C64>> {
        let n = self.fiber;
        let mut idx = Vec::with_capacity(sites.len() * n);
        for &s in sites {
            let p = self.position(s).ok_or_else(|| {
                LabError::WindowExhausted(format!("site {s} lies outside the Hamiltonian window"))
            })?;
            idx.extend((0..n).map(|f| p * n + f));
        }
        let m = idx.len();
        let mut out = Array2::zeros((m, m));
        // group requested indices by component to copy sub-blocks
        for (a, &i) in idx.iter().enumerate() {
            let (ci, li) = self.locate[i];
            let row = self.components[ci].matrix.row(li);
            for (b, &j) in idx.iter().enumerate() {
                let (cj, lj) = self.locate[j];
                if cj == ci {
                    out[[a, b]] = row[lj];
                }
            }
        }
        Ok(out)
    }

    /// Full dense matrix on the window.
    pub fn to_dense(&self) -> Array2<C64> {
        let m = self.dim();
        let mut out = Array2::zeros((m, m));
        for c in &self.components {
            for (a, &i) in c.indices.iter().enumerate() {
                for (b, &j) in c.indices.iter().enumerate() {
                    out[[i, j]] = c.matrix[[a, b]];
                }
            }
        }
        out
    }

    /// `y = H x` on dense window vectors stored as `(dim, cols)` matrices.
    pub fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        let cols = x.ncols();
        let mut y = Array2::zeros((self.dim(), cols));
        for c in &self.components {
            let xs = Array2::from_shape_fn((c.indices.len(), cols), |(a, k)| x[[c.indices[a], k]]);
            let ys = c.matrix.dot(&xs);
            for (a, &i) in c.indices.iter().enumerate() {
                y.row_mut(i).assign(&ys.row(a));
            }
        }
        y
    }

    /// `max |(H² − 1)_{ij}|`.
    pub fn involution_defect(&self) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let sq = c.matrix.dot(&c.matrix);
                sq.indexed_iter()
                    .map(|((i, j), z)| (z - if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// The window matrix as a block operator on the same pattern.
    pub fn to_block_operator(&self, drop_below: f64) -> Result<BlockOperator> {
        let mut op = BlockOperator::new(self.pattern.clone(), self.fiber);
        for (px, &x) in self.sites.iter().enumerate() {
            for (py, &y) in self.sites.iter().enumerate() {
                let b = self.block(px, py);
                if b.iter().any(|z| z.norm() > drop_below) {
                    op.add_block(x, y, &b)?;
                }
            }
        }
        Ok(op)
    }
}

fn build(h: &BlockOperator, window: &Region, zero_tol: Option<f64>) -> Result<FlattenedHamiltonian> {
    let pattern = h.pattern().clone();
    let n = h.fiber_dim();
    let sites = window.select(&pattern);
    if sites.is_empty() {
        return Err(LabError::InvalidArgument("flattening window contains no sites".into()));
    }
    let mut position = vec![usize::MAX; pattern.len()];
    for (k, &s) in sites.iter().enumerate() {
        position[s] = k;
    }
    let m = sites.len() * n;

    // connected components of the coupling graph on (site, fiber) indices
    let mut uf = UnionFind::new(m);
    for (px, &x) in sites.iter().enumerate() {
        for (&y, b) in h.row(x) {
            let py = position[y];
            if py == usize::MAX {
                continue;
            }
            for ((a, c), z) in b.indexed_iter() {
                if *z != C64::new(0.0, 0.0) {
                    uf.union(px * n + a, py * n + c);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of_root = vec![usize::MAX; m];
    for i in 0..m {
        let r = uf.find(i);
        if group_of_root[r] == usize::MAX {
            group_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of_root[r]].push(i);
    }

    let mut locate = vec![(0, 0); m];
    let mut components = Vec::with_capacity(groups.len());
    let mut gap = f64::INFINITY;
    for (ci, indices) in groups.into_iter().enumerate() {
        let k = indices.len();
        let mut local = Array2::<C64>::zeros((k, k));
        for (a, &i) in indices.iter().enumerate() {
            locate[i] = (ci, a);
        }
        for (a, &i) in indices.iter().enumerate() {
            let (px, fa) = (i / n, i % n);
            for (&y, b) in h.row(sites[px]) {
                let py = position[y];
                if py == usize::MAX {
                    continue;
                }
                for fc in 0..n {
                    let z = b[[fa, fc]];
                    if z != C64::new(0.0, 0.0) {
                        local[[a, locate[py * n + fc].1]] = z;
                    }
                }
            }
        }
        let matrix = match zero_tol {
            Some(tol) => {
                let (vals, vecs) = eigh(&local)?;
                let min_abs = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
                if min_abs < tol {
                    return Err(LabError::ZeroMode { min_abs, tol });
                }
                gap = gap.min(min_abs);
                let mut scaled = vecs.clone();
                for (mut col, v) in scaled.columns_mut().into_iter().zip(&vals) {
                    if *v < 0.0 {
                        col.mapv_inplace(|z| -z);
                    }
                }
                let vh = vecs.t().mapv(|z| z.conj());
                let f = scaled.dot(&vh);
                // exact Hermitian symmetrization of the product
                (&f + &f.t().mapv(|z| z.conj())) * C64::new(0.5, 0.0)
            }
            None => {
                gap = gap.min(HermitianLdl::factor(&local).min_abs_eigenvalue()?);
                local
            }
        };
        components.push(Component { indices, matrix });
    }
    Ok(FlattenedHamiltonian {
        pattern,
        fiber: n,
        window: window.clone(),
        sites,
        position,
        components,
        locate,
        gap,
        flattened: zero_tol.is_some(),
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, so component order follows index order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
