use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::pauli::{adjoint, max_abs};
use crate::error::{LabError, Result};
use crate::lattice::{dist, Pattern};

/// Operator on `ℓ²(pattern) ⊗ ℂⁿ` stored as `n×n` blocks `⟨x|h|y⟩`,
/// indexed by row site then column site.
#[derive(Clone, Debug)]
pub struct BlockOperator {
    pattern: Arc<Pattern>,
    fiber: usize,
    rows: Vec<BTreeMap<usize, Array2<C64>>>,
}

impl BlockOperator {
    pub fn new(pattern: Arc<Pattern>, fiber: usize) -> Self {
        let rows = vec![BTreeMap::new(); pattern.len()];
        Self { pattern, fiber, rows }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber
    }

    /// Dense dimension `|sites| · n`.
    pub fn dim(&self) -> usize {
        self.pattern.len() * self.fiber
    }

    pub fn block(&self, x: usize, y: usize) -> Option<&Array2<C64>> {
        self.rows[x].get(&y)
    }

    pub fn row(&self, x: usize) -> &BTreeMap<usize, Array2<C64>> {
        &self.rows[x]
    }

    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize, &Array2<C64>)> {
        self.rows.iter().enumerate().flat_map(|(x, r)| r.iter().map(move |(&y, b)| (x, y, b)))
    }

    pub fn block_count(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// Adds `b` to `⟨x|h|y⟩`.
    pub fn add_block(&mut self, x: usize, y: usize, b: &Array2<C64>) -> Result<()> {
        if b.dim() != (self.fiber, self.fiber) {
            return Err(LabError::Dimension(format!("block is {:?}, fiber is {}", b.dim(), self.fiber)));
        }
        if x >= self.rows.len() || y >= self.rows.len() {
            return Err(LabError::Dimension(format!("site pair ({x}, {y}) outside the pattern")));
        }
        match self.rows[x].get_mut(&y) {
            Some(cur) => *cur += b,
            None => {
                self.rows[x].insert(y, b.clone());
            }
        }
        Ok(())
    }

    /// Adds the hopping `b` from `y` to `x` together with its adjoint.
    pub fn add_hopping(&mut self, x: usize, y: usize, b: &Array2<C64>) -> Result<()> {
        self.add_block(x, y, b)?;
        self.add_block(y, x, &adjoint(b))
    }

    /// Max over blocks of `|⟨x|h|y⟩ − ⟨y|h|x⟩*|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let zero = Array2::zeros((self.fiber, self.fiber));
        let mut worst = 0.0_f64;
        for (x, y, b) in self.blocks() {
            let other = self.block(y, x).unwrap_or(&zero);
            worst = worst.max(max_abs(&(b - &adjoint(other))));
        }
        worst
    }

    /// Largest Euclidean distance between coupled sites.
    pub fn hopping_range(&self) -> f64 {
        self.blocks()
            .map(|(x, y, _)| dist(self.pattern.site(x), self.pattern.site(y)))
            .fold(0.0, f64::max)
    }

    /// `a·self + b·other` on the same pattern and fiber.
    pub fn combine(&self, a: f64, other: &BlockOperator, b: f64) -> Result<BlockOperator> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && self.pattern.len() != other.pattern.len() {
            return Err(LabError::Dimension("operators live on different patterns".into()));
        }
        if self.fiber != other.fiber {
            return Err(LabError::Dimension("operators have different fibers".into()));
        }
        let mut out = BlockOperator::new(self.pattern.clone(), self.fiber);
        for (x, y, blk) in self.blocks() {
            out.add_block(x, y, &(blk * C64::new(a, 0.0)))?;
        }
        for (x, y, blk) in other.blocks() {
            out.add_block(x, y, &(blk * C64::new(b, 0.0)))?;
        }
        Ok(out)
    }

    /// Dense restriction to `sites` (any order), layout `pos · n + f`.
    pub fn restrict_dense(&self, sites: &[usize]) -> Array2<C64> {
        let n = self.fiber;
        let mut pos = vec![usize::MAX; self.rows.len()];
        for (k, &s) in sites.iter().enumerate() {
            pos[s] = k;
        }
        let mut out = Array2::zeros((sites.len() * n, sites.len() * n));
        for (i, &x) in sites.iter().enumerate() {
            for (&y, b) in &self.rows[x] {
                let j = pos[y];
                if j == usize::MAX {
                    continue;
                }
                out.slice_mut(ndarray::s![i * n..(i + 1) * n, j * n..(j + 1) * n]).assign(b);
            }
        }
        out
    }

    /// Row-sum bound on the operator norm, using Frobenius block norms.
    pub fn norm_bound(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.values().map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
