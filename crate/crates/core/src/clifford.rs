//! Irreducible representation of the complex Clifford algebra with `d`
//! generators, built by the odd-to-odd recursion
//!
//! ```text
//! γ_i ↦ [[0, σ_i], [σ_i, 0]]  (i ≤ d),   γ_{d+1} = [[0, i], [-i, 0]],   γ_{d+2} = diag(1, -1)
//! ```
//!
//! starting from `γ_1 = (1)` in `d = 1`. Even `d` drops the last generator of
//! the `d + 1` representation. In this representation odd-indexed generators
//! are real and even-indexed ones purely imaginary, which is what the real
//! symmetry operators `Σ`, `Σ̂`, `Ω` rely on.

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;

use crate::error::{LabError, Result};

const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct CliffordRep {
    dim: usize,
    generators: Vec<Array2<C64>>,
}

impl CliffordRep {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `d' = 2^⌊d/2⌋`.
    pub fn matrix_size(&self) -> usize {
        1 << (self.dim / 2)
    }

    pub fn generators(&self) -> &[Array2<C64>] {
        &self.generators
    }

    /// Generator `γ_i` with the 1-based index used throughout the literature.
    pub fn gamma(&self, i: usize) -> &Array2<C64> {
        &self.generators[i - 1]
    }

    /// Clifford vector `x·γ = Σ_j x_j γ_j` for real `x`.
    pub fn clifford_vector(&self, x: &[f64]) -> Array2<C64> {
        assert_eq!(x.len(), self.dim, "vector length must equal d");
        let m = self.matrix_size();
        let mut out = Array2::zeros((m, m));
        for (g, &xj) in self.generators.iter().zip(x) {
            out.scaled_add(C64::new(xj, 0.0), g);
        }
        out
    }

    /// Maximum entrywise deviation from the Clifford relations
    /// `{γ_i, γ_j} = 2 δ_ij`, self-adjointness and the real/imaginary parity.
    pub fn relation_defect(&self) -> f64 {
        let m = self.matrix_size();
        let id = Array2::<C64>::eye(m);
        let mut worst = 0.0_f64;
        for (i, gi) in self.generators.iter().enumerate() {
            worst = worst.max(max_abs_diff(gi, &adjoint(gi)));
            // 0-based even index is a 1-based odd generator: real.
            let parity = if i % 2 == 0 {
                gi.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
            } else {
                gi.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
            };
            worst = worst.max(parity);
            for (j, gj) in self.generators.iter().enumerate() {
                let anti = gi.dot(gj) + gj.dot(gi);
                let target = if i == j { &id * C64::new(2.0, 0.0) } else { Array2::zeros((m, m)) };
                worst = worst.max(max_abs_diff(&anti, &target));
            }
        }
        worst
    }
}

/// Builds the recursive representation for `d ≥ 1`.
pub fn build_clifford_rep(d: usize) -> Result<CliffordRep> {
    if d == 0 {
        return Err(LabError::InvalidArgument("Clifford dimension must be at least 1".into()));
    }
    let mut odd = CliffordRep { dim: 1, generators: vec![Array2::from_elem((1, 1), ONE)] };
    let target_odd = if d % 2 == 1 { d } else { d + 1 };
    while odd.dim < target_odd {
        odd = extend_by_two(&odd);
        let defect = odd.relation_defect();
        if defect != 0.0 {
            return Err(LabError::Linalg(format!(
                "Clifford recursion broke the relations at d = {} (defect {defect:e})",
                odd.dim
            )));
        }
    }
    if d % 2 == 0 {
        odd.generators.pop();
        odd.dim = d;
    }
    Ok(odd)
}

fn extend_by_two(rep: &CliffordRep) -> CliffordRep {
    let m = rep.matrix_size();
    let big = 2 * m;
    let mut generators = Vec::with_capacity(rep.dim + 2);
    for sigma in &rep.generators {
        let mut g = Array2::zeros((big, big));
        g.slice_mut(s![..m, m..]).assign(sigma);
        g.slice_mut(s![m.., ..m]).assign(sigma);
        generators.push(g);
    }
    let mut imag = Array2::zeros((big, big));
    let mut diag = Array2::zeros((big, big));
    for k in 0..m {
        imag[[k, m + k]] = I;
        imag[[m + k, k]] = -I;
        diag[[k, k]] = ONE;
        diag[[m + k, m + k]] = -ONE;
    }
    generators.push(imag);
    generators.push(diag);
    CliffordRep { dim: rep.dim + 2, generators }
}

/// Real symmetry operators attached to the representation. The even-only
/// fields are `None` for odd `d`.
#[derive(Clone, Debug)]
pub struct CliffordSymmetryOps {
    pub sigma: Array2<C64>,
    pub sigma_hat: Option<Array2<C64>>,
    pub omega: Option<Array2<C64>>,
    pub chiral: Option<Array2<C64>>,
}

/// `Σ = i^⌊d/2⌋ γ_2 γ_4 ⋯`, `Σ̂ = (-1)^⌊d/2⌋ γ_1 γ_3 ⋯`, `Ω = i^⌊d/2⌋ γ_1 ⋯ γ_d`
/// and the grading `γ_0 = i^{d/2} γ_1 ⋯ γ_d`.
///
/// `Σ` and `Σ̂` are real orthogonal; whether they are symmetric or
/// antisymmetric depends on `⌊d/2⌋ mod 4` (for `d = 2` the operator `Σ` is
/// antisymmetric). The conjugation relations hold in every case.
pub fn symmetry_ops(rep: &CliffordRep) -> CliffordSymmetryOps {
    let d = rep.dim();
    let k = d / 2;
    let m = rep.matrix_size();
    let phase = I.powu(k as u32);
    let product = |indices: &mut dyn Iterator<Item = usize>| {
        indices.fold(Array2::<C64>::eye(m), |acc, i| acc.dot(rep.gamma(i)))
    };

    let sigma = product(&mut (1..=k).map(|j| 2 * j)) * phase;
    if d % 2 == 1 {
        return CliffordSymmetryOps { sigma, sigma_hat: None, omega: None, chiral: None };
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let sigma_hat = product(&mut (1..=k).map(|j| 2 * j - 1)) * C64::new(sign, 0.0);
    let omega = product(&mut (1..=d)) * phase;
    let chiral = omega.clone();
    CliffordSymmetryOps { sigma, sigma_hat: Some(sigma_hat), omega: Some(omega), chiral: Some(chiral) }
}

pub(crate) fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

#[cfg(test)]
fn conjugate(a: &Array2<C64>) -> Array2<C64> {
    a.mapv(|z| z.conj())
}

pub(crate) fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
