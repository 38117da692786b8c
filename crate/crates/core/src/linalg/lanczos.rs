//! Lanczos iteration with full reorthogonalization for the extreme
//! eigenvalues of a Hermitian operator given only through its action.

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::{s, Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};

const START_SEED: u64 = 0x5eed_1a2c;

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Residual bound relative to the largest Ritz magnitude.
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iter: 400, tol: 1e-13 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExtremeEigenvalues {
    pub min: f64,
    pub max: f64,
    /// Upper bound on the distance of each value to the true eigenvalue.
    pub residual: f64,
    pub iterations: usize,
}

impl ExtremeEigenvalues {
    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// Smallest and largest eigenvalue of the Hermitian map `apply` on `ℂ^dim`.
/// The start vector is drawn from a fixed seed, so results are reproducible.
pub fn extreme_eigenvalues<F>(dim: usize, mut apply: F, opts: LanczosOptions) -> Result<ExtremeEigenvalues>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if dim == 0 {
        return Err(LabError::InvalidArgument("Lanczos on an empty space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let max_iter = opts.max_iter.min(dim).max(1);
    // rows are the Lanczos vectors, stored contiguously
    let mut basis = Array2::<C64>::zeros((max_iter, dim));
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mut v = random_unit(&mut rng, basis.slice(s![..0, ..]));
    let mut w = Array1::<C64>::zeros(dim);
    let mut last = None;
    for j in 0..max_iter {
        apply(v.as_slice().unwrap(), w.as_slice_mut().unwrap());
        let a: f64 = dot(v.as_slice().unwrap(), w.as_slice().unwrap()).re;
        w.scaled_add(C64::new(-a, 0.0), &v);
        if j > 0 {
            w.scaled_add(C64::new(-beta[j - 1], 0.0), &basis.row(j - 1));
        }
        basis.row_mut(j).assign(&v);
        let q = basis.slice(s![..=j, ..]);
        // Gram-Schmidt, repeated when cancellation was severe (DGKS)
        let before = norm(w.as_slice().unwrap());
        project_out(q, &mut w);
        let mut b = norm(w.as_slice().unwrap());
        if b < FRAC_1_SQRT_2 * before {
            project_out(q, &mut w);
            b = norm(w.as_slice().unwrap());
        }
        alpha.push(a);

        let done = j + 1 == max_iter;
        if j % 4 == 3 || done || b == 0.0 {
            let ritz = ritz_extremes(&alpha, &beta, b)?;
            let scale = ritz.min.abs().max(ritz.max.abs()).max(f64::MIN_POSITIVE);
            last = Some(ExtremeEigenvalues { iterations: j + 1, ..ritz });
            if ritz.residual <= opts.tol * scale || j + 1 == dim {
                break;
            }
        }
        if done {
            break;
        }
        let scale = alpha.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
        if b <= 1e-12 * scale {
            // invariant subspace: continue from a fresh orthogonal direction
            beta.push(0.0);
            v = random_unit(&mut rng, basis.slice(s![..=j, ..]));
        } else {
            beta.push(b);
            v = &w / C64::new(b, 0.0);
        }
    }
    last.ok_or_else(|| LabError::Linalg("Lanczos produced no Ritz values".into()))
}

/// Removes the span of the orthonormal rows of `q` from `w`, row by row, so
/// each row is still in cache for its update.
fn project_out(q: ArrayView2<C64>, w: &mut Array1<C64>) {
    let w = w.as_slice_mut().unwrap();
    for row in q.rows() {
        let row = row.to_slice().unwrap();
        let c = dot(row, w);
        for (wi, qi) in w.iter_mut().zip(row) {
            *wi -= c * qi;
        }
    }
}

/// Extreme eigenpairs of the Lanczos tridiagonal. Only the last component
/// of each eigenvector is needed, for the residual estimate.
fn ritz_extremes(alpha: &[f64], beta: &[f64], next_beta: f64) -> Result<ExtremeEigenvalues> {
    let k = alpha.len();
    let (min, zmin) = tridiagonal_eigenpair(alpha, beta, 1)?;
    let (max, zmax) = tridiagonal_eigenpair(alpha, beta, k)?;
    Ok(ExtremeEigenvalues {
        min,
        max,
        residual: (next_beta * zmin[k - 1]).abs().max((next_beta * zmax[k - 1]).abs()),
        iterations: k,
    })
}

/// The `which`-th smallest (1-based) eigenvalue and its eigenvector, via dstevx.
fn tridiagonal_eigenpair(diag: &[f64], off: &[f64], which: usize) -> Result<(f64, Vec<f64>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = off[..n - 1].to_vec();
    e.push(0.0);
    let (ni, il) = (n as i32, which as i32);
    let (vl, vu, abstol) = (0.0, 0.0, 0.0);
    let mut found = 0i32;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut work = vec![0.0; 5 * n];
    let mut iwork = vec![0i32; 5 * n];
    let mut ifail = vec![0i32; n];
    let mut info = 0i32;
    unsafe {
        lapack_sys::dstevx_(
            c"V".as_ptr(),
            c"I".as_ptr(),
            &ni,
            d.as_mut_ptr(),
            e.as_mut_ptr(),
            &vl,
            &vu,
            &il,
            &il,
            &abstol,
            &mut found,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &ni,
            work.as_mut_ptr(),
            iwork.as_mut_ptr(),
            ifail.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 || found != 1 {
        return Err(LabError::Linalg(format!("dstevx failed (info {info})")));
    }
    Ok((w[0], z))
}

fn random_unit(rng: &mut ChaCha8Rng, basis: ArrayView2<C64>) -> Array1<C64> {
    let dim = basis.ncols();
    let mut v: Array1<C64> =
        (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    project_out(basis, &mut v);
    project_out(basis, &mut v);
    let n = norm(v.as_slice().unwrap());
    v.mapv_inplace(|x| x / n);
    v
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
