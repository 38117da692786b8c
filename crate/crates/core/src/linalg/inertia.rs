//! Hermitian inertia through a Bunch–Kaufman `P A Pᵀ = L D L*`
//! factorization with 1×1 and 2×2 pivots.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::lanczos::{extreme_eigenvalues, LanczosOptions};
use super::structured::{MatrixData, Structure, StructuredMatrix};
use crate::error::{LabError, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    /// Smallest eigenvalue magnitude.
    pub gap: f64,
}

impl Inertia {
    /// Number of positive minus number of negative eigenvalues.
    pub fn signature(&self) -> i64 {
        self.positive as i64 - self.negative as i64
    }
}

/// Counts eigenvalue signs of a Hermitian (or real symmetric) matrix and its
/// smallest eigenvalue magnitude. Fails when that gap is below `gap_floor`.
pub fn inertia(m: &StructuredMatrix, gap_floor: f64) -> Result<Inertia> {
    if m.structure() == Structure::RealSkew {
        return Err(LabError::InvalidArgument("inertia needs a Hermitian matrix".into()));
    }
    let ldl = match m.data() {
        MatrixData::Complex(a) => HermitianLdl::factor(a),
        MatrixData::Real(a) => HermitianLdl::factor(&a.mapv(|x| C64::new(x, 0.0))),
    };
    let (positive, negative, zero) = ldl.inertia();
    if zero > 0 {
        return Err(LabError::NotInvertible { gap: 0.0, floor: gap_floor });
    }
    let gap = ldl.min_abs_eigenvalue()?;
    if gap < gap_floor {
        return Err(LabError::NotInvertible { gap, floor: gap_floor });
    }
    Ok(Inertia { positive, negative, gap })
}

#[derive(Clone, Copy, Debug)]
enum Pivot {
    One(usize),
    Two(usize),
}

/// Packed factorization; `a` holds `L` below the diagonal and `D` on the
/// diagonal blocks, column-major, lower triangle only.
pub struct HermitianLdl {
    n: usize,
    a: Vec<C64>,
    perm: Vec<usize>,
    pivots: Vec<Pivot>,
}

impl HermitianLdl {
    pub fn factor(m: &Array2<C64>) -> Self {
        let n = m.nrows();
        let mut a = vec![ZERO; n * n];
        for j in 0..n {
            for i in j..n {
                a[j * n + i] = m[[i, j]];
            }
            a[j * n + j] = C64::new(m[[j, j]].re, 0.0);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::new();
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let mut w1 = vec![ZERO; n];
        let mut w2 = vec![ZERO; n];

        let mut k = 0;
        while k < n {
            let absakk = a[k * n + k].re.abs();
            let (imax, colmax) = (k + 1..n)
                .map(|i| (i, cabs1(a[k * n + i])))
                .fold((k, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let mut kstep = 1;
            let mut kp = k;
            if absakk.max(colmax) > 0.0 && absakk < alpha * colmax {
                let mut rowmax = (k..imax).map(|j| cabs1(a[j * n + imax])).fold(0.0, f64::max);
                rowmax = (imax + 1..n).map(|i| cabs1(a[imax * n + i])).fold(rowmax, f64::max);
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    kp = k;
                } else if a[imax * n + imax].re.abs() >= alpha * rowmax {
                    kp = imax;
                } else {
                    kp = imax;
                    kstep = 2;
                }
            }
            let kk = k + kstep - 1;
            if kp != kk {
                swap_symmetric(&mut a, n, kk, kp);
                perm.swap(kk, kp);
            }

            if kstep == 1 {
                pivots.push(Pivot::One(k));
                let d = a[k * n + k].re;
                if d != 0.0 {
                    let (left, right) = a.split_at_mut((k + 1) * n);
                    let colk = &mut left[k * n..];
                    for j in k + 1..n {
                        let f = colk[j].conj() / d;
                        if f == ZERO {
                            continue;
                        }
                        let colj = &mut right[(j - k - 1) * n..(j - k) * n];
                        for i in j..n {
                            colj[i] -= colk[i] * f;
                        }
                    }
                    for x in colk[k + 1..n].iter_mut() {
                        *x /= d;
                    }
                }
            } else {
                pivots.push(Pivot::Two(k));
                let d11 = a[k * n + k].re;
                let d21 = a[k * n + k + 1];
                let d22 = a[(k + 1) * n + k + 1].re;
                let det = d11 * d22 - d21.norm_sqr();
                for i in k + 2..n {
                    let c1 = a[k * n + i];
                    let c2 = a[(k + 1) * n + i];
                    w1[i] = (c1 * d22 - c2 * d21) / det;
                    w2[i] = (c2 * d11 - c1 * d21.conj()) / det;
                }
                let (left, right) = a.split_at_mut((k + 2) * n);
                let (colk, colk1) = left[k * n..].split_at_mut(n);
                for j in k + 2..n {
                    let f1 = colk[j].conj();
                    let f2 = colk1[j].conj();
                    let colj = &mut right[(j - k - 2) * n..(j - k - 1) * n];
                    for i in j..n {
                        colj[i] -= w1[i] * f1 + w2[i] * f2;
                    }
                    colj[j].im = 0.0;
                }
                colk[k + 2..n].copy_from_slice(&w1[k + 2..n]);
                colk1[k + 2..n].copy_from_slice(&w2[k + 2..n]);
            }
            k += kstep;
        }
        Self { n, a, perm, pivots }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(positive, negative, zero)` eigenvalue counts, read off `D`.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let n = self.n;
        let (mut p, mut q, mut z) = (0, 0, 0);
        for piv in &self.pivots {
            match *piv {
                Pivot::One(k) => {
                    let d = self.a[k * n + k].re;
                    if d > 0.0 {
                        p += 1;
                    } else if d < 0.0 {
                        q += 1;
                    } else {
                        z += 1;
                    }
                }
                Pivot::Two(k) => {
                    let d11 = self.a[k * n + k].re;
                    let d22 = self.a[(k + 1) * n + k + 1].re;
                    let det = d11 * d22 - self.a[k * n + k + 1].norm_sqr();
                    if det < 0.0 {
                        p += 1;
                        q += 1;
                    } else if det > 0.0 {
                        if d11 + d22 > 0.0 {
                            p += 2;
                        } else {
                            q += 2;
                        }
                    } else {
                        z += 1;
                        if d11 + d22 > 0.0 {
                            p += 1;
                        } else if d11 + d22 < 0.0 {
                            q += 1;
                        } else {
                            z += 1;
                        }
                    }
                }
            }
        }
        (p, q, z)
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let a = &self.a;
        let mut y: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for piv in &self.pivots {
            let (k, s) = block(*piv);
            for m in k..k + s {
                let ym = y[m];
                if ym == ZERO {
                    continue;
                }
                let col = &a[m * n..(m + 1) * n];
                for i in k + s..n {
                    y[i] -= col[i] * ym;
                }
            }
        }
        for piv in &self.pivots {
            match *piv {
                Pivot::One(k) => y[k] /= a[k * n + k].re,
                Pivot::Two(k) => {
                    let d11 = a[k * n + k].re;
                    let d21 = a[k * n + k + 1];
                    let d22 = a[(k + 1) * n + k + 1].re;
                    let det = d11 * d22 - d21.norm_sqr();
                    let (u, v) = (y[k], y[k + 1]);
                    y[k] = (u * d22 - v * d21.conj()) / det;
                    y[k + 1] = (v * d11 - u * d21) / det;
                }
            }
        }
        for piv in self.pivots.iter().rev() {
            let (k, s) = block(*piv);
            for m in k..k + s {
                let col = &a[m * n..(m + 1) * n];
                let acc: C64 = (k + s..n).map(|i| col[i].conj() * y[i]).sum();
                y[m] -= acc;
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = y[i];
        }
    }

    /// Smallest eigenvalue magnitude, from Lanczos on the inverse.
    pub fn min_abs_eigenvalue(&self) -> Result<f64> {
        let ext = extreme_eigenvalues(
            self.n,
            |x, y| {
                y.copy_from_slice(x);
                self.solve_in_place(y);
            },
            LanczosOptions::default(),
        )?;
        Ok(1.0 / ext.max_abs())
    }
}

fn block(p: Pivot) -> (usize, usize) {
    match p {
        Pivot::One(k) => (k, 1),
        Pivot::Two(k) => (k, 2),
    }
}

fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Symmetric interchange of indices `p < q` in lower-triangular storage.
/// Columns left of `p` are swapped as rows (computed `L` and, for a 2×2
/// pivot, the unreduced column `k`).
fn swap_symmetric(a: &mut [C64], n: usize, p: usize, q: usize) {
    for j in 0..p {
        a.swap(j * n + p, j * n + q);
    }
    for i in q + 1..n {
        a.swap(p * n + i, q * n + i);
    }
    for j in p + 1..q {
        let t = a[p * n + j].conj();
        a[p * n + j] = a[j * n + q].conj();
        a[j * n + q] = t;
    }
    a[p * n + q] = a[p * n + q].conj();
    a.swap(p * n + p, q * n + q);
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use ndarray_linalg::{EigValsh, UPLO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Array2<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        &a + &a.t().mapv(|z| z.conj())
    }

    fn herm(m: Array2<C64>) -> StructuredMatrix {
        StructuredMatrix::new(m, Structure::Hermitian).unwrap()
    }

    #[test]
    fn diagonal_example() {
        let m = Array2::from_diag(&array![1.0, 1.0, -1.0]).mapv(|x| C64::new(x, 0.0));
        let r = inertia(&herm(m), 1e-6).unwrap();
        assert_eq!((r.positive, r.negative, r.signature()), (2, 1, 1));
        assert!((r.gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tiny_eigenvalue_is_rejected() {
        let m = Array2::from_diag(&array![1e-12, 1.0]).mapv(|x| C64::new(x, 0.0));
        assert!(matches!(inertia(&herm(m), 1e-6), Err(LabError::NotInvertible { .. })));
        let z = Array2::from_diag(&array![0.0, 1.0]).mapv(|x| C64::new(x, 0.0));
        assert!(matches!(inertia(&herm(z), 1e-6), Err(LabError::NotInvertible { .. })));
    }

    #[test]
    fn zero_diagonal_forces_two_by_two_pivots() {
        // every diagonal entry vanishes, so Bunch-Kaufman must use 2x2 blocks
        let m = array![
            [C64::new(0.0, 0.0), C64::new(1.0, 2.0), C64::new(0.5, 0.0)],
            [C64::new(1.0, -2.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)],
            [C64::new(0.5, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 0.0)]
        ];
        let vals = m.eigvalsh(UPLO::Lower).unwrap();
        let pos = vals.iter().filter(|&&v| v > 0.0).count();
        let r = inertia(&herm(m), 1e-10).unwrap();
        assert_eq!(r.positive, pos);
        assert_eq!(r.positive + r.negative, 3);
        let gap = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
        assert!((r.gap - gap).abs() < 1e-12);
    }

    #[test]
    fn matches_eigenvalue_oracle() {
        for seed in 0..5 {
            let m = random_hermitian(80, seed);
            let vals = m.eigvalsh(UPLO::Lower).unwrap();
            let r = inertia(&herm(m), 0.0).unwrap();
            assert_eq!(r.positive, vals.iter().filter(|&&v| v > 0.0).count());
            let gap = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            assert!((r.gap - gap).abs() <= 1e-10 * gap.max(1e-3), "seed {seed}: {} vs {gap}", r.gap);
        }
    }

    #[test]
    fn solve_recovers_vector() {
        let m = random_hermitian(60, 11);
        let ldl = HermitianLdl::factor(&m);
        let x: Array1<C64> = (0..60).map(|i| C64::new(i as f64, 1.0 - i as f64 * 0.1)).collect();
        let mut b = m.dot(&x).to_vec();
        ldl.solve_in_place(&mut b);
        let err = b.iter().zip(x.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
