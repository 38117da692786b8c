//! Thin LAPACK wrappers: divide-and-conquer Hermitian eigensolver and
//! banded Hermitian eigenvalues and inverse iteration.

use ndarray::{Array2, ShapeBuilder};
use num_complex::Complex64 as C64;
use std::os::raw::{c_char, c_int};

use super::lanczos::{extreme_eigenvalues, LanczosOptions};
use crate::error::{LabError, Result};

type LapackComplex = lapack_sys::__BindgenComplex<f64>;

fn as_lapack(p: *mut C64) -> *mut LapackComplex {
    // num_complex::Complex is repr(C) { re, im }, same layout as LAPACK's
    p.cast()
}

fn to_int(n: usize) -> Result<c_int> {
    c_int::try_from(n).map_err(|_| LabError::Budget(format!("dimension {n} exceeds LAPACK index range")))
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix,
/// read from its lower triangle.
pub fn eigh(m: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(LabError::Dimension("eigh of a non-square matrix".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    let mut a: Vec<C64> = m.t().iter().copied().collect(); // column-major copy
    let ni = to_int(n)?;
    let mut w = vec![0.0; n];
    let mut info: c_int = 0;
    let (jobz, uplo) = (b'V' as c_char, b'L' as c_char);

    // workspace query
    let mut wq = C64::new(0.0, 0.0);
    let mut rq = 0.0;
    let mut iq: c_int = 0;
    let minus1: c_int = -1;
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &ni, as_lapack(a.as_mut_ptr()), &ni, w.as_mut_ptr(),
            as_lapack(&mut wq), &minus1, &mut rq, &minus1, &mut iq, &minus1, &mut info,
        );
    }
    if info != 0 {
        return Err(LabError::Linalg(format!("zheevd workspace query failed (info {info})")));
    }
    let lwork = wq.re as usize;
    let lrwork = rq as usize;
    let liwork = iq as usize;
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1)];
    let mut rwork = vec![0.0; lrwork.max(1)];
    let mut iwork: Vec<c_int> = vec![0; liwork.max(1)];
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &ni, as_lapack(a.as_mut_ptr()), &ni, w.as_mut_ptr(),
            as_lapack(work.as_mut_ptr()), &to_int(lwork)?, rwork.as_mut_ptr(), &to_int(lrwork)?,
            iwork.as_mut_ptr(), &to_int(liwork)?, &mut info,
        );
    }
    if info != 0 {
        return Err(LabError::Linalg(format!("zheevd failed (info {info})")));
    }
    let v = Array2::from_shape_vec((n, n).f(), a).map_err(|e| LabError::Linalg(e.to_string()))?;
    Ok((w, v))
}

/// Lower band of a Hermitian matrix, `kd` sub-diagonals.
#[derive(Clone, Debug)]
pub struct HermitianBand {
    n: usize,
    kd: usize,
    ab: Vec<C64>,
}

impl HermitianBand {
    pub fn new(n: usize, kd: usize) -> Self {
        Self { n, kd, ab: vec![C64::new(0.0, 0.0); (kd + 1) * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    /// Adds `v` to entry `(i, j)` with `i ≥ j`, `i - j ≤ kd`.
    pub fn add(&mut self, i: usize, j: usize, v: C64) -> Result<()> {
        if i < j || i - j > self.kd || i >= self.n {
            return Err(LabError::Dimension(format!("entry ({i}, {j}) outside the lower band {}", self.kd)));
        }
        self.ab[j * (self.kd + 1) + (i - j)] += v;
        Ok(())
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(mut self) -> Result<Vec<f64>> {
        let n = self.n;
        if n == 0 {
            return Ok(Vec::new());
        }
        let ni = to_int(n)?;
        let kd = to_int(self.kd)?;
        let ldab = to_int(self.kd + 1)?;
        let one: c_int = 1;
        let mut w = vec![0.0; n];
        let mut z = C64::new(0.0, 0.0);
        let mut work = vec![C64::new(0.0, 0.0); n];
        let mut rwork = vec![0.0; (3 * n).saturating_sub(2).max(1)];
        let mut info: c_int = 0;
        unsafe {
            lapack_sys::zhbev_(
                &(b'N' as c_char), &(b'L' as c_char), &ni, &kd, as_lapack(self.ab.as_mut_ptr()), &ldab,
                w.as_mut_ptr(), as_lapack(&mut z), &one, as_lapack(work.as_mut_ptr()), rwork.as_mut_ptr(),
                &mut info,
            );
        }
        if info != 0 {
            return Err(LabError::Linalg(format!("zhbev failed (info {info})")));
        }
        Ok(w)
    }

    /// Smallest eigenvalue magnitude, by Lanczos on the inverse through a
    /// banded LU factorization. Costs `O(n kd²)` instead of the `O(n² kd)`
    /// band reduction behind [`Self::eigenvalues`].
    pub fn min_abs_eigenvalue(&self) -> Result<f64> {
        let (n, kd) = (self.n, self.kd);
        if n == 0 {
            return Err(LabError::InvalidArgument("empty band matrix".into()));
        }
        // general band storage with kd extra rows for the LU fill-in
        let ldab = 3 * kd + 1;
        let mut ab = vec![C64::new(0.0, 0.0); ldab * n];
        for j in 0..n {
            for i in j..(j + kd + 1).min(n) {
                let v = self.ab[j * (kd + 1) + (i - j)];
                ab[j * ldab + 2 * kd + i - j] = v;
                ab[i * ldab + 2 * kd + j - i] = v.conj();
            }
        }
        let (ni, kdi, ldabi) = (to_int(n)?, to_int(kd)?, to_int(ldab)?);
        let mut ipiv = vec![0 as c_int; n];
        let mut info: c_int = 0;
        unsafe {
            lapack_sys::zgbtrf_(&ni, &ni, &kdi, &kdi, as_lapack(ab.as_mut_ptr()), &ldabi, ipiv.as_mut_ptr(), &mut info);
        }
        if info > 0 {
            return Ok(0.0);
        }
        if info < 0 {
            return Err(LabError::Linalg(format!("zgbtrf failed (info {info})")));
        }
        let one: c_int = 1;
        let mut fail: c_int = 0;
        let ext = extreme_eigenvalues(
            n,
            |x, y| {
                y.copy_from_slice(x);
                let mut info: c_int = 0;
                unsafe {
                    lapack_sys::zgbtrs_(
                        &(b'N' as c_char), &ni, &kdi, &kdi, &one, as_lapack(ab.as_ptr() as *mut C64), &ldabi,
                        ipiv.as_ptr(), as_lapack(y.as_mut_ptr()), &ni, &mut info,
                    );
                }
                fail = fail.min(info);
            },
            LanczosOptions::default(),
        )?;
        if fail != 0 {
            return Err(LabError::Linalg(format!("zgbtrs failed (info {fail})")));
        }
        Ok(1.0 / ext.max_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::{EigValsh, UPLO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array2::from_shape_fn((30, 30), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = &a + &a.t().mapv(|z| z.conj());
        let (w, v) = eigh(&h).unwrap();
        let d = Array2::from_diag(&ndarray::Array1::from(w.clone())).mapv(|x| C64::new(x, 0.0));
        let back = v.dot(&d).dot(&v.t().mapv(|z| z.conj()));
        let err = back.iter().zip(h.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        let oracle = h.eigvalsh(UPLO::Lower).unwrap();
        for (x, y) in w.iter().zip(oracle.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, kd) = (40, 3);
        let mut dense = Array2::<C64>::zeros((n, n));
        let mut band = HermitianBand::new(n, kd);
        for j in 0..n {
            for i in j..(j + kd + 1).min(n) {
                let v = if i == j {
                    C64::new(rng.random_range(-1.0..1.0), 0.0)
                } else {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                };
                dense[[i, j]] = v;
                dense[[j, i]] = v.conj();
                band.add(i, j, v).unwrap();
            }
        }
        assert!(band.add(10, 2, C64::new(1.0, 0.0)).is_err());
        let min_abs = band.min_abs_eigenvalue().unwrap();
        let got = band.eigenvalues().unwrap();
        let want_min = got.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        assert!((min_abs - want_min).abs() < 1e-10 * want_min.max(1e-3), "{min_abs} vs {want_min}");
        let want = dense.eigvalsh(UPLO::Lower).unwrap();
        for (x, y) in got.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
