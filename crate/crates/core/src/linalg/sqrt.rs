use ndarray::{s, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{LabError, Result};

const TOL: f64 = 1e-10;
/// Mixing weight for the joint diagonalization of `Re Q` and `Im Q`.
const MIX: f64 = std::f64::consts::SQRT_2 - 1.0;

/// Principal square root `R` of a symmetric unitary `Q` with `R = Rᵀ`.
///
/// A symmetric unitary has commuting real and imaginary parts, so both are
/// diagonalized by one real orthogonal `V`; then `R = V √Λ Vᵀ` with the
/// branch cut on the negative real axis (`√-1 = i`). A non-symmetric `Q`
/// has no symmetric square root, since `R = Rᵀ` forces `R²` symmetric.
pub fn symmetric_unitary_sqrt(q: &Array2<C64>) -> Result<Array2<C64>> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(LabError::Dimension("square root of a non-square matrix".into()));
    }
    let qh = q.t().mapv(|z| z.conj());
    let unit_err = max_dev(&qh.dot(q), &Array2::<C64>::eye(n));
    if unit_err > TOL {
        return Err(LabError::InvalidArgument(format!("Q is not unitary (deviation {unit_err:.2e})")));
    }
    let sym_err = max_dev(q, &q.t().to_owned());
    if sym_err > TOL {
        return Err(LabError::InvalidArgument(format!(
            "Q is not symmetric (deviation {sym_err:.2e}); no symmetric square root exists"
        )));
    }
    let re = q.mapv(|z| z.re);
    let im = q.mapv(|z| z.im);
    let mixed = &re + &(&im * MIX);
    let (mu, mut v) = mixed.eigh(UPLO::Lower)?;

    // refine degenerate clusters of the mixed matrix by diagonalizing Im Q there
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (mu[end] - mu[start]).abs() < 1e-9 {
            end += 1;
        }
        if end - start > 1 {
            let vc = v.slice(s![.., start..end]).to_owned();
            let sub = vc.t().dot(&im).dot(&vc);
            let sub = (&sub + &sub.t()) * 0.5;
            let (_, w) = sub.eigh(UPLO::Lower)?;
            v.slice_mut(s![.., start..end]).assign(&vc.dot(&w));
        }
        start = end;
    }

    let vc = v.mapv(|x| C64::new(x, 0.0));
    let diag = vc.t().dot(q).dot(&vc);
    let mut roots = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        let mut lam = diag[[k, k]];
        if lam.im == 0.0 {
            lam.im = 0.0; // drops a signed zero so that √-1 = +i
        }
        roots[[k, k]] = lam.sqrt();
    }
    let r = vc.dot(&roots).dot(&vc.t());
    let r = (&r + &r.t()) * C64::new(0.5, 0.0);
    let err = max_dev(&r.dot(&r), q);
    if err > TOL {
        return Err(LabError::Linalg(format!("square root check failed: |R² − Q| = {err:.2e}")));
    }
    Ok(r)
}

fn max_dev(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
