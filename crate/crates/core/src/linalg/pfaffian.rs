//! Pfaffians of real skew-symmetric matrices by Parlett–Reid elimination
//! with partial pivoting.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::lanczos::{extreme_eigenvalues, LanczosOptions};
use super::structured::{MatrixData, Structure, StructuredMatrix};
use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PfaffianValue {
    pub sign: i8,
    /// `ln |Pf|`; `-inf` when the Pfaffian vanishes.
    pub log_abs: f64,
}

impl PfaffianValue {
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.log_abs.exp()
    }
}

/// Sign of the Pfaffian together with the smallest singular value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PfaffianSign {
    pub sign: i8,
    pub gap: f64,
}

/// Sign of `Pf(M)` for a real skew matrix; fails for odd dimension or when
/// the smallest singular value is below `gap_floor`.
pub fn pfaffian_sign(m: &StructuredMatrix, gap_floor: f64) -> Result<PfaffianSign> {
    let a = match (m.structure(), m.data()) {
        (Structure::RealSkew, MatrixData::Real(a)) => a,
        _ => return Err(LabError::InvalidArgument("Pfaffian needs a real skew matrix".into())),
    };
    let f = SkewFactor::factor(a)?;
    if f.pfaffian.sign == 0 {
        return Err(LabError::NotInvertible { gap: 0.0, floor: gap_floor });
    }
    let gap = f.min_singular_value()?;
    if gap < gap_floor {
        return Err(LabError::NotInvertible { gap, floor: gap_floor });
    }
    Ok(PfaffianSign { sign: f.pfaffian.sign, gap })
}

/// Pfaffian without the invertibility check.
pub fn pfaffian(a: &Array2<f64>) -> Result<PfaffianValue> {
    Ok(SkewFactor::factor(a)?.pfaffian)
}

/// Elimination record. Step `k` (even) swaps `k+1 ↔ swaps[k/2]`, then
/// clears column `k` below `k+1` with multipliers stored in row `k`; row
/// `k+1` keeps the coupling to the trailing block.
pub struct SkewFactor {
    n: usize,
    a: Vec<f64>,
    swaps: Vec<usize>,
    pub pfaffian: PfaffianValue,
}

impl SkewFactor {
    pub fn factor(m: &Array2<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(LabError::Dimension("Pfaffian of a non-square matrix".into()));
        }
        if n % 2 == 1 {
            return Err(LabError::Dimension(format!("Pfaffian of odd dimension {n}")));
        }
        // row-major, strictly upper triangle is authoritative
        let mut a: Vec<f64> = m.iter().copied().collect();
        if !m.is_standard_layout() {
            a = m.as_standard_layout().iter().copied().collect();
        }
        let mut swaps = Vec::with_capacity(n / 2);
        let mut sign: i8 = 1;
        let mut log_abs = 0.0;
        let mut singular = false;
        let mut k = 0;
        while k + 1 < n {
            let r = k + 1;
            let p = (r..n)
                .map(|i| (i, a[k * n + i].abs()))
                .fold((r, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0;
            if p != r {
                swap_skew(&mut a, n, k, r, p);
                sign = -sign;
            }
            swaps.push(p);
            let piv = a[k * n + r];
            if piv == 0.0 {
                singular = true;
                break;
            }
            if piv < 0.0 {
                sign = -sign;
            }
            log_abs += piv.abs().ln();
            for i in k + 2..n {
                a[k * n + i] /= piv;
            }
            // A[i][j] += -tau_i u_j + u_i tau_j  for k+2 <= i < j
            let (head, tail) = a.split_at_mut((k + 2) * n);
            let tau = &head[k * n..(k + 1) * n];
            let u = &head[r * n..(r + 1) * n];
            for i in k + 2..n {
                let (ti, ui) = (tau[i], u[i]);
                if ti == 0.0 && ui == 0.0 {
                    continue;
                }
                let row = &mut tail[(i - k - 2) * n..(i - k - 1) * n];
                for j in i + 1..n {
                    row[j] += ui * tau[j] - ti * u[j];
                }
            }
            k += 2;
        }
        let pfaffian = if singular {
            PfaffianValue { sign: 0, log_abs: f64::NEG_INFINITY }
        } else {
            PfaffianValue { sign, log_abs }
        };
        Ok(Self { n, a, swaps, pfaffian })
    }

    /// Solves `A x = b` for a real right-hand side.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let a = &self.a;
        let steps = n / 2;
        // forward: transform the right-hand side, fix x_{k+1}
        for s in 0..steps {
            let k = 2 * s;
            let r = k + 1;
            b.swap(r, self.swaps[s]);
            let piv = a[k * n + r];
            let (tau, u) = (&a[k * n..(k + 1) * n], &a[r * n..(r + 1) * n]);
            let br = b[r];
            for i in k + 2..n {
                b[i] -= tau[i] * br;
            }
            // b[k] now becomes x_{k+1}; the trailing system gets + u x_{k+1}
            let xr = b[k] / piv;
            b[k] = xr;
            for i in k + 2..n {
                b[i] += u[i] * xr;
            }
        }
        // backward: b[k] holds y_{k+1}, b[r] holds the transformed c_{k+1}
        for s in (0..steps).rev() {
            let k = 2 * s;
            let r = k + 1;
            let piv = a[k * n + r];
            let (tau, u) = (&a[k * n..(k + 1) * n], &a[r * n..(r + 1) * n]);
            let mut ut_y = 0.0;
            let mut tau_y = 0.0;
            for i in k + 2..n {
                ut_y += u[i] * b[i];
                tau_y += tau[i] * b[i];
            }
            let y_r = b[k];
            let y_k = (ut_y - b[r]) / piv;
            b[k] = y_k;
            b[r] = y_r - tau_y;
            b.swap(r, self.swaps[s]);
        }
    }

    /// Smallest singular value via Lanczos on the Hermitian `i A⁻¹`.
    pub fn min_singular_value(&self) -> Result<f64> {
        let n = self.n;
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        let ext = extreme_eigenvalues(
            n,
            |x, y| {
                for i in 0..n {
                    re[i] = x[i].re;
                    im[i] = x[i].im;
                }
                self.solve_in_place(&mut re);
                self.solve_in_place(&mut im);
                // i (re + i im) = -im + i re
                for i in 0..n {
                    y[i] = C64::new(-im[i], re[i]);
                }
            },
            LanczosOptions::default(),
        )?;
        Ok(1.0 / ext.max_abs())
    }
}

/// Swaps indices `r < p` (both `> k`) of the active block in skew storage.
fn swap_skew(a: &mut [f64], n: usize, k: usize, r: usize, p: usize) {
    for j in k..r {
        a.swap(j * n + r, j * n + p);
    }
    for j in r + 1..p {
        let t = a[r * n + j];
        a[r * n + j] = -a[j * n + p];
        a[j * n + p] = -t;
    }
    a[r * n + p] = -a[r * n + p];
    for j in p + 1..n {
        a.swap(r * n + j, p * n + j);
    }
}
