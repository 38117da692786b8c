use ndarray::{array, Array2};
use num_complex::Complex64 as C64;

const O: C64 = C64::new(0.0, 0.0);
const L: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// `σ_0 = 1`, `σ_1`, `σ_2`, `σ_3`.
pub(crate) fn sigma(k: usize) -> Array2<C64> {
    match k {
        0 => array![[L, O], [O, L]],
        1 => array![[O, L], [L, O]],
        2 => array![[O, -I], [I, O]],
        3 => array![[L, O], [O, -L]],
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// `i σ_2`, the real antisymmetric unit.
pub(crate) fn i_sigma2() -> Array2<C64> {
    sigma(2) * I
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

pub(crate) fn eye(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

pub(crate) fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub(crate) fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
