//! Momentum-space oracles, written straight from the real-space hopping
//! rules and independent of the crate's operator code.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

/// Bloch vector `d(k)` of the clean qwz model, `H(k) = d(k)·σ`.
///
/// Real space: on-site `m σ₃`, hopping `⟨x+e_j|h|x⟩ = −(i/2)σ_j − ½σ₃`.
/// With `ψ_x = e^{ik·x}u` this gives `d = (−sin k₁, −sin k₂, m − cos k₁ − cos k₂)`.
pub fn qwz_d(m: f64, k1: f64, k2: f64) -> [f64; 3] {
    [-k1.sin(), -k2.sin(), m - k1.cos() - k2.cos()]
}

/// Normalized eigenvector of `d·σ` for eigenvalue `−|d|`.
fn lower_band(d: [f64; 3]) -> [C64; 2] {
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    // columns of (1 − d̂·σ)/2; take the larger one
    let a = [C64::new(r - d[2], 0.0), C64::new(-d[0], -d[1])];
    let b = [C64::new(-d[0], d[1]), C64::new(r + d[2], 0.0)];
    let norm = |v: &[C64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let v = if norm(&a) >= norm(&b) { a } else { b };
    let s = norm(&v);
    [v[0] / s, v[1] / s]
}

fn link(u: &[C64; 2], v: &[C64; 2]) -> C64 {
    let z = u[0].conj() * v[0] + u[1].conj() * v[1];
    z / z.norm()
}

/// Plaquette-field (Fukui–Hatsugai–Suzuki) Chern number of the lower qwz
/// band on an `n × n` Brillouin-zone grid.
pub fn qwz_chern(m: f64, n: usize) -> i64 {
    let step = 2.0 * PI / n as f64;
    let u: Vec<Vec<[C64; 2]>> =
        (0..n).map(|i| (0..n).map(|j| lower_band(qwz_d(m, i as f64 * step, j as f64 * step))).collect()).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (ip, jp) = ((i + 1) % n, (j + 1) % n);
            let w = link(&u[i][j], &u[ip][j]) * link(&u[ip][j], &u[ip][jp]) * link(&u[ip][jp], &u[i][jp]) * link(&u[i][jp], &u[i][j]);
            total += w.arg();
        }
    }
    (total / (2.0 * PI)).round() as i64
}

/// Half the direct gap of the clean qwz model, `min_k |d(k)|`, on an
/// `n × n` grid.
pub fn qwz_half_gap(m: f64, n: usize) -> f64 {
    let step = 2.0 * PI / n as f64;
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let d = qwz_d(m, i as f64 * step, j as f64 * step);
            best = best.min((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt());
        }
    }
    best
}

/// Off-diagonal symbol of the ssh chain in the chiral grading:
/// on-site `m`, hopping `⟨x+1|h₀|x⟩ = −w`, so `h₀(k) = m − w e^{−ik}`.
pub fn ssh_symbol(m: f64, w: f64, k: f64) -> C64 {
    C64::new(m, 0.0) - C64::from_polar(w, -k)
}

/// Winding number of `k ↦ h₀(k)` around 0, from summed phase increments.
pub fn ssh_winding(m: f64, w: f64, n: usize) -> i64 {
    let step = 2.0 * PI / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let a = ssh_symbol(m, w, i as f64 * step);
        let b = ssh_symbol(m, w, (i + 1) as f64 * step);
        total += (b / a).arg();
    }
    (total / (2.0 * PI)).round() as i64
}
