//! Position-space Dirac operator `D = Σ_j γ_j ⊗ (X_j − z_j)`, its fractional
//! rescaling `D (1 + D²)^{−r/2}`, and the ball truncation `χ(|D| ≤ ρ)`.
//!
//! `D² = |x − z|² ⊗ 1` is diagonal in position, so everything here acts site
//! by site.

use std::sync::Arc;

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;

use crate::clifford::{build_clifford_rep, CliffordRep};
use crate::error::{LabError, Result};
use crate::lattice::{dist, Pattern, PatternKind};
use crate::linalg::{extreme_eigenvalues, LanczosOptions};
use crate::operators::FlattenedHamiltonian;

#[derive(Clone, Debug)]
pub struct DiracData {
    pattern: Arc<Pattern>,
    rep: CliffordRep,
    offset: Vec<f64>,
    rescale: f64,
}

impl DiracData {
    /// Validates the offset against the lattice guard and `r ∈ [0, 1)`.
    pub fn new(pattern: Arc<Pattern>, offset: Vec<f64>, rescale: f64) -> Result<Self> {
        pattern.check_offset(&offset)?;
        if !(0.0..1.0).contains(&rescale) {
            return Err(LabError::InvalidArgument(format!("rescale exponent r = {rescale} must lie in [0, 1)")));
        }
        let rep = build_clifford_rep(pattern.dim())?;
        Ok(Self { pattern, rep, offset, rescale })
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn rep(&self) -> &CliffordRep {
        &self.rep
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn rescale(&self) -> f64 {
        self.rescale
    }

    pub fn with_offset(&self, offset: Vec<f64>) -> Result<Self> {
        Self::new(self.pattern.clone(), offset, self.rescale)
    }

    pub fn with_rescale(&self, rescale: f64) -> Result<Self> {
        Self::new(self.pattern.clone(), self.offset.clone(), rescale)
    }

    /// Size `d'` of the Clifford blocks.
    pub fn clifford_size(&self) -> usize {
        self.rep.matrix_size()
    }

    pub fn displacement(&self, site: usize) -> Vec<f64> {
        self.pattern.site(site).iter().zip(&self.offset).map(|(x, z)| x - z).collect()
    }

    pub fn distance(&self, site: usize) -> f64 {
        dist(self.pattern.site(site), &self.offset)
    }

    /// `(1 + |x − z|²)^{−s/2}`, the diagonal of `w^s`.
    pub fn weight(&self, site: usize, s: f64) -> f64 {
        let d = self.distance(site);
        (1.0 + d * d).powf(-0.5 * s)
    }

    /// Rescaled site block `γ·(x − z) (1 + |x − z|²)^{−r/2}`.
    pub fn site_block(&self, site: usize) -> Array2<C64> {
        self.rep.clifford_vector(&self.displacement(site)) * C64::new(self.weight(site, self.rescale), 0.0)
    }

    /// Off-diagonal block `D₀` in the chiral grading (even `d`), taken so
    /// that the site block reads `[[0, D₀], [D₀*, 0]]`. In `d = 2` this is the
    /// scalar `(x₁ − z₁) + i(x₂ − z₂)`, rescaled.
    pub fn off_diagonal_block(&self, site: usize) -> Option<Array2<C64>> {
        if self.pattern.dim() % 2 == 1 {
            return None;
        }
        let h = self.clifford_size() / 2;
        Some(self.site_block(site).slice(s![..h, h..]).to_owned())
    }

    /// Block entering the localizers: the site block itself for odd `d`,
    /// and `[[0, D₀*], [D₀, 0]]` for even `d` (the site block with its two
    /// chiral halves swapped).
    pub fn localizer_block(&self, site: usize) -> Array2<C64> {
        let b = self.site_block(site);
        if self.pattern.dim() % 2 == 1 {
            return b;
        }
        let m = self.clifford_size();
        let h = m / 2;
        Array2::from_shape_fn((m, m), |(i, j)| b[[(i + h) % m, (j + h) % m]])
    }
}

#[derive(Clone, Debug)]
pub struct DiracMatrix {
    pub sites: Vec<usize>,
    pub blocks: Vec<Array2<C64>>,
    /// Off-diagonal chiral blocks, present for even `d`.
    pub off_diagonal: Option<Vec<Array2<C64>>>,
}

impl DiracMatrix {
    pub fn to_dense(&self) -> Array2<C64> {
        let m = self.blocks.first().map_or(0, |b| b.nrows());
        let mut out = Array2::zeros((m * self.blocks.len(), m * self.blocks.len()));
        for (k, b) in self.blocks.iter().enumerate() {
            out.slice_mut(s![k * m..(k + 1) * m, k * m..(k + 1) * m]).assign(b);
        }
        out
    }
}

pub fn dirac_matrix(dd: &DiracData, sites: &[usize]) -> Result<DiracMatrix> {
    if sites.is_empty() {
        return Err(LabError::InvalidArgument("Dirac matrix on an empty site set".into()));
    }
    if let Some(&bad) = sites.iter().find(|&&i| i >= dd.pattern.len()) {
        return Err(LabError::InvalidArgument(format!("site {bad} is not in the pattern")));
    }
    let blocks = sites.iter().map(|&i| dd.site_block(i)).collect();
    let off_diagonal = (dd.pattern.dim() % 2 == 0)
        .then(|| sites.iter().map(|&i| dd.off_diagonal_block(i).expect("even dimension")).collect());
    Ok(DiracMatrix { sites: sites.to_vec(), blocks, off_diagonal })
}

/// `f_r(s) = s (1 + s²)^{−r/2}`.
pub fn rescaled_radius(s: f64, r: f64) -> f64 {
    s * (1.0 + s * s).powf(-0.5 * r)
}

/// Euclidean radius `f_r^{-1}(ρ)`. `f_r` is strictly increasing and
/// unbounded for `r < 1`, so the inverse always exists.
pub fn euclidean_radius(rho: f64, r: f64) -> Result<f64> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(LabError::InvalidArgument(format!("ball radius ρ = {rho} must be positive")));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(LabError::InvalidArgument(format!("rescale exponent r = {r} must lie in [0, 1)")));
    }
    if r == 0.0 {
        return Ok(rho);
    }
    // f_r grows like s^{1−r}: bracket, then bisect
    let mut hi = rho.max(1.0);
    while rescaled_radius(hi, r) < rho {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rescaled_radius(mid, r) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(hi)
}

#[derive(Clone, Debug)]
pub struct BallProjection {
    /// Selected sites in pattern order.
    pub sites: Vec<usize>,
    pub euclidean_radius: f64,
}

/// Sites with `f_r(|x − z|) ≤ ρ`. Fails with a window-exhausted error when
/// the ball would also contain points outside the simulation window.
pub fn ball_projection(dd: &DiracData, rho: f64) -> Result<BallProjection> {
    let radius = euclidean_radius(rho, dd.rescale)?;
    let clearance = exterior_distance(&dd.pattern, &dd.offset);
    if clearance <= radius {
        return Err(LabError::WindowExhausted(format!(
            "ball of Euclidean radius {radius:.3} around z = {:?} reaches past the window (clearance {clearance:.3})",
            dd.offset
        )));
    }
    let sites = (0..dd.pattern.len())
        .filter(|&i| rescaled_radius(dd.distance(i), dd.rescale) <= rho)
        .collect();
    Ok(BallProjection { sites, euclidean_radius: radius })
}

/// Distance from `z` to the nearest point that would be a site of the
/// infinite pattern but is missing from the window. For loaded patterns the
/// bounding box stands in for the window.
pub fn exterior_distance(p: &Pattern, z: &[f64]) -> f64 {
    match p.kind() {
        PatternKind::Cubic { .. } | PatternKind::Box { .. } => {
            let w: Vec<f64> = p.half_widths().expect("generated window").iter().map(|&v| v as f64).collect();
            let nearest: Vec<f64> = z.iter().zip(&w).map(|(v, w)| v.round().clamp(-w, *w)).collect();
            let mut best = f64::INFINITY;
            for j in 0..z.len() {
                for edge in [-(w[j] + 1.0), w[j] + 1.0] {
                    let mut q = nearest.clone();
                    q[j] = edge;
                    best = best.min(dist(&q, z));
                }
            }
            best
        }
        PatternKind::Loaded => p
            .bounds()
            .iter()
            .zip(z)
            .map(|(&(lo, hi), &v)| (v - lo).min(hi - v))
            .fold(f64::INFINITY, f64::min),
    }
}

/// `‖[D^{(r)}, H] w^s‖` on the window of `h`, by Lanczos on `A* A`.
///
/// With `C(X) = D H X − H D X`, the operator is `A = C ∘ w^s` and
/// `A* A = −w^s C C w^s`. Vectors are stored as `(window dim, d')` arrays
/// so each `H` application covers all Clifford components at once.
pub fn commutator_norm(dd: &DiracData, h: &FlattenedHamiltonian, s: f64) -> Result<f64> {
    if dd.pattern().len() != h.pattern().len() || dd.pattern().dim() != h.pattern().dim() {
        return Err(LabError::Dimension("Dirac data and Hamiltonian live on different patterns".into()));
    }
    let n = h.fiber_dim();
    let m = dd.clifford_size();
    let sites = h.sites();
    let blocks: Vec<Array2<C64>> = sites.iter().map(|&i| dd.site_block(i)).collect();
    let weights: Vec<f64> = sites.iter().map(|&i| dd.weight(i, s)).collect();
    let rows = h.dim();

    let apply_d = |x: &Array2<C64>| {
        let mut y = Array2::<C64>::zeros((rows, m));
        for (p, b) in blocks.iter().enumerate() {
            for f in 0..n {
                let r = p * n + f;
                for a in 0..m {
                    let mut acc = C64::new(0.0, 0.0);
                    for c in 0..m {
                        acc += b[[a, c]] * x[[r, c]];
                    }
                    y[[r, a]] = acc;
                }
            }
        }
        y
    };
    let weigh = |x: &mut Array2<C64>| {
        for (p, &w) in weights.iter().enumerate() {
            x.slice_mut(s![p * n..(p + 1) * n, ..]).mapv_inplace(|z| z * w);
        }
    };
    let comm = |x: &Array2<C64>| apply_d(&h.apply(x)) - h.apply(&apply_d(x));

    let dim = rows * m;
    let res = extreme_eigenvalues(
        dim,
        |v, out| {
            // vector layout: index = row·d' + clifford component
            let mut x = Array2::from_shape_vec((rows, m), v.to_vec()).expect("shape");
            weigh(&mut x);
            let mut y = comm(&comm(&x));
            weigh(&mut y);
            for (o, z) in out.iter_mut().zip(y.iter()) {
                *o = -z;
            }
        },
        LanczosOptions { max_iter: 120, tol: 1e-12 },
    )?;
    Ok(res.max.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_cubic_window, sites_in_ball, Region};
    use crate::linalg::eigh;
    use crate::operators::{build_model, spectral_flatten, BlockOperator, ModelSpec, DEFAULT_ZERO_TOL};
    use ndarray_linalg::SVD;
    use proptest::prelude::*;

    fn dd(w: usize, z: [f64; 2], r: f64) -> DiracData {
        DiracData::new(Arc::new(build_cubic_window(2, w).unwrap()), z.to_vec(), r).unwrap()
    }

    #[test]
    fn d2_site_block_example() {
        let d = dd(3, [0.5, 0.5], 0.0);
        let origin = d.pattern().index_of(&[0.0, 0.0]).unwrap();
        let b = d.site_block(origin);
        assert_eq!(b[[0, 0]], C64::new(0.0, 0.0));
        assert_eq!(b[[0, 1]], C64::new(-0.5, -0.5));
        assert_eq!(b[[1, 0]], C64::new(-0.5, 0.5));
        assert_eq!(d.off_diagonal_block(origin).unwrap()[[0, 0]], C64::new(-0.5, -0.5));
        let l = d.localizer_block(origin);
        assert_eq!(l[[1, 0]], C64::new(-0.5, -0.5));
        assert_eq!(l[[0, 1]], C64::new(-0.5, 0.5));
    }

    #[test]
    fn unit_distance_gives_unit_singular_values() {
        let d = dd(3, [0.4, 0.2], 0.0);
        let i = d.pattern().index_of(&[1.0, 1.0]).unwrap();
        assert!((d.distance(i) - 1.0).abs() < 1e-15);
        let (_, sv, _) = d.site_block(i).svd(false, false).unwrap();
        assert!(sv.iter().all(|s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn rescaled_singular_values() {
        assert!((rescaled_radius(3.0, 0.5) - 3.0 * 10f64.powf(-0.25)).abs() < 1e-15);
        assert!((rescaled_radius(3.0, 0.5) - 1.6870).abs() < 1e-4);
        let d = dd(4, [0.5, 0.5], 0.5);
        let i = d.pattern().index_of(&[3.0, 4.0]).unwrap();
        let s = d.distance(i);
        let (_, sv, _) = d.site_block(i).svd(false, false).unwrap();
        assert!(sv.iter().all(|v| (v - rescaled_radius(s, 0.5)).abs() < 1e-13));
    }

    #[test]
    fn rejects_bad_offsets_and_exponents() {
        let p = Arc::new(build_cubic_window(2, 3).unwrap());
        assert!(DiracData::new(p.clone(), vec![0.05, 0.5], 0.0).is_err());
        assert!(DiracData::new(p.clone(), vec![0.5], 0.0).is_err());
        assert!(DiracData::new(p.clone(), vec![0.5, 0.5], 1.0).is_err());
        assert!(dirac_matrix(&dd(3, [0.5, 0.5], 0.0), &[]).is_err());
    }

    #[test]
    fn ball_examples() {
        let d = dd(15, [0.5, 0.5], 0.0);
        let ball = ball_projection(&d, 5.0).unwrap();
        assert_eq!(ball.sites.len(), 80);
        assert_eq!(ball.sites, sites_in_ball(d.pattern(), &[0.5, 0.5], 5.0));
        assert_eq!(ball_projection(&d, 0.8).unwrap().sites.len(), 4);

        let d = dd(15, [0.5, 0.5], 0.5);
        let r = euclidean_radius(5.0, 0.5).unwrap();
        assert!((rescaled_radius(r, 0.5) - 5.0).abs() < 1e-12);
        // well beyond the half width 15 either way
        assert!((r - 25.02).abs() < 0.01, "{r}");
        assert!(matches!(ball_projection(&d, 5.0), Err(LabError::WindowExhausted(_))));
    }

    #[test]
    fn exterior_distance_on_cubic_window() {
        let p = build_cubic_window(2, 3).unwrap();
        // nearest missing site from (0.5, 0.5) is (4, 0) or (4, 1)
        let e = exterior_distance(&p, &[0.5, 0.5]);
        assert!((e - (3.5f64 * 3.5 + 0.25).sqrt()).abs() < 1e-14);
        let d = DiracData::new(Arc::new(p), vec![0.5, 0.5], 0.0).unwrap();
        assert!(ball_projection(&d, 3.5).is_ok());
        assert!(ball_projection(&d, 3.6).is_err());
    }

    #[test]
    fn position_diagonal_hamiltonian_commutes() {
        let p = Arc::new(build_cubic_window(2, 4).unwrap());
        let d = DiracData::new(p.clone(), vec![0.5, 0.5], 0.0).unwrap();
        let (h, _) = build_model(&ModelSpec::TrivialReference { fiber: 4, class: None }, &p).unwrap();
        let f = spectral_flatten(&h, &Region::Sites((0..p.len()).collect()), DEFAULT_ZERO_TOL).unwrap();
        assert!(commutator_norm(&d, &f, 0.0).unwrap() < 1e-12);
    }

    fn dense_commutator_norm(d: &DiracData, h: &BlockOperator, sites: &[usize], s: f64) -> f64 {
        let n = h.fiber_dim();
        let m = d.clifford_size();
        let hd = h.restrict_dense(sites);
        // site-major (site, clifford, fiber) layout
        let dim = sites.len() * m * n;
        let mut a = Array2::<C64>::zeros((dim, dim));
        for (px, &x) in sites.iter().enumerate() {
            for (py, &y) in sites.iter().enumerate() {
                let diff = d.site_block(x) - d.site_block(y);
                let w = d.weight(y, s);
                for a1 in 0..m {
                    for a2 in 0..m {
                        for f1 in 0..n {
                            for f2 in 0..n {
                                a[[(px * m + a1) * n + f1, (py * m + a2) * n + f2]] =
                                    diff[[a1, a2]] * hd[[px * n + f1, py * n + f2]] * w;
                            }
                        }
                    }
                }
            }
        }
        let (_, sv, _) = a.svd(false, false).unwrap();
        sv[0]
    }

    #[test]
    fn commutator_norm_matches_dense_svd() {
        let p = Arc::new(build_cubic_window(2, 3).unwrap());
        let (h, _) = build_model(&ModelSpec::Qwz2d { m: 1.0 }, &p).unwrap();
        let all: Vec<usize> = (0..p.len()).collect();
        let f = FlattenedHamiltonian::unflattened(&h, &Region::Sites(all.clone())).unwrap();
        for (r, s) in [(0.0, 0.0), (0.5, 0.0), (0.0, 1.0), (0.5, 0.5)] {
            let d = DiracData::new(p.clone(), vec![0.3, -0.4], r).unwrap();
            let lanczos = commutator_norm(&d, &f, s).unwrap();
            let dense = dense_commutator_norm(&d, &h, &all, s);
            assert!((lanczos - dense).abs() < 1e-9 * dense.max(1.0), "r={r} s={s}: {lanczos} vs {dense}");
        }
    }

    #[test]
    fn clean_commutator_is_bounded_across_windows() {
        // nearest-neighbour hopping: ‖[D,H]‖ ≤ Σ over 2d neighbours of |hop|·|e_j|
        let mut norms = Vec::new();
        for w in [5, 10, 15] {
            let p = Arc::new(build_cubic_window(2, w).unwrap());
            let (h, _) = build_model(&ModelSpec::Qwz2d { m: 1.0 }, &p).unwrap();
            let f = FlattenedHamiltonian::unflattened(&h, &Region::Sites((0..p.len()).collect())).unwrap();
            let d = DiracData::new(p.clone(), vec![0.5, 0.5], 0.0).unwrap();
            norms.push(commutator_norm(&d, &f, 0.0).unwrap());
        }
        let hop = 1.0 / 2f64.sqrt();
        assert!(norms.iter().all(|&c| c <= 4.0 * hop + 1e-9), "{norms:?}");
        assert!((norms[2] - norms[1]).abs() < 0.05, "{norms:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn dirac_squares_to_radial_diagonal(zx in 0.15f64..0.85, zy in 0.15f64..0.85, r in 0.0f64..0.99) {
            let d = dd(3, [zx, zy], r);
            let all: Vec<usize> = (0..d.pattern().len()).collect();
            let dm = dirac_matrix(&d, &all).unwrap();
            for (k, b) in dm.blocks.iter().enumerate() {
                let s = d.distance(all[k]);
                let target = s * s * (1.0 + s * s).powf(-r);
                let sq = b.dot(b);
                for ((i, j), v) in sq.indexed_iter() {
                    let t = if i == j { target } else { 0.0 };
                    prop_assert!((v - C64::new(t, 0.0)).norm() <= 1e-12 * target.max(1.0));
                }
                // Hermitian, same direction as the unrescaled block
                prop_assert!(crate::clifford::max_abs_diff(b, &crate::clifford::adjoint(b)) == 0.0);
                let (vals, _) = eigh(b).unwrap();
                prop_assert!(vals.iter().all(|v| (v.abs() - s * (1.0 + s * s).powf(-0.5 * r)).abs() < 1e-12));
            }
            let dense = dm.to_dense();
            prop_assert_eq!(dense.nrows(), 2 * all.len());
        }

        #[test]
        fn inverse_radius_roundtrips(rho in 0.01f64..50.0, r in 0.0f64..0.95) {
            let s = euclidean_radius(rho, r).unwrap();
            prop_assert!((rescaled_radius(s, r) - rho).abs() <= 1e-10 * rho);
        }
    }
}
