//! Finite-volume spectral localizers and their indices.
//!
//! Matrices are laid out site-major: the entry for ball site `p`, Clifford
//! component `c` and fiber component `f` sits at `p·(d'·n) + c·n + f`.
//!
//! * even `d`, class A: `L = [[H, κD₀*], [κD₀, −H]]`, index `½ Sig L`;
//! * odd `d`, class AIII: `L = κD ⊗ J + 1 ⊗ H`, index `−½ Sig L`;
//! * `d = 2`, class AII: the even-shaped matrix on a 4-dimensional fiber is
//!   conjugated to `i R L R*`, which is real skew, and the index is the
//!   product of its Pfaffian sign with that of a reference localizer.
//!
//! `D₀` is the off-diagonal block of [`DiracData::off_diagonal_block`],
//! `(x₁ − z₁) + i(x₂ − z₂)` in `d = 2`. With this orientation the even index
//! equals the Chern number of the Fermi projection.

use std::io::Write;

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::clifford::symmetry_ops;
use crate::dirac::{ball_projection, commutator_norm, DiracData};
use crate::error::{LabError, Result};
use crate::lattice::Pattern;
use crate::linalg::{
    extreme_eigenvalues, inertia, pfaffian_sign, symmetric_unitary_sqrt, HermitianLdl, LanczosOptions, MatrixData,
    SkewFactor, Structure, StructuredMatrix,
};
use crate::operators::{AzClass, FlattenedHamiltonian, ModelSpec};

/// Smallest localizer gap accepted as invertible.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-8;
/// Assembly noise beyond this is a configuration bug.
pub const STRUCTURE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizerConfig {
    pub kappa: f64,
    pub rho: f64,
    pub offset: Vec<f64>,
    #[serde(default)]
    pub rescale: f64,
    /// Reference for ℤ₂ normalization; the class's trivial reference when
    /// absent.
    #[serde(default)]
    pub reference: Option<ModelSpec>,
}

impl LocalizerConfig {
    pub fn new(kappa: f64, rho: f64, offset: Vec<f64>) -> Self {
        Self { kappa, rho, offset, rescale: 0.0, reference: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(LabError::InvalidArgument(format!("κ = {} must be positive", self.kappa)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(LabError::InvalidArgument(format!("ρ = {} must be positive", self.rho)));
        }
        Ok(())
    }

    pub fn dirac(&self, pattern: std::sync::Arc<Pattern>) -> Result<DiracData> {
        DiracData::new(pattern, self.offset.clone(), self.rescale)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalizerKind {
    Even,
    Odd,
    SkewAii,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexKind {
    Z,
    Z2,
}

/// Everything that fixes the meaning of a basis vector. Two localizers can
/// be compared entrywise only if their layouts agree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Layout {
    pub kind: LocalizerKind,
    pub sites: Vec<usize>,
    pub pattern_len: usize,
    pub offset: Vec<f64>,
    pub rho: f64,
    pub rescale: f64,
    pub clifford: usize,
    pub fiber: usize,
}

impl Layout {
    pub fn block_size(&self) -> usize {
        self.clifford * self.fiber
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LocalizerMatrix {
    pub matrix: StructuredMatrix,
    pub class: AzClass,
    pub kappa: f64,
    pub layout: Layout,
    /// Whether the flattening window covered the doubled ball.
    pub margin_ok: bool,
    pub provenance: Provenance,
}

impl LocalizerMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn index_kind(&self) -> IndexKind {
        match self.layout.kind {
            LocalizerKind::SkewAii => IndexKind::Z2,
            _ => IndexKind::Z,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Relabels ball sites: new position `k` holds old position `perm[k]`.
    pub fn permute_sites(&self, perm: &[usize]) -> Result<Self> {
        let nsites = self.layout.sites.len();
        let mut seen = vec![false; nsites];
        if perm.len() != nsites || !perm.iter().all(|&p| p < nsites && !std::mem::replace(&mut seen[p], true)) {
            return Err(LabError::InvalidArgument("not a permutation of the ball sites".into()));
        }
        let b = self.layout.block_size();
        let idx: Vec<usize> = perm.iter().flat_map(|&p| p * b..(p + 1) * b).collect();
        let data = match self.matrix.data() {
            MatrixData::Complex(m) => MatrixData::Complex(Array2::from_shape_fn(m.dim(), |(i, j)| m[[idx[i], idx[j]]])),
            MatrixData::Real(m) => MatrixData::Real(Array2::from_shape_fn(m.dim(), |(i, j)| m[[idx[i], idx[j]]])),
        };
        let matrix = match data {
            MatrixData::Complex(m) => StructuredMatrix::new(m, self.matrix.structure())?,
            MatrixData::Real(m) => StructuredMatrix::from_real(m, self.matrix.structure())?,
        };
        let mut layout = self.layout.clone();
        layout.sites = perm.iter().map(|&p| self.layout.sites[p]).collect();
        Ok(Self { matrix, layout, ..self.clone() })
    }

    /// Text dump: `#`-prefixed header, then one matrix row per line with
    /// `re im` pairs (complex) or plain values (real).
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# localizer {:?} class {} structure {:?}", self.layout.kind, self.class, self.matrix.structure())?;
        writeln!(w, "# dim {} sites {} fiber {} clifford {}", self.dim(), self.layout.sites.len(), self.layout.fiber, self.layout.clifford)?;
        writeln!(w, "# kappa {:e} rho {:e} r {:e}", self.kappa, self.layout.rho, self.layout.rescale)?;
        writeln!(w, "# z {}", self.layout.offset.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" "))?;
        writeln!(
            w,
            "# model {} seed {} lambda {}",
            self.provenance.model.as_deref().unwrap_or("-"),
            self.provenance.seed.map_or("-".to_string(), |s| s.to_string()),
            self.provenance.lambda.map_or("-".to_string(), |s| format!("{s:e}")),
        )?;
        writeln!(w, "# sites {}", self.layout.sites.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "))?;
        match self.matrix.data() {
            MatrixData::Complex(m) => {
                for row in m.rows() {
                    let line: Vec<String> = row.iter().map(|z| format!("{:e} {:e}", z.re, z.im)).collect();
                    writeln!(w, "{}", line.join(" "))?;
                }
            }
            MatrixData::Real(m) => {
                for row in m.rows() {
                    let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
                    writeln!(w, "{}", line.join(" "))?;
                }
            }
        }
        Ok(())
    }
}

/// Ball sites and the margin flag, shared by all assemblies.
struct Ball {
    sites: Vec<usize>,
    margin_ok: bool,
}

fn prepare(h: &FlattenedHamiltonian, dd: &DiracData, cfg: &LocalizerConfig) -> Result<Ball> {
    cfg.validate()?;
    if cfg.offset != dd.offset() || cfg.rescale != dd.rescale() {
        return Err(LabError::InvalidArgument("localizer config and Dirac data disagree on z or r".into()));
    }
    if h.pattern().len() != dd.pattern().len() || h.pattern().dim() != dd.pattern().dim() {
        return Err(LabError::Dimension("Hamiltonian and Dirac data live on different patterns".into()));
    }
    let ball = ball_projection(dd, cfg.rho)?;
    if ball.sites.is_empty() {
        return Err(LabError::InvalidArgument(format!("ball of radius ρ = {} contains no sites", cfg.rho)));
    }
    if let Some(&out) = ball.sites.iter().find(|&&i| h.position(i).is_none()) {
        return Err(LabError::WindowExhausted(format!(
            "ball site {:?} lies outside the flattening window",
            dd.pattern().site(out)
        )));
    }
    let reach = 2.0 * ball.euclidean_radius;
    let margin_ok = (0..dd.pattern().len()).all(|i| dd.distance(i) > reach || h.position(i).is_some());
    Ok(Ball { sites: ball.sites, margin_ok })
}

fn layout(kind: LocalizerKind, ball: &Ball, dd: &DiracData, cfg: &LocalizerConfig, fiber: usize) -> Layout {
    Layout {
        kind,
        sites: ball.sites.clone(),
        pattern_len: dd.pattern().len(),
        offset: cfg.offset.clone(),
        rho: cfg.rho,
        rescale: cfg.rescale,
        clifford: dd.clifford_size(),
        fiber,
    }
}

/// `κD ⊗ A + G ⊗ H` on the ball, where `D` is the localizer Dirac block,
/// `A` is `1` or `J` on the fiber and `G` is `γ₀` or `1` on the Clifford
/// space.
fn assemble_dense(
    h_ball: &Array2<C64>,
    dd: &DiracData,
    sites: &[usize],
    kappa: f64,
    fiber_op: &Array2<C64>,
    clifford_op: &Array2<C64>,
) -> Array2<C64> {
    let n = fiber_op.nrows();
    let m = dd.clifford_size();
    let b = m * n;
    let mut out = Array2::<C64>::zeros((sites.len() * b, sites.len() * b));
    for (p, &x) in sites.iter().enumerate() {
        let d = dd.localizer_block(x);
        for c1 in 0..m {
            for c2 in 0..m {
                let dc = d[[c1, c2]] * kappa;
                if dc == C64::new(0.0, 0.0) {
                    continue;
                }
                for f1 in 0..n {
                    for f2 in 0..n {
                        out[[p * b + c1 * n + f1, p * b + c2 * n + f2]] += dc * fiber_op[[f1, f2]];
                    }
                }
            }
        }
    }
    for c1 in 0..m {
        for c2 in 0..m {
            let g = clifford_op[[c1, c2]];
            if g == C64::new(0.0, 0.0) {
                continue;
            }
            for p in 0..sites.len() {
                for q in 0..sites.len() {
                    let hb = h_ball.slice(s![p * n..(p + 1) * n, q * n..(q + 1) * n]);
                    let mut ob = out.slice_mut(s![p * b + c1 * n..p * b + (c1 + 1) * n, q * b + c2 * n..q * b + (c2 + 1) * n]);
                    ob.scaled_add(g, &hb);
                }
            }
        }
    }
    out
}

/// `L = [[H, κD₀*], [κD₀, −H]]` for even `d`.
pub fn assemble_even(h: &FlattenedHamiltonian, dd: &DiracData, cfg: &LocalizerConfig) -> Result<LocalizerMatrix> {
    if dd.pattern().dim() % 2 == 1 {
        return Err(LabError::InvalidArgument("the even localizer needs an even dimension".into()));
    }
    let ball = prepare(h, dd, cfg)?;
    let n = h.fiber_dim();
    let gamma0 = symmetry_ops(dd.rep()).chiral.expect("even dimension");
    let raw = assemble_dense(&h.restrict(&ball.sites)?, dd, &ball.sites, cfg.kappa, &Array2::eye(n), &gamma0);
    finish(raw, Structure::Hermitian, AzClass::A, LocalizerKind::Even, ball, dd, cfg, n)
}

/// `L = κD ⊗ J + 1 ⊗ H` for odd `d`, with the standard grading `J`.
pub fn assemble_odd(h: &FlattenedHamiltonian, dd: &DiracData, cfg: &LocalizerConfig) -> Result<LocalizerMatrix> {
    if dd.pattern().dim() % 2 == 0 {
        return Err(LabError::InvalidArgument("the odd localizer needs an odd dimension".into()));
    }
    let n = h.fiber_dim();
    if n % 2 == 1 {
        return Err(LabError::InvalidArgument(format!("a chiral fiber must be even, got {n}")));
    }
    let ball = prepare(h, dd, cfg)?;
    let j = crate::operators::standard_chiral(n);
    let m = dd.clifford_size();
    let raw = assemble_dense(&h.restrict(&ball.sites)?, dd, &ball.sites, cfg.kappa, &j, &Array2::eye(m));
    finish(raw, Structure::Hermitian, AzClass::AIII, LocalizerKind::Odd, ball, dd, cfg, n)
}

/// The 8×8 conjugation `Q = [[0, u], [−u, 0]]` with `u = 1₂ ⊗ iσ₂` acting
/// on (Clifford ⊗ fiber) of the AII localizer.
pub fn aii_conjugation() -> Array2<C64> {
    let mut q = Array2::<C64>::zeros((8, 8));
    // u = 1₂ ⊗ [[0, 1], [−1, 0]]
    let mut u = Array2::<C64>::zeros((4, 4));
    for k in 0..2 {
        u[[2 * k, 2 * k + 1]] = C64::new(1.0, 0.0);
        u[[2 * k + 1, 2 * k]] = C64::new(-1.0, 0.0);
    }
    q.slice_mut(s![..4, 4..]).assign(&u);
    q.slice_mut(s![4.., ..4]).assign(&(-&u));
    q
}

/// Skew localizer `i R L R*` for class AII in `d = 2`, where `L` is the
/// even-shaped localizer on a 4-dimensional fiber and `R = Rᵗ`,
/// `R² = Q`. The result is real skew; anything else is a hard error.
pub fn assemble_skew_aii(h: &FlattenedHamiltonian, dd: &DiracData, cfg: &LocalizerConfig) -> Result<LocalizerMatrix> {
    if dd.pattern().dim() != 2 {
        return Err(LabError::InvalidArgument("the AII skew localizer is implemented for d = 2 only".into()));
    }
    if h.fiber_dim() != 4 {
        return Err(LabError::InvalidArgument(format!("the AII skew localizer needs fiber 4, got {}", h.fiber_dim())));
    }
    let ball = prepare(h, dd, cfg)?;
    let gamma0 = symmetry_ops(dd.rep()).chiral.expect("even dimension");
    let mut l = assemble_dense(&h.restrict(&ball.sites)?, dd, &ball.sites, cfg.kappa, &Array2::eye(4), &gamma0);
    let r = symmetric_unitary_sqrt(&aii_conjugation())?;
    let ir = r.mapv(|z| z * C64::new(0.0, 1.0));
    let r_adj = r.t().mapv(|z| z.conj());
    let nb = ball.sites.len();
    // R acts site by site, so the conjugation goes block by block in place
    for p in 0..nb {
        for q in 0..nb {
            let mut blk = l.slice_mut(s![p * 8..(p + 1) * 8, q * 8..(q + 1) * 8]);
            if blk.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            let conj = ir.dot(&blk).dot(&r_adj);
            blk.assign(&conj);
        }
    }
    finish(l, Structure::RealSkew, AzClass::AII, LocalizerKind::SkewAii, ball, dd, cfg, 4)
}

/// Dispatches on the class of the Hamiltonian.
pub fn assemble(h: &FlattenedHamiltonian, class: AzClass, dd: &DiracData, cfg: &LocalizerConfig) -> Result<LocalizerMatrix> {
    match (class, dd.pattern().dim() % 2) {
        (AzClass::A, 0) => assemble_even(h, dd, cfg),
        (AzClass::AIII, 1) => assemble_odd(h, dd, cfg),
        (AzClass::AII, _) if dd.pattern().dim() == 2 => assemble_skew_aii(h, dd, cfg),
        _ => Err(LabError::InvalidArgument(format!(
            "no localizer for class {class} in d = {} (implemented: A even d, AIII odd d, AII d = 2)",
            dd.pattern().dim()
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    raw: Array2<C64>,
    structure: Structure,
    class: AzClass,
    kind: LocalizerKind,
    ball: Ball,
    dd: &DiracData,
    cfg: &LocalizerConfig,
    fiber: usize,
) -> Result<LocalizerMatrix> {
    let matrix = StructuredMatrix::new(raw, structure)?;
    matrix.check(STRUCTURE_TOL)?;
    Ok(LocalizerMatrix {
        matrix,
        class,
        kappa: cfg.kappa,
        layout: layout(kind, &ball, dd, cfg, fiber),
        margin_ok: ball.margin_ok,
        provenance: Provenance::default(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexValue {
    pub kind: IndexKind,
    /// Integer index, or `±1` for ℤ₂.
    pub value: i64,
    /// Signature (ℤ) or raw Pfaffian sign (ℤ₂) before normalization.
    pub raw: i64,
    /// Smallest singular value of the localizer.
    pub gap: f64,
    pub reference_gap: Option<f64>,
    pub margin_ok: bool,
}

/// Evaluates the index. ℤ classes take no reference; ℤ₂ classes need one
/// built on the same layout (κ may differ).
pub fn evaluate_index(l: &LocalizerMatrix, reference: Option<&LocalizerMatrix>, gap_floor: f64) -> Result<IndexValue> {
    match (l.index_kind(), reference) {
        (IndexKind::Z, Some(_)) => Err(LabError::InvalidArgument("ℤ indices take no reference".into())),
        (IndexKind::Z2, None) => Err(LabError::InvalidArgument("ℤ₂ indices need a reference localizer".into())),
        (IndexKind::Z, None) => {
            let inert = inertia(&l.matrix, gap_floor)?;
            let sig = inert.signature();
            if sig % 2 != 0 {
                return Err(LabError::Structure(format!("odd signature {sig} gives a half-integer index")));
            }
            let sign = if l.layout.kind == LocalizerKind::Odd { -1 } else { 1 };
            Ok(IndexValue {
                kind: IndexKind::Z,
                value: sign * sig / 2,
                raw: sig,
                gap: inert.gap,
                reference_gap: None,
                margin_ok: l.margin_ok,
            })
        }
        (IndexKind::Z2, Some(r)) => {
            if r.layout != l.layout || r.class != l.class {
                return Err(LabError::ReferenceMismatch(
                    "reference localizer differs in sites, ordering, z, ρ, r or fiber".into(),
                ));
            }
            let value = pfaffian_sign(&l.matrix, gap_floor)?;
            let refv = pfaffian_sign(&r.matrix, gap_floor)?;
            Ok(IndexValue {
                kind: IndexKind::Z2,
                value: (value.sign * refv.sign) as i64,
                raw: value.sign as i64,
                gap: value.gap,
                reference_gap: Some(refv.gap),
                margin_ok: l.margin_ok,
            })
        }
    }
}

/// Smallest singular value of the localizer.
pub fn min_singular_value(l: &LocalizerMatrix) -> Result<f64> {
    match l.matrix.data() {
        MatrixData::Complex(m) => HermitianLdl::factor(m).min_abs_eigenvalue(),
        MatrixData::Real(m) if l.matrix.structure() == Structure::RealSkew => SkewFactor::factor(m)?.min_singular_value(),
        MatrixData::Real(m) => HermitianLdl::factor(&m.mapv(|x| C64::new(x, 0.0))).min_abs_eigenvalue(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub min_singular: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Checks `|L| ≥ g/2`. A failure only marks the run as outside the
/// guaranteed regime.
pub fn localizer_gap_check(l: &LocalizerMatrix, g: f64) -> Result<GapCheck> {
    let min_singular = min_singular_value(l)?;
    Ok(gap_check_value(min_singular, g))
}

pub fn gap_check_value(min_singular: f64, g: f64) -> GapCheck {
    let threshold = 0.5 * g;
    GapCheck { min_singular, threshold, pass: min_singular >= threshold }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmissibleParams {
    pub gap: f64,
    pub h_norm: f64,
    pub commutator_norm: f64,
    /// `g³ / (12 ‖H‖ ‖[D,H]‖)`; κ must stay strictly below.
    pub kappa_max: f64,
    /// `2g / κ_max`, the smallest radius compatible with the largest κ.
    pub rho_min: f64,
}

impl AdmissibleParams {
    pub fn from_norms(gap: f64, h_norm: f64, commutator_norm: f64) -> Result<Self> {
        if gap <= 0.0 || h_norm <= 0.0 {
            return Err(LabError::InvalidArgument(format!("gap {gap} and ‖H‖ {h_norm} must be positive")));
        }
        let kappa_max = if commutator_norm > 0.0 {
            gap.powi(3) / (12.0 * h_norm * commutator_norm)
        } else {
            f64::INFINITY
        };
        Ok(Self { gap, h_norm, commutator_norm, kappa_max, rho_min: 2.0 * gap / kappa_max })
    }

    /// `2g / κ`.
    pub fn rho_min_for(&self, kappa: f64) -> f64 {
        2.0 * self.gap / kappa
    }

    pub fn admits(&self, kappa: f64, rho: f64) -> bool {
        kappa > 0.0 && kappa < self.kappa_max && rho > self.rho_min_for(kappa)
    }
}

/// Bounds from the measured `‖H‖` and `‖[D,H]‖` on the window of `h`.
pub fn admissible_params(h: &FlattenedHamiltonian, dd: &DiracData, g: f64) -> Result<AdmissibleParams> {
    AdmissibleParams::from_norms(g, h.norm(), commutator_norm(dd, h, 0.0)?)
}

/// Smallest singular value of the even localizer on `sites`,
/// with `H` given only through its action on `(sites·n, cols)` arrays.
/// Lanczos on `L²`; no dense matrix is formed.
pub fn even_min_singular_matrix_free<F>(dd: &DiracData, sites: &[usize], fiber: usize, kappa: f64, apply_h: F) -> Result<f64>
where
    F: Fn(&Array2<C64>) -> Array2<C64>,
{
    if dd.pattern().dim() % 2 == 1 {
        return Err(LabError::InvalidArgument("the even localizer needs an even dimension".into()));
    }
    let m = dd.clifford_size();
    let n = fiber;
    let ns = sites.len();
    let b = m * n;
    let blocks: Vec<Array2<C64>> = sites.iter().map(|&x| dd.localizer_block(x) * C64::new(kappa, 0.0)).collect();
    let gamma0: Vec<f64> = (0..m).map(|c| if c < m / 2 { 1.0 } else { -1.0 }).collect();
    let apply_l = |v: &[C64], out: &mut [C64]| {
        // columns of x are the Clifford components
        let x = Array2::from_shape_fn((ns * n, m), |(r, c)| v[(r / n) * b + c * n + r % n]);
        let hx = apply_h(&x);
        for p in 0..ns {
            for c1 in 0..m {
                for f in 0..n {
                    let mut acc = hx[[p * n + f, c1]] * gamma0[c1];
                    for c2 in 0..m {
                        acc += blocks[p][[c1, c2]] * v[p * b + c2 * n + f];
                    }
                    out[p * b + c1 * n + f] = acc;
                }
            }
        }
    };
    let dim = ns * b;
    let mut tmp = vec![C64::new(0.0, 0.0); dim];
    let res = extreme_eigenvalues(
        dim,
        |v, out| {
            apply_l(v, &mut tmp);
            apply_l(&tmp, out);
        },
        LanczosOptions { max_iter: 600, tol: 1e-9 },
    )?;
    Ok(res.min.max(0.0).sqrt())
}

#[cfg(test)]
mod tests;
