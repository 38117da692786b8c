//! Quick invariant suite run by `localizer-lab selfcheck`: small, seeded
//! versions of each module's property checks.

use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::Determinant;
use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clifford::{build_clifford_rep, symmetry_ops};
use crate::error::Result;
use crate::experiments::{sweep, FlattenMode, PathParameter, PointSpec, SweepSpec};
use crate::lattice::{build_cubic_window, Region};
use crate::linalg::{eigh, inertia, pfaffian, Structure, StructuredMatrix};
use crate::localizer::{assemble, evaluate_index, LocalizerConfig, DEFAULT_GAP_FLOOR};
use crate::operators::{
    apply_disorder, build_model, spectral_flatten, verify_symmetry, AzClass, DisorderSpec, ModelSpec, DEFAULT_ZERO_TOL,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check { name, pass: false, detail: format!("{}: {e}", e.class()) },
    }
}

fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + &adjoint(&a)) * C64::new(0.5, 0.0)
}

fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    &a - &a.t()
}

fn clifford() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for d in 1..=6 {
        let rep = build_clifford_rep(d)?;
        worst = worst.max(rep.relation_defect());
        let ops = symmetry_ops(&rep);
        let sign = if (d / 2) % 2 == 0 { 1.0 } else { -1.0 };
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = rep.clifford_vector(&x);
            let bar = v.mapv(|z| z.conj());
            let conj = |s: &Array2<C64>| adjoint(s).dot(&bar).dot(s);
            worst = worst.max(max_abs(&(conj(&ops.sigma) - &v * C64::new(sign, 0.0))));
            if let (Some(sh), Some(om)) = (&ops.sigma_hat, &ops.omega) {
                worst = worst.max(max_abs(&(conj(sh) + &v * C64::new(sign, 0.0))));
                worst = worst.max(max_abs(&(adjoint(om).dot(&v).dot(om) + &v)));
            }
        }
    }
    Ok((worst <= 1e-12, format!("d = 1..6, max defect {worst:.1e}")))
}

fn lattice() -> Result<(bool, String)> {
    let p = build_cubic_window(2, 6)?;
    let bijective = (0..p.len()).all(|i| p.index_of(p.site(i)) == Some(i));
    let ordered = (1..p.len()).all(|i| p.site(i - 1) < p.site(i));
    Ok((bijective && ordered && p.min_separation() == 1.0, format!("{} sites, lexicographic", p.len())))
}

fn inertia_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let a = random_hermitian(60, &mut rng);
        let (vals, _) = eigh(&a)?;
        let want = vals.iter().filter(|v| **v > 0.0).count() as i64 - vals.iter().filter(|v| **v < 0.0).count() as i64;
        let got = inertia(&StructuredMatrix::new(a, Structure::Hermitian)?, 1e-12)?.signature();
        if got != want {
            return Ok((false, format!("signature {got}, eigendecomposition {want}")));
        }
    }
    Ok((true, "10 random 60×60 Hermitian matrices".into()))
}

fn pfaffian_identity() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let a = random_skew(40, &mut rng);
        let pf = pfaffian(&a)?;
        let (sign, log_det) = a.sln_det()?;
        worst = worst.max(((2.0 * pf.log_abs - log_det).exp() - 1.0).abs());
        if sign < 0.0 {
            return Ok((false, "negative determinant of a real skew matrix".into()));
        }
        // a transposition of one index pair flips the Pfaffian
        let mut idx: Vec<usize> = (0..40).collect();
        idx.shuffle(&mut rng);
        let (i, j) = (idx[0], idx[1]);
        let mut perm: Vec<usize> = (0..40).collect();
        perm.swap(i, j);
        let b = Array2::from_shape_fn((40, 40), |(r, c)| a[[perm[r], perm[c]]]);
        if pfaffian(&b)?.sign != -pf.sign {
            return Ok((false, "transposition did not flip the Pfaffian sign".into()));
        }
    }
    Ok((worst <= 1e-8, format!("Pf² = det to relative {worst:.1e}")))
}

fn model_symmetries() -> Result<(bool, String)> {
    let p2 = Arc::new(build_cubic_window(2, 3)?);
    let p1 = Arc::new(build_cubic_window(1, 6)?);
    let mut worst = 0.0_f64;
    let mut pass = true;
    for (spec, p) in [
        (ModelSpec::Aii2d { m: 1.0 }, &p2),
        (ModelSpec::Qwz2d { m: -1.0 }, &p2),
        (ModelSpec::Ssh1d { m: 0.5, w: 1.0 }, &p1),
        (ModelSpec::TrivialReference { fiber: 4, class: None }, &p2),
    ] {
        let (h, sym) = build_model(&spec, p)?;
        let report = verify_symmetry(&h, &sym, 1e-12)?;
        pass &= report.pass;
        worst = worst.max(report.max_violation());
        if sym.class == AzClass::AII {
            for seed in 0..5 {
                let d = apply_disorder(&h, &DisorderSpec::uniform(1.0, seed, 0), &sym)?;
                let r = verify_symmetry(&d, &sym, 1e-12)?;
                pass &= r.pass;
                worst = worst.max(r.max_violation());
            }
        }
    }
    Ok((pass, format!("four models and five disordered AII draws, max violation {worst:.1e}")))
}

fn flattening() -> Result<(bool, String)> {
    let p = Arc::new(build_cubic_window(2, 4)?);
    let (h, _) = build_model(&ModelSpec::Qwz2d { m: 1.0 }, &p)?;
    let f = spectral_flatten(&h, &Region::Sites((0..p.len()).collect()), DEFAULT_ZERO_TOL)?;
    let defect = f.involution_defect();
    Ok((defect <= 1e-10, format!("‖F² − 1‖ = {defect:.1e}")))
}

fn dirac_square() -> Result<(bool, String)> {
    let p = Arc::new(build_cubic_window(2, 3)?);
    let dd = crate::dirac::DiracData::new(p.clone(), vec![0.5, 0.5], 0.0)?;
    let mut worst = 0.0_f64;
    for i in 0..p.len() {
        let b = dd.site_block(i);
        let r2 = dd.distance(i).powi(2);
        worst = worst.max(max_abs(&(b.dot(&b) - Array2::<C64>::eye(b.nrows()) * C64::new(r2, 0.0))));
    }
    Ok((worst <= 1e-12, format!("D² = |x − z|², defect {worst:.1e}")))
}

fn localizer_indices() -> Result<(bool, String)> {
    let z = vec![0.5, 0.5];
    let p = Arc::new(build_cubic_window(2, 10)?);
    let cfg = LocalizerConfig::new(0.3, 3.0, z.clone());
    let dd = cfg.dirac(p.clone())?;
    let ball = Region::Ball { center: z, radius: 6.5 };
    let index = |spec: &ModelSpec| -> Result<(i64, f64)> {
        let (h, _) = build_model(spec, &p)?;
        let f = spectral_flatten(&h, &ball, DEFAULT_ZERO_TOL)?;
        let l = assemble(&f, spec.class(), &dd, &cfg)?;
        if spec.class() == AzClass::AII {
            let (r, _) = build_model(&ModelSpec::TrivialReference { fiber: 4, class: Some(AzClass::AII) }, &p)?;
            let fr = spectral_flatten(&r, &ball, DEFAULT_ZERO_TOL)?;
            let lr = assemble(&fr, AzClass::AII, &dd, &cfg)?;
            Ok((evaluate_index(&l, Some(&lr), DEFAULT_GAP_FLOOR)?.value, l.matrix.violation()))
        } else {
            Ok((evaluate_index(&l, None, DEFAULT_GAP_FLOOR)?.value, 0.0))
        }
    };
    let got = [
        index(&ModelSpec::Qwz2d { m: 3.0 })?.0,
        index(&ModelSpec::Qwz2d { m: 1.0 })?.0,
        index(&ModelSpec::Aii2d { m: 3.0 })?.0,
        index(&ModelSpec::Aii2d { m: 1.0 })?.0,
    ];
    let skew = index(&ModelSpec::Aii2d { m: 1.0 })?.1;
    let pass = got == [0, 1, 1, -1] && skew <= 1e-10;
    Ok((pass, format!("qwz m=3,1 → {}, {}; aii m=3,1 → {}, {}; skew defect {skew:.1e}", got[0], got[1], got[2], got[3])))
}

fn reproducibility() -> Result<(bool, String)> {
    let mut base = PointSpec::new(ModelSpec::Ssh1d { m: 0.5, w: 1.0 }, 0.0, LocalizerConfig::new(0.3, 6.0, vec![0.5]));
    base.flatten = FlattenMode::Local;
    base.coupling = Some(vec![vec![[0.0, 0.0], [1.0, 0.0]], vec![[1.0, 0.0], [0.0, 0.0]]]);
    let spec = SweepSpec { base, parameter: PathParameter::Lambda, values: vec![0.0, 0.5], samples: 3, seed: 9, max_resamples: 0 };
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
    let a = sweep(&spec, &pool(1))?;
    let b = sweep(&spec, &pool(2))?;
    let same = a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| {
            x.index == y.index
                && x.localizer_gap.zip(y.localizer_gap).is_some_and(|(g, h)| (g - h).abs() <= 1e-10)
        });
    Ok((same, format!("{} rows, serial vs two workers", a.rows.len())))
}

/// Runs every check; none of them panics on failure.
pub fn run_all() -> Vec<Check> {
    vec![
        check("clifford relations", clifford),
        check("lattice ordering", lattice),
        check("inertia vs eigendecomposition", inertia_oracle),
        check("pfaffian identities", pfaffian_identity),
        check("model symmetries", model_symmetries),
        check("flattening involution", flattening),
        check("dirac square", dirac_square),
        check("localizer indices", localizer_indices),
        check("serial vs parallel", reproducibility),
    ]
}
