//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers to run a subset:
//! `cargo test --test acceptance -- 5 9`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::Array2;
use ndarray_linalg::{Determinant, EigValsh, UPLO};
use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use localizer_lab::clifford::{build_clifford_rep, symmetry_ops};
use localizer_lab::cli::default_interface;
use localizer_lab::dirac::{commutator_norm, DiracData};
use localizer_lab::experiments::{
    convergence_study, interface_probe, offset_invariance, random_offsets, run_point, sweep, ConvergenceSpec, FlattenMode,
    OffsetSpec, PathParameter, PointSpec, ResultTable, SweepSpec,
};
use localizer_lab::lattice::{build_cubic_window, sites_in_ball, Region};
use localizer_lab::linalg::{inertia, pfaffian, Structure, StructuredMatrix};
use localizer_lab::localizer::{even_min_singular_matrix_free, LocalizerConfig};
use localizer_lab::operators::{build_model, periodic_flatten, spectral_flatten, ModelSpec, DEFAULT_ZERO_TOL};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("took {:.1} s, limit {} s", t.as_secs_f64(), limit.as_secs()))
}

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool")
}

fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn clifford_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for d in 1..=6usize {
        let rep = build_clifford_rep(d).map_err(|e| e.to_string())?;
        let g = rep.generators();
        let size = rep.matrix_size();
        ensure(g.len() == d && size == 1 << (d / 2), || format!("d = {d}: wrong shape"))?;
        let eye = Array2::<C64>::eye(size);
        for i in 0..d {
            for j in 0..d {
                let anti = g[i].dot(&g[j]) + g[j].dot(&g[i]);
                let want = if i == j { &eye * c(2.0) } else { Array2::zeros((size, size)) };
                worst = worst.max(max_abs(&(anti - want)));
            }
            worst = worst.max(max_abs(&(adjoint(&g[i]) - &g[i])));
            worst = worst.max(max_abs(&(adjoint(&g[i]).dot(&g[i]) - &eye)));
            // generator i + 1: odd ones real, even ones imaginary
            let parity = if i % 2 == 0 { g[i].iter().map(|z| z.im.abs()).fold(0.0, f64::max) } else { g[i].iter().map(|z| z.re.abs()).fold(0.0, f64::max) };
            worst = worst.max(parity);
        }
        let ops = symmetry_ops(&rep);
        let sign = if (d / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let real_unitary = |m: &Array2<C64>| {
            m.iter().map(|z| z.im.abs()).fold(0.0, f64::max).max(max_abs(&(adjoint(m).dot(m) - &eye)))
        };
        worst = worst.max(real_unitary(&ops.sigma));
        let even = d % 2 == 0;
        ensure(ops.sigma_hat.is_some() == even && ops.omega.is_some() == even && ops.chiral.is_some() == even, || {
            format!("d = {d}: even-only operators present for odd d or missing for even d")
        })?;
        if let (Some(sh), Some(om), Some(ch)) = (&ops.sigma_hat, &ops.omega, &ops.chiral) {
            worst = worst.max(real_unitary(sh));
            worst = worst.max(max_abs(&(adjoint(om).dot(om) - &eye)).max(max_abs(&(adjoint(om) - om))));
            // γ₀ = i^{d/2} γ₁⋯γ_d = diag(1, −1)
            let mut prod = eye.clone() * C64::i().powu((d / 2) as u32);
            for gi in g {
                prod = prod.dot(gi);
            }
            let diag = Array2::from_shape_fn((size, size), |(a, b)| if a != b { c(0.0) } else if a < size / 2 { c(1.0) } else { c(-1.0) });
            worst = worst.max(max_abs(&(&prod - &diag))).max(max_abs(&(ch - &diag)));
        }
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = g.iter().zip(&x).fold(Array2::<C64>::zeros((size, size)), |acc, (gi, &xi)| acc + gi * c(xi));
            let bar = v.mapv(|z| z.conj());
            let conj = |s: &Array2<C64>| adjoint(s).dot(&bar).dot(s);
            worst = worst.max(max_abs(&(conj(&ops.sigma) - &v * c(sign))));
            if let (Some(sh), Some(om), Some(ch)) = (&ops.sigma_hat, &ops.omega, &ops.chiral) {
                worst = worst.max(max_abs(&(conj(sh) + &v * c(sign))));
                worst = worst.max(max_abs(&(adjoint(om).dot(&v).dot(om) + &v)));
                let plus = (&eye + ch) * c(0.5);
                let minus = (&eye - ch) * c(0.5);
                worst = worst.max(max_abs(&plus.dot(&v).dot(&plus))).max(max_abs(&minus.dot(&v).dot(&minus)));
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.2e}"))?;
    within(start, Duration::from_secs(1))?;
    Ok(format!("d = 1..6, 100 vectors each, max deviation {worst:.1e}"))
}

fn permutation_sign(perm: &[usize]) -> i8 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1;
    for s in 0..perm.len() {
        let mut len = 0;
        let mut i = s;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len > 0 && len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

fn linalg_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for t in 0..50 {
        let a = Array2::from_shape_fn((200, 200), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = (&a + &adjoint(&a)) * c(0.5);
        let vals = h.eigvalsh(UPLO::Lower).map_err(|e| e.to_string())?;
        let (pos, neg) = (vals.iter().filter(|v| **v > 0.0).count(), vals.iter().filter(|v| **v < 0.0).count());
        let got = inertia(&StructuredMatrix::new(h, Structure::Hermitian).map_err(|e| e.to_string())?, 0.0).map_err(|e| e.to_string())?;
        ensure((got.positive, got.negative) == (pos, neg), || {
            format!("matrix {t}: inertia ({}, {}), eigenvalues ({pos}, {neg})", got.positive, got.negative)
        })?;
    }
    let mut worst = 0.0_f64;
    let mut skews = Vec::new();
    for _ in 0..50 {
        let a = Array2::from_shape_fn((100, 100), |_| rng.random_range(-1.0..1.0));
        let a = &a - &a.t();
        let pf = pfaffian(&a).map_err(|e| e.to_string())?;
        let (sign, log_det) = a.sln_det().map_err(|e| e.to_string())?;
        ensure(sign > 0.0, || "negative determinant of a real skew matrix".into())?;
        worst = worst.max((2.0 * pf.log_abs - log_det).exp_m1().abs());
        skews.push((a, pf));
    }
    ensure(worst <= 1e-8, || format!("Pf² vs det: relative deviation {worst:.2e}"))?;
    for (k, (a, pf)) in skews.iter().enumerate() {
        let mut perm: Vec<usize> = (0..100).collect();
        perm.shuffle(&mut rng);
        let b = Array2::from_shape_fn((100, 100), |(i, j)| a[[perm[i], perm[j]]]);
        let pb = pfaffian(&b).map_err(|e| e.to_string())?;
        ensure(pb.sign == permutation_sign(&perm) * pf.sign && (pb.log_abs - pf.log_abs).abs() <= 1e-8, || {
            format!("permutation {k}: Pf sign {} vs {} · {}", pb.sign, permutation_sign(&perm), pf.sign)
        })?;
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("50 inertias exact, Pf² = det to {worst:.1e}, 50 permutation signs"))
}

/// Index at the plateau of a κ × ρ scan on the 61 × 61 window.
fn plateau_index(model: ModelSpec) -> Result<(i64, (f64, f64), usize), String> {
    let mut base = PointSpec::new(model.clone(), 0.0, LocalizerConfig::new(0.3, 4.0, vec![0.5, 0.5]));
    base.flatten = FlattenMode::Local;
    base.window = Some(30);
    let spec = ConvergenceSpec {
        base,
        kappas: vec![0.2, 0.3, 0.4],
        rhos: vec![3.0, 4.0, 5.0],
        samples: vec![0],
        seed: 0,
        gap_threshold: 0.1,
        admissibility: false,
    };
    let report = convergence_study(&spec, &pool(1)).map_err(|e| e.to_string())?;
    let p = report.plateau.ok_or_else(|| format!("{model}: no plateau"))?;
    Ok((p.value, p.recommended, p.cells.len()))
}

fn chern_equivalence() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for m in [-3.0, -1.0, 1.0, 3.0] {
        let oracle = common::qwz_chern(m, 128);
        let (value, at, size) = plateau_index(ModelSpec::Qwz2d { m })?;
        ensure(value == oracle, || format!("m = {m}: ½Sig = {value}, Chern oracle {oracle}"))?;
        parts.push(format!("m={m}: {value} (plateau {size}/9, κ={}, ρ={})", at.0, at.1));
    }
    within(start, Duration::from_secs(180))?;
    Ok(parts.join("; "))
}

fn z2_phase_diagram() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (m, want) in [(-3.0, 1), (-1.0, -1), (1.0, -1), (3.0, 1)] {
        let (value, at, size) = plateau_index(ModelSpec::Aii2d { m })?;
        ensure(value == want, || format!("m = {m}: Z2 index {value}, expected {want}"))?;
        parts.push(format!("m={m}: {value} (plateau {size}/9, κ={}, ρ={})", at.0, at.1));
    }
    within(start, Duration::from_secs(180))?;
    Ok(parts.join("; "))
}

/// Admissible (κ, ρ) from measured norms of the infinite-volume flattened
/// model, then the localizer's smallest singular value at five offsets.
fn gap_guarantee() -> Outcome {
    let p = Arc::new(build_cubic_window(2, 52).map_err(|e| e.to_string())?);
    let (h, _) = build_model(&ModelSpec::Aii2d { m: 3.0 }, &p).map_err(|e| e.to_string())?;
    let anchor = p.index_of(&[0.0, 0.0]).expect("origin");
    let torus = periodic_flatten(&h, anchor, 256, DEFAULT_ZERO_TOL).map_err(|e| e.to_string())?;
    // sgn h has spectrum ±1
    let (g, h_norm) = (torus.bloch_gap().min(1.0), 1.0);
    let rep = build_clifford_rep(2).map_err(|e| e.to_string())?;
    let comm = torus.commutator_symbol_norm(&rep).map_err(|e| e.to_string())?;
    let kappa_max = g.powi(3) / (12.0 * h_norm * comm);
    let kappa = 0.99 * kappa_max;
    let rho = 2.0 * g / kappa * 1.001;
    let offsets = random_offsets(5, 2, 0.2, 0.8, 15);
    let mut mins = Vec::new();
    for z in &offsets {
        let dd = DiracData::new(p.clone(), z.clone(), 0.0).map_err(|e| e.to_string())?;
        let sites = sites_in_ball(&p, z, rho);
        let s = even_min_singular_matrix_free(&dd, &sites, 4, kappa, |x| torus.apply(&p, &sites, x).expect("torus apply"))
            .map_err(|e| e.to_string())?;
        ensure(s >= g / 2.0, || format!("z = {z:?}: min singular value {s:.4} < g/2 = {:.4}", g / 2.0))?;
        mins.push(format!("{s:.4}"));
    }
    Ok(format!(
        "g = {g:.3}, ‖H‖ = 1, ‖[D,H]‖ = {comm:.4}, κ = {kappa:.5}, ρ = {rho:.2}; min singular values [{}] ≥ {:.2}",
        mins.join(", "),
        g / 2.0
    ))
}

fn offset_invariance_criterion() -> Outcome {
    let offsets = random_offsets(10, 2, 0.2, 0.8, 16);
    let mut parts = Vec::new();
    for (m, lambda, samples) in [(1.0, 0.0, vec![0]), (3.0, 0.0, vec![0]), (1.0, 0.5, (0..5).collect()), (3.0, 0.5, (0..5).collect())] {
        let mut base = PointSpec::new(ModelSpec::Aii2d { m }, lambda, LocalizerConfig::new(0.3, 4.0, vec![0.5, 0.5]));
        base.flatten = FlattenMode::Local;
        let spec = OffsetSpec { base, offsets: offsets.clone(), samples, seed: 16, max_resamples: 0 };
        let report = offset_invariance(&spec, &pool(1)).map_err(|e| e.to_string())?;
        ensure(report.pass, || format!("m = {m}, λ = {lambda}: {}", report.violations.join("; ")))?;
        let values: Vec<String> = report.verdicts.iter().map(|v| format!("{:?}", v.values[0].unwrap_or(0))).collect();
        parts.push(format!("m={m} λ={lambda}: [{}]", values.join(",")));
    }
    Ok(format!("10 offsets each; {}", parts.join("; ")))
}

fn disorder_sweep(samples: usize, values: Vec<f64>) -> SweepSpec {
    let mut base = PointSpec::new(ModelSpec::Aii2d { m: 1.0 }, 0.0, LocalizerConfig::new(0.3, 4.0, vec![0.5, 0.5]));
    base.flatten = FlattenMode::Local;
    SweepSpec { base, parameter: PathParameter::Lambda, values, samples, seed: 17, max_resamples: 0 }
}

fn disorder_stability() -> Outcome {
    let start = Instant::now();
    let spec = disorder_sweep(20, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
    let table = sweep(&spec, &pool(1)).map_err(|e| e.to_string())?;
    for p in &table.points {
        let share = p.share(-1).map_or(0.0, |s| s.p);
        ensure(share == 1.0 && p.defined == 20, || format!("λ = {}: P̂(−1) = {share}, {} of 20 defined", p.t, p.defined))?;
    }
    let min_gap = table.rows.iter().map(|r| r.flattening_gap.unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
    ensure(min_gap > 0.0, || "a realization has no flattening gap".into())?;
    within(start, Duration::from_secs(900))?;
    Ok(format!("λ = 0..0.5 in 6 steps × 20 seeds: P̂(−1) = 1 everywhere, min flattening gap {min_gap:.2e}"))
}

fn interface_criterion() -> Outcome {
    let start = Instant::now();
    let spec = default_interface();
    let report = interface_probe(&spec, &pool(1)).map_err(|e| e.to_string())?;
    for r in &report.probes {
        let want = if r.first_side { -1 } else { 1 };
        ensure(r.interface_index == Some(want) && r.matches, || {
            format!("probe {} sample {}: interface {:?}, bulk {:?}, expected {want}", r.probe, r.sample, r.interface_index, r.bulk_index)
        })?;
    }
    let glued = report.min_abs_eigenvalue.ok_or("no spectrum")?;
    let mut control = spec.clone();
    control.first = control.second.clone();
    control.decay_radius = 0.0;
    let base = interface_probe(&control, &pool(1)).map_err(|e| e.to_string())?.min_abs_eigenvalue.ok_or("no spectrum")?;
    ensure(glued < 0.2 * base, || format!("min |E| glued {glued:.3e} vs control {base:.3e}"))?;
    within(start, Duration::from_secs(600))?;
    Ok(format!(
        "{} probes over 5 seeds reproduce −1 / +1; min |E| glued {glued:.3e} < 0.2 × control {base:.3e}",
        report.probes.len()
    ))
}

fn rescaling_criterion() -> Outcome {
    let mut plain = Vec::new();
    let mut rescaled = Vec::new();
    for w in [10usize, 15, 20] {
        let p = Arc::new(build_cubic_window(2, w).map_err(|e| e.to_string())?);
        let (h, _) = build_model(&ModelSpec::Aii2d { m: 3.0 }, &p).map_err(|e| e.to_string())?;
        let f = spectral_flatten(&h, &Region::Sites((0..p.len()).collect()), DEFAULT_ZERO_TOL).map_err(|e| e.to_string())?;
        for (r, out) in [(0.0, &mut plain), (0.5, &mut rescaled)] {
            let dd = DiracData::new(p.clone(), vec![0.5, 0.5], r).map_err(|e| e.to_string())?;
            out.push(commutator_norm(&dd, &f, 0.0).map_err(|e| e.to_string())?);
        }
    }
    let ratios = |v: &[f64]| [v[1] / v[0], v[2] / v[1]];
    let (a, b) = (ratios(&plain), ratios(&rescaled));
    ensure(b[0] < a[0] && b[1] < a[1], || format!("growth ratios r=0.5 {b:?} not below r=0 {a:?}"))?;
    Ok(format!(
        "‖[D,F]‖ = {:.4}, {:.4}, {:.4} (ratios {:.4}, {:.4}); ‖[D^(0.5),F]‖ = {:.5}, {:.5}, {:.5} (ratios {:.6}, {:.6})",
        plain[0], plain[1], plain[2], a[0], a[1], rescaled[0], rescaled[1], rescaled[2], b[0], b[1]
    ))
}

fn same_rows(a: &ResultTable, b: &ResultTable) -> Result<(), String> {
    ensure(a.rows.len() == b.rows.len(), || "row counts differ".into())?;
    for (x, y) in a.rows.iter().zip(&b.rows) {
        let gaps = |u: Option<f64>, v: Option<f64>| match (u, v) {
            (Some(u), Some(v)) => (u - v).abs() <= 1e-10,
            (None, None) => true,
            _ => false,
        };
        ensure(
            (x.t, x.sample, x.stream) == (y.t, y.sample, y.stream)
                && x.index == y.index
                && gaps(x.localizer_gap, y.localizer_gap)
                && gaps(x.flattening_gap, y.flattening_gap),
            || format!("row t = {}, sample {} differs", x.t, x.sample),
        )?;
    }
    Ok(())
}

fn reproducibility() -> Outcome {
    let spec = disorder_sweep(4, vec![0.0, 0.25, 0.5]);
    let serial = sweep(&spec, &pool(1)).map_err(|e| e.to_string())?;
    let parallel = sweep(&spec, &pool(3)).map_err(|e| e.to_string())?;
    same_rows(&serial, &parallel)?;
    let rerun: Vec<_> = serial
        .rows
        .iter()
        .map(|r| {
            let mut row = run_point(&spec.point(r.t), spec.seed, r.stream).map_err(|e| e.to_string())?;
            row.point = r.point;
            row.t = r.t;
            row.sample = r.sample;
            Ok(row)
        })
        .collect::<Result<_, String>>()?;
    same_rows(&serial, &ResultTable::from_rows(rerun))?;
    Ok(format!("{} rows identical serial vs 3 workers and on individual rerun", serial.rows.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Clifford suite", clifford_suite),
        ("linear-algebra suite", linalg_suite),
        ("Z index vs Chern oracle", chern_equivalence),
        ("Z2 phase diagram", z2_phase_diagram),
        ("localizer gap guarantee", gap_guarantee),
        ("offset invariance", offset_invariance_criterion),
        ("disorder stability", disorder_stability),
        ("interface experiment", interface_criterion),
        ("rescaling check", rescaling_criterion),
        ("reproducibility", reproducibility),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let number = k + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {number:>2} {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {number:>2} {name} ({secs:.1} s): {detail}");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
