use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::lattice::{build_cubic_window, Region};
use crate::linalg::{MatrixData, Structure, StructuredMatrix};
use crate::operators::{build_model, spectral_flatten, FlattenedHamiltonian, ModelSpec};

fn window(d: usize, w: usize) -> Arc<Pattern> {
    Arc::new(build_cubic_window(d, w).unwrap())
}

fn flat_on_ball(spec: &ModelSpec, p: &Arc<Pattern>, z: &[f64], radius: f64) -> FlattenedHamiltonian {
    let (h, _) = build_model(spec, p).unwrap();
    spectral_flatten(&h, &Region::Ball { center: z.to_vec(), radius }, 1e-8).unwrap()
}

/// Index of `spec` at (κ, ρ, z), flattened on the doubled ball.
fn index_of(spec: &ModelSpec, kappa: f64, rho: f64, z: &[f64]) -> i64 {
    let p = window(2, (2.0 * rho) as usize + 3);
    let cfg = LocalizerConfig::new(kappa, rho, z.to_vec());
    let dd = cfg.dirac(p.clone()).unwrap();
    let h = flat_on_ball(spec, &p, z, 2.0 * rho + 0.01);
    let l = assemble(&h, spec.class(), &dd, &cfg).unwrap();
    let v = if l.index_kind() == IndexKind::Z2 {
        let r = flat_on_ball(&ModelSpec::TrivialReference { fiber: 4, class: None }, &p, z, 2.0 * rho + 0.01);
        let lr = assemble(&r, AzClass::AII, &dd, &cfg).unwrap();
        evaluate_index(&l, Some(&lr), DEFAULT_GAP_FLOOR).unwrap()
    } else {
        evaluate_index(&l, None, DEFAULT_GAP_FLOOR).unwrap()
    };
    assert!(v.margin_ok);
    v.value
}

fn hand_made(diag: &[f64], kind: LocalizerKind) -> LocalizerMatrix {
    let m = Array2::from_diag(&ndarray::Array1::from(diag.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>()));
    LocalizerMatrix {
        matrix: StructuredMatrix::new(m, Structure::Hermitian).unwrap(),
        class: AzClass::A,
        kappa: 1.0,
        layout: Layout {
            kind,
            sites: (0..diag.len()).collect(),
            pattern_len: diag.len(),
            offset: vec![0.5],
            rho: 1.0,
            rescale: 0.0,
            clifford: 1,
            fiber: 1,
        },
        margin_ok: true,
        provenance: Provenance::default(),
    }
}

fn aii_pair(m: f64, kappa: f64, rho: f64) -> (LocalizerMatrix, LocalizerMatrix) {
    let z = vec![0.5, 0.5];
    let p = window(2, (2.0 * rho) as usize + 3);
    let cfg = LocalizerConfig::new(kappa, rho, z.clone());
    let dd = cfg.dirac(p.clone()).unwrap();
    let h = flat_on_ball(&ModelSpec::Aii2d { m }, &p, &z, 2.0 * rho + 0.01);
    let r = flat_on_ball(&ModelSpec::TrivialReference { fiber: 4, class: None }, &p, &z, 2.0 * rho + 0.01);
    (assemble_skew_aii(&h, &dd, &cfg).unwrap(), assemble_skew_aii(&r, &dd, &cfg).unwrap())
}

#[test]
fn trivial_even_localizer_has_index_zero() {
    let p = window(2, 12);
    let z = vec![0.5, 0.5];
    let cfg = LocalizerConfig::new(0.1, 5.0, z.clone());
    let dd = cfg.dirac(p.clone()).unwrap();
    let h = flat_on_ball(&ModelSpec::TrivialReference { fiber: 2, class: None }, &p, &z, 10.01);
    let l = assemble_even(&h, &dd, &cfg).unwrap();
    assert_eq!(l.matrix.structure(), Structure::Hermitian);
    assert_eq!(l.dim(), l.layout.sites.len() * 4);
    let v = evaluate_index(&l, None, DEFAULT_GAP_FLOOR).unwrap();
    assert_eq!((v.kind, v.value, v.raw), (IndexKind::Z, 0, 0));
    assert!(v.margin_ok);
    // a flat trivial H keeps the localizer gapped by at least g/2
    assert!(localizer_gap_check(&l, h.gap()).unwrap().pass);
}

#[test]
fn signature_two_is_index_one() {
    let v = evaluate_index(&hand_made(&[1.0, 2.0, 3.0, -1.0], LocalizerKind::Even), None, 1e-8).unwrap();
    assert_eq!((v.value, v.raw), (1, 2));
    // the odd localizer carries the opposite sign
    let v = evaluate_index(&hand_made(&[1.0, 2.0, 3.0, -1.0], LocalizerKind::Odd), None, 1e-8).unwrap();
    assert_eq!(v.value, -1);
}

#[test]
fn odd_signature_is_rejected() {
    let err = evaluate_index(&hand_made(&[1.0, 1.0, -1.0], LocalizerKind::Even), None, 1e-8).unwrap_err();
    assert!(matches!(err, LabError::Structure(_)), "{err}");
}

#[test]
fn singular_localizer_is_not_invertible() {
    let err = evaluate_index(&hand_made(&[1.0, 1e-12, -1.0, -1.0], LocalizerKind::Even), None, 1e-8).unwrap_err();
    assert!(matches!(err, LabError::NotInvertible { .. }), "{err}");
}

#[test]
fn reference_contract() {
    let l = hand_made(&[1.0, -1.0], LocalizerKind::Even);
    assert!(matches!(evaluate_index(&l, Some(&l), 1e-8), Err(LabError::InvalidArgument(_))));
    let (a, _) = aii_pair(1.0, 0.3, 3.0);
    assert!(matches!(evaluate_index(&a, None, 1e-8), Err(LabError::InvalidArgument(_))));
}

#[test]
fn skew_localizer_is_real_skew_and_self_normalizes() {
    let (l, r) = aii_pair(1.0, 0.3, 4.0);
    assert_eq!(l.matrix.structure(), Structure::RealSkew);
    assert!(l.matrix.violation() <= 1e-10, "violation {}", l.matrix.violation());
    assert!(r.matrix.violation() <= 1e-10);
    assert!(matches!(l.matrix.data(), MatrixData::Real(_)));
    let same = evaluate_index(&l, Some(&l), DEFAULT_GAP_FLOOR).unwrap();
    assert_eq!((same.kind, same.value), (IndexKind::Z2, 1));
    let v = evaluate_index(&l, Some(&r), DEFAULT_GAP_FLOOR).unwrap();
    assert_eq!(v.value, -1);
    assert!(v.reference_gap.unwrap() > 0.5);
}

#[test]
fn reference_with_other_ordering_is_rejected() {
    let (l, r) = aii_pair(1.0, 0.3, 3.0);
    let n = l.layout.sites.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.swap(0, n - 1);
    let err = evaluate_index(&l, Some(&r.permute_sites(&perm).unwrap()), DEFAULT_GAP_FLOOR).unwrap_err();
    assert!(matches!(err, LabError::ReferenceMismatch(_)), "{err}");
    // a reference at another κ is fine
    let (_, r2) = aii_pair(1.0, 0.2, 3.0);
    assert_eq!(evaluate_index(&l, Some(&r2), DEFAULT_GAP_FLOOR).unwrap().value, -1);
}

#[test]
fn z2_index_survives_joint_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in [1.0, 3.0] {
        let (l, r) = aii_pair(m, 0.3, 3.0);
        let base = evaluate_index(&l, Some(&r), DEFAULT_GAP_FLOOR).unwrap().value;
        for _ in 0..10 {
            let mut perm: Vec<usize> = (0..l.layout.sites.len()).collect();
            perm.shuffle(&mut rng);
            let (lp, rp) = (l.permute_sites(&perm).unwrap(), r.permute_sites(&perm).unwrap());
            let v = evaluate_index(&lp, Some(&rp), DEFAULT_GAP_FLOOR).unwrap();
            assert_eq!(v.value, base);
        }
    }
}

#[test]
fn permutation_rejects_non_permutations() {
    let (l, _) = aii_pair(3.0, 0.3, 2.0);
    let n = l.layout.sites.len();
    assert!(l.permute_sites(&vec![0; n]).is_err());
    assert!(l.permute_sites(&(0..n - 1).collect::<Vec<_>>()).is_err());
}

#[test]
fn ssh_limits() {
    let z = vec![0.5];
    let p = window(1, 40);
    let index = |m: f64, w: f64| {
        let (h, _) = build_model(&ModelSpec::Ssh1d { m, w }, &p).unwrap();
        let h = FlattenedHamiltonian::unflattened(&h, &Region::Ball { center: z.clone(), radius: 30.0 }).unwrap();
        let cfg = LocalizerConfig::new(0.2, 12.0, z.clone());
        let dd = cfg.dirac(p.clone()).unwrap();
        let l = assemble(&h, AzClass::AIII, &dd, &cfg).unwrap();
        assert_eq!(l.layout.kind, LocalizerKind::Odd);
        evaluate_index(&l, None, DEFAULT_GAP_FLOOR).unwrap().value
    };
    assert_eq!(index(1.0, 0.0), 0);
    assert_eq!(index(1.0, 0.5), 0);
    // h₀(k) = m − w e^{−ik} winds once clockwise when w > m
    assert_eq!(index(0.0, 1.0), -1);
    assert_eq!(index(0.5, 1.0), -1);
}

#[test]
fn ssh_critical_point_is_not_admissible() {
    let z = vec![0.5];
    let mut gaps = Vec::new();
    for w in [20usize, 40, 80] {
        let p = window(1, w);
        let (h, _) = build_model(&ModelSpec::Ssh1d { m: 1.0, w: 1.0 }, &p).unwrap();
        let h = FlattenedHamiltonian::unflattened(&h, &Region::Ball { center: z.clone(), radius: w as f64 }).unwrap();
        let cfg = LocalizerConfig::new(0.05, 0.4 * w as f64, z.clone());
        let dd = cfg.dirac(p.clone()).unwrap();
        let adm = admissible_params(&h, &dd, h.gap()).unwrap();
        assert!(!adm.admits(cfg.kappa, cfg.rho));
        gaps.push(h.gap());
    }
    // the finite-volume gap closes like 1/L
    assert!(gaps[1] < 0.6 * gaps[0] && gaps[2] < 0.6 * gaps[1], "{gaps:?}");
}

#[test]
fn admissible_parameter_formulas() {
    let a = AdmissibleParams::from_norms(1.0, 1.0, 2.0).unwrap();
    assert!((a.kappa_max - 1.0 / 24.0).abs() < 1e-15);
    assert!((a.rho_min_for(0.05) - 40.0).abs() < 1e-12);
    assert!((a.rho_min - 48.0).abs() < 1e-12);
    assert!(a.admits(0.04, 51.0));
    assert!(!a.admits(0.04, 49.0));
    assert!(!a.admits(1.0 / 24.0, 100.0));
    let g = AdmissibleParams::from_norms(0.5, 2.0, 3.0).unwrap();
    assert!((g.kappa_max - 0.125 / 72.0).abs() < 1e-15);
    assert!(AdmissibleParams::from_norms(0.0, 1.0, 1.0).is_err());
}

#[test]
fn gap_check_threshold() {
    assert!(gap_check_value(0.5, 1.0).pass);
    assert!(!gap_check_value(0.4999, 1.0).pass);
}

#[test]
fn plateau_in_kappa_rho_and_offset() {
    for (spec, want) in [(ModelSpec::Qwz2d { m: 1.0 }, 1), (ModelSpec::Aii2d { m: -1.0 }, -1), (ModelSpec::Aii2d { m: 3.0 }, 1)] {
        for kappa in [0.2, 0.3, 0.4] {
            for rho in [3.0, 5.0] {
                assert_eq!(index_of(&spec, kappa, rho, &[0.5, 0.5]), want, "{spec} κ {kappa} ρ {rho}");
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let z = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
        assert_eq!(index_of(&ModelSpec::Qwz2d { m: -1.0 }, 0.3, 4.0, &z), -1, "z = {z:?}");
    }
}

#[test]
fn margin_and_window_rules() {
    let z = vec![0.5, 0.5];
    let p = window(2, 12);
    let cfg = LocalizerConfig::new(0.3, 4.0, z.clone());
    let dd = cfg.dirac(p.clone()).unwrap();
    let spec = ModelSpec::Qwz2d { m: 1.0 };

    let narrow = flat_on_ball(&spec, &p, &z, 5.0);
    let l = assemble_even(&narrow, &dd, &cfg).unwrap();
    assert!(!l.margin_ok);
    assert!(!evaluate_index(&l, None, DEFAULT_GAP_FLOOR).unwrap().margin_ok);

    let too_small = flat_on_ball(&spec, &p, &z, 3.0);
    assert!(matches!(assemble_even(&too_small, &dd, &cfg), Err(LabError::WindowExhausted(_))));

    let big = LocalizerConfig::new(0.3, 13.0, z.clone());
    let h = flat_on_ball(&spec, &p, &z, 30.0);
    assert!(matches!(assemble_even(&h, &big.dirac(p.clone()).unwrap(), &big), Err(LabError::WindowExhausted(_))));

    // config and Dirac data must agree
    let other = LocalizerConfig::new(0.3, 4.0, vec![0.4, 0.5]);
    assert!(assemble_even(&narrow, &dd, &other).is_err());
    assert!(LocalizerConfig::new(0.0, 4.0, z.clone()).validate().is_err());
    assert!(LocalizerConfig::new(0.3, -1.0, z).validate().is_err());
}

#[test]
fn dispatch_rejects_unsupported_pairs() {
    let p = window(2, 6);
    let z = vec![0.5, 0.5];
    let cfg = LocalizerConfig::new(0.3, 2.0, z.clone());
    let dd = cfg.dirac(p.clone()).unwrap();
    let h = flat_on_ball(&ModelSpec::Qwz2d { m: 1.0 }, &p, &z, 6.0);
    assert!(assemble(&h, AzClass::AIII, &dd, &cfg).is_err());
    assert!(assemble(&h, AzClass::D, &dd, &cfg).is_err());
    // fiber 2 cannot carry the AII localizer
    assert!(assemble_skew_aii(&h, &dd, &cfg).is_err());
}

#[test]
fn text_dump_has_header_and_rows() {
    let (l, _) = aii_pair(1.0, 0.3, 1.5);
    let l = l.with_provenance(Provenance { model: Some("aii_2d(m=1)".into()), seed: Some(7), lambda: Some(0.0) });
    let mut buf = Vec::new();
    l.write_text(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# localizer SkewAii class AII"));
    assert!(lines[2].starts_with("# kappa 3e-1 rho 1.5e0"));
    assert!(lines[4].contains("seed 7"));
    let rows: Vec<&&str> = lines.iter().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), l.dim());
    assert_eq!(rows[0].split_whitespace().count(), l.dim());
}

fn affine_check(spec1: &ModelSpec, spec2: &ModelSpec, alpha: f64) -> f64 {
    let p = window(2, 5);
    let z = vec![0.5, 0.5];
    let cfg = LocalizerConfig::new(0.3, 3.0, z);
    let dd = cfg.dirac(p.clone()).unwrap();
    let all = Region::Sites((0..p.len()).collect());
    let (h1, _) = build_model(spec1, &p).unwrap();
    let (h2, _) = build_model(spec2, &p).unwrap();
    let mix = h1.combine(alpha, &h2, 1.0 - alpha).unwrap();
    let loc = |h: &crate::operators::BlockOperator| {
        let f = FlattenedHamiltonian::unflattened(h, &all).unwrap();
        assemble(&f, spec1.class(), &dd, &cfg).unwrap().matrix.to_complex()
    };
    let lhs = loc(&mix);
    let rhs = loc(&h1) * C64::new(alpha, 0.0) + loc(&h2) * C64::new(1.0 - alpha, 0.0);
    lhs.iter().zip(rhs.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn localizer_is_affine_in_h(alpha in -1.0f64..2.0, m1 in -3.0f64..3.0, m2 in -3.0f64..3.0) {
        let (q1, q2) = (ModelSpec::Qwz2d { m: m1 }, ModelSpec::Qwz2d { m: m2 });
        let (a1, a2) = (ModelSpec::Aii2d { m: m1 }, ModelSpec::Aii2d { m: m2 });
        prop_assert!(affine_check(&q1, &q2, alpha) <= 1e-12);
        prop_assert!(affine_check(&a1, &a2, alpha) <= 1e-12);
    }
}

#[test]
fn matrix_free_singular_value_matches_dense() {
    let p = window(2, 9);
    let z = [0.37, 0.61];
    for (m, kappa) in [(1.0, 0.3), (3.0, 0.15)] {
        let spec = ModelSpec::Qwz2d { m };
        let cfg = LocalizerConfig::new(kappa, 4.0, z.to_vec());
        let dd = cfg.dirac(p.clone()).unwrap();
        let h = flat_on_ball(&spec, &p, &z, 8.01);
        let dense = min_singular_value(&assemble(&h, spec.class(), &dd, &cfg).unwrap()).unwrap();
        let sites = crate::dirac::ball_projection(&dd, 4.0).unwrap().sites;
        let hb = h.restrict(&sites).unwrap();
        let free = even_min_singular_matrix_free(&dd, &sites, 2, kappa, |x| hb.dot(x)).unwrap();
        assert!((free - dense).abs() < 1e-6, "m = {m}: matrix-free {free}, dense {dense}");
    }
}
