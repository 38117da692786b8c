use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::block::BlockOperator;
use super::pauli::{adjoint, eye, i_sigma2, kron, max_abs, sigma};
use crate::error::{LabError, Result};

/// Altland–Zirnbauer symmetry class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AzClass {
    A,
    AIII,
    AI,
    BDI,
    D,
    DIII,
    AII,
    CII,
    C,
    CI,
}

impl AzClass {
    pub const ALL: [AzClass; 10] = [
        AzClass::A,
        AzClass::AIII,
        AzClass::AI,
        AzClass::BDI,
        AzClass::D,
        AzClass::DIII,
        AzClass::AII,
        AzClass::CII,
        AzClass::C,
        AzClass::CI,
    ];

    /// Position `j ∈ ℤ₈` of a real class in the Bott clock.
    pub fn real_index(self) -> Option<u8> {
        match self {
            AzClass::AI => Some(0),
            AzClass::BDI => Some(1),
            AzClass::D => Some(2),
            AzClass::DIII => Some(3),
            AzClass::AII => Some(4),
            AzClass::CII => Some(5),
            AzClass::C => Some(6),
            AzClass::CI => Some(7),
            AzClass::A | AzClass::AIII => None,
        }
    }

    /// Smallest fiber carrying the standard operators.
    pub fn minimal_fiber(self) -> usize {
        match self {
            AzClass::A | AzClass::AI | AzClass::D => 1,
            AzClass::AIII | AzClass::BDI | AzClass::AII | AzClass::C | AzClass::CI => 2,
            AzClass::DIII | AzClass::CII => 4,
        }
    }
}

impl fmt::Display for AzClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for AzClass {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        AzClass::ALL
            .iter()
            .copied()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabError::InvalidArgument(format!("unknown symmetry class {s:?}")))
    }
}

/// Symmetry operators in standard form. `T` and `P` act as `T𝒞`, `P𝒞`.
#[derive(Clone, Debug)]
pub struct SymmetryData {
    pub class: AzClass,
    pub t: Option<Array2<C64>>,
    pub p: Option<Array2<C64>>,
    /// Standard chiral grading, present for AIII and for classes with both
    /// `T` and `P`.
    pub j: Option<Array2<C64>>,
    pub s_t: i8,
    pub s_p: i8,
}

/// Standard-form operators on `ℂⁿ`: the class table amplified by `1_{n/k}`,
/// on the left for classes without a chiral grading and on the right otherwise.
pub fn standard_symmetry_ops(class: AzClass, n: usize) -> Result<SymmetryData> {
    let k = class.minimal_fiber();
    if n == 0 || n % k != 0 {
        return Err(LabError::InvalidArgument(format!("class {class} needs a fiber divisible by {k}, got {n}")));
    }
    // chiral classes put the copies on the right so that T P stays a phase
    // times the standard grading; the others repeat the minimal block
    let chiral_class = matches!(class, AzClass::BDI | AzClass::DIII | AzClass::CII | AzClass::CI);
    let amp = |m: Array2<C64>| if chiral_class { kron(&m, &eye(n / k)) } else { kron(&eye(n / k), &m) };
    let s = |i| sigma(i);
    let (t, p, s_t, s_p) = match class {
        AzClass::A | AzClass::AIII => (None, None, 0, 0),
        AzClass::AI => (Some(eye(1)), None, 1, 0),
        AzClass::BDI => (Some(eye(2)), Some(s(3)), 1, 1),
        AzClass::D => (None, Some(eye(1)), 0, 1),
        AzClass::DIII => (Some(kron(&s(1), &i_sigma2())), Some(kron(&s(2), &i_sigma2())), -1, 1),
        AzClass::AII => (Some(i_sigma2()), None, -1, 0),
        AzClass::CII => (Some(kron(&eye(2), &s(2))), Some(kron(&s(3), &s(2))), -1, -1),
        AzClass::C => (None, Some(i_sigma2()), 0, -1),
        AzClass::CI => (Some(s(1)), Some(s(2)), 1, -1),
    };
    let both = t.is_some() && p.is_some();
    let j = if class == AzClass::AIII || both { Some(standard_chiral(n)) } else { None };
    Ok(SymmetryData { class, t: t.map(amp), p: p.map(amp), j, s_t, s_p })
}

/// `1_{n/2} ⊕ (−1_{n/2})`.
pub fn standard_chiral(n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(a, b)| {
        if a != b {
            C64::new(0.0, 0.0)
        } else if a < n / 2 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(-1.0, 0.0)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelationCheck {
    pub relation: String,
    pub violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub class: AzClass,
    pub tol: f64,
    pub checks: Vec<RelationCheck>,
    pub pass: bool,
}

impl SymmetryReport {
    pub fn max_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.violation).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> Vec<&RelationCheck> {
        self.checks.iter().filter(|c| c.violation > self.tol).collect()
    }
}

/// Evaluates `T* h̄ T = h`, `P* h̄ P = −h`, `J h J = −h` blockwise (the
/// position basis is real, so `⟨x|h̄|y⟩` is the entrywise conjugate).
pub fn verify_symmetry(h: &BlockOperator, s: &SymmetryData, tol: f64) -> Result<SymmetryReport> {
    let n = h.fiber_dim();
    for op in [&s.t, &s.p, &s.j].into_iter().flatten() {
        if op.dim() != (n, n) {
            return Err(LabError::Dimension(format!("symmetry operator is {:?}, fiber is {n}", op.dim())));
        }
    }
    let mut checks = vec![RelationCheck { relation: "h = h*".into(), violation: h.hermiticity_defect() }];
    let mut relation = |name: &str, f: &dyn Fn(&Array2<C64>) -> Array2<C64>| {
        let violation = h.blocks().map(|(_, _, b)| max_abs(&f(b))).fold(0.0, f64::max);
        checks.push(RelationCheck { relation: name.into(), violation });
    };
    if let Some(t) = &s.t {
        let th = adjoint(t);
        relation("T* h̄ T = h", &|b| th.dot(&b.mapv(|z| z.conj())).dot(t) - b);
    }
    if let Some(p) = &s.p {
        let ph = adjoint(p);
        relation("P* h̄ P = -h", &|b| ph.dot(&b.mapv(|z| z.conj())).dot(p) + b);
    }
    if let Some(j) = &s.j {
        relation("J h J = -h", &|b| j.dot(b).dot(j) + b);
    }
    let pass = checks.iter().all(|c| c.violation <= tol);
    Ok(SymmetryReport { class: s.class, tol, checks, pass })
}

/// Same relations for a single on-site matrix `c` that is added as `λ ω_x c`
/// with real `ω_x`; used to vet disorder couplings.
pub(crate) fn coupling_violations(c: &Array2<C64>, s: &SymmetryData) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    if let Some(t) = &s.t {
        out.push(("T* c̄ T = c".into(), max_abs(&(adjoint(t).dot(&c.mapv(|z| z.conj())).dot(t) - c))));
    }
    if let Some(p) = &s.p {
        out.push(("P* c̄ P = -c".into(), max_abs(&(adjoint(p).dot(&c.mapv(|z| z.conj())).dot(p) + c))));
    }
    if let Some(j) = &s.j {
        out.push(("J c J = -c".into(), max_abs(&(j.dot(c).dot(j) + c))));
    }
    out.push(("c = c*".into(), max_abs(&(c - &adjoint(c)))));
    out
}
