use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::block::BlockOperator;
use super::pauli::{kron, sigma};
use super::symmetry::{standard_symmetry_ops, AzClass, SymmetryData};
use crate::error::{LabError, Result};
use crate::lattice::Pattern;

/// Model Hamiltonians. Shifts act as `S_j|x⟩ = |x + e_j⟩` and are truncated
/// at the window edge.
///
/// The class AII fiber is `ℂ²_orbital ⊗ ℂ²_TRS` with `T = 1₂ ⊗ iσ₂`, so
/// the TRS factor comes second and the mass term is `σ₃ ⊗ 1₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Two decoupled time-reversed copies of the Chern model, class AII.
    #[serde(rename = "aii_2d")]
    Aii2d { m: f64 },
    /// Two-band Chern model `sin`-hopping on `σ₁, σ₂` and mass on `σ₃`.
    #[serde(rename = "qwz_2d")]
    Qwz2d { m: f64 },
    /// Chiral chain with `h₀ = m − w S`.
    #[serde(rename = "ssh_1d")]
    Ssh1d {
        m: f64,
        #[serde(default = "unit_hopping")]
        w: f64,
    },
    /// Flat on-site Hamiltonian of the given class, trivial phase.
    TrivialReference {
        fiber: usize,
        #[serde(default)]
        class: Option<AzClass>,
    },
}

fn unit_hopping() -> f64 {
    1.0
}

impl ModelSpec {
    /// Builds a spec from a model name and positional parameters.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let arity = |want: &[usize]| {
            if want.contains(&params.len()) {
                Ok(())
            } else {
                Err(LabError::InvalidArgument(format!(
                    "model {name} takes {want:?} parameters, got {}",
                    params.len()
                )))
            }
        };
        match name {
            "aii_2d" => arity(&[1]).map(|_| ModelSpec::Aii2d { m: params[0] }),
            "qwz_2d" => arity(&[1]).map(|_| ModelSpec::Qwz2d { m: params[0] }),
            "ssh_1d" => arity(&[1, 2]).map(|_| ModelSpec::Ssh1d { m: params[0], w: params.get(1).copied().unwrap_or(1.0) }),
            "trivial_reference" => {
                arity(&[0, 1])?;
                let fiber = match params.first() {
                    None => 4,
                    Some(&f) if f >= 1.0 && f.fract() == 0.0 => f as usize,
                    Some(f) => return Err(LabError::InvalidArgument(format!("fiber must be a positive integer, got {f}"))),
                };
                Ok(ModelSpec::TrivialReference { fiber, class: None })
            }
            _ => Err(LabError::InvalidArgument(format!("unknown model {name:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Aii2d { .. } => "aii_2d",
            ModelSpec::Qwz2d { .. } => "qwz_2d",
            ModelSpec::Ssh1d { .. } => "ssh_1d",
            ModelSpec::TrivialReference { .. } => "trivial_reference",
        }
    }

    /// Spatial dimension the model requires, if fixed.
    pub fn spatial_dim(&self) -> Option<usize> {
        match self {
            ModelSpec::Aii2d { .. } | ModelSpec::Qwz2d { .. } => Some(2),
            ModelSpec::Ssh1d { .. } => Some(1),
            ModelSpec::TrivialReference { .. } => None,
        }
    }

    pub fn fiber_dim(&self) -> usize {
        match self {
            ModelSpec::Aii2d { .. } => 4,
            ModelSpec::Qwz2d { .. } | ModelSpec::Ssh1d { .. } => 2,
            ModelSpec::TrivialReference { fiber, .. } => *fiber,
        }
    }

    pub fn class(&self) -> AzClass {
        match self {
            ModelSpec::Aii2d { .. } => AzClass::AII,
            ModelSpec::Qwz2d { .. } => AzClass::A,
            ModelSpec::Ssh1d { .. } => AzClass::AIII,
            ModelSpec::TrivialReference { fiber, class } => class.unwrap_or(if *fiber % 4 == 0 {
                AzClass::AII
            } else {
                AzClass::A
            }),
        }
    }

    /// Same model with the mass parameter replaced, where there is one.
    pub fn with_mass(&self, m: f64) -> Self {
        match self {
            ModelSpec::Aii2d { .. } => ModelSpec::Aii2d { m },
            ModelSpec::Qwz2d { .. } => ModelSpec::Qwz2d { m },
            ModelSpec::Ssh1d { w, .. } => ModelSpec::Ssh1d { m, w: *w },
            t @ ModelSpec::TrivialReference { .. } => t.clone(),
        }
    }

    pub fn mass(&self) -> Option<f64> {
        match self {
            ModelSpec::Aii2d { m } | ModelSpec::Qwz2d { m } | ModelSpec::Ssh1d { m, .. } => Some(*m),
            ModelSpec::TrivialReference { .. } => None,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Aii2d { m } => write!(f, "aii_2d(m={m})"),
            ModelSpec::Qwz2d { m } => write!(f, "qwz_2d(m={m})"),
            ModelSpec::Ssh1d { m, w } => write!(f, "ssh_1d(m={m}, w={w})"),
            ModelSpec::TrivialReference { fiber, .. } => write!(f, "trivial_reference(n={fiber}, {})", self.class()),
        }
    }
}

/// Builds the model on `p` together with its standard symmetry operators.
pub fn build_model(spec: &ModelSpec, p: &Arc<Pattern>) -> Result<(BlockOperator, SymmetryData)> {
    if let Some(d) = spec.spatial_dim() {
        if p.dim() != d {
            return Err(LabError::Dimension(format!("{spec} needs d = {d}, pattern has d = {}", p.dim())));
        }
    }
    let n = spec.fiber_dim();
    let sym = standard_symmetry_ops(spec.class(), n)?;
    let mut h = BlockOperator::new(p.clone(), n);
    match spec {
        ModelSpec::Aii2d { m } => {
            let gammas = [kron(&sigma(1), &sigma(3)), kron(&sigma(2), &sigma(0))];
            wilson_dirac(&mut h, &gammas, &kron(&sigma(3), &sigma(0)), *m)?;
        }
        ModelSpec::Qwz2d { m } => {
            wilson_dirac(&mut h, &[sigma(1), sigma(2)], &sigma(3), *m)?;
        }
        ModelSpec::Ssh1d { m, w } => {
            // h = [[0, h₀*], [h₀, 0]] in the J grading
            let onsite = sigma(1) * C64::new(*m, 0.0);
            let mut hop = Array2::zeros((2, 2));
            hop[[1, 0]] = C64::new(-*w, 0.0);
            for x in 0..p.len() {
                h.add_block(x, x, &onsite)?;
                if let Some(y) = neighbor(p, x, 0) {
                    h.add_hopping(y, x, &hop)?;
                }
            }
        }
        ModelSpec::TrivialReference { fiber, .. } => {
            let onsite = trivial_onsite(*fiber, spec.class())?;
            for x in 0..p.len() {
                h.add_block(x, x, &onsite)?;
            }
        }
    }
    Ok((h, sym))
}

/// `Σ_j (S_j − S_j*)/(2i) Γ_j + (m − ½ Σ_j (S_j + S_j*)) Γ_M`.
fn wilson_dirac(h: &mut BlockOperator, gammas: &[Array2<C64>], mass: &Array2<C64>, m: f64) -> Result<()> {
    let p = h.pattern().clone();
    let onsite = mass * C64::new(m, 0.0);
    let hops: Vec<Array2<C64>> =
        gammas.iter().map(|g| g * C64::new(0.0, -0.5) - mass * C64::new(0.5, 0.0)).collect();
    for x in 0..p.len() {
        h.add_block(x, x, &onsite)?;
        for (j, hop) in hops.iter().enumerate() {
            if let Some(y) = neighbor(&p, x, j) {
                // ⟨x + e_j| h |x⟩
                h.add_hopping(y, x, hop)?;
            }
        }
    }
    Ok(())
}

fn neighbor(p: &Pattern, x: usize, axis: usize) -> Option<usize> {
    let mut c = p.site(x).to_vec();
    c[axis] += 1.0;
    p.index_of(&c)
}

/// On-site block of the trivial reference: the mass term of the class in
/// the standard fiber ordering.
pub fn trivial_onsite(n: usize, class: AzClass) -> Result<Array2<C64>> {
    let k = class.minimal_fiber();
    if n % k != 0 || n == 0 {
        return Err(LabError::InvalidArgument(format!("class {class} needs a fiber divisible by {k}, got {n}")));
    }
    if n % 4 != 0 && class == AzClass::AII {
        return Err(LabError::InvalidArgument("class AII reference needs a fiber divisible by 4".into()));
    }
    let id = |m: usize| Array2::<C64>::eye(m);
    let block = match class {
        AzClass::A | AzClass::AI => {
            if n % 2 == 0 {
                kron(&sigma(3), &id(n / 2))
            } else {
                id(n)
            }
        }
        // off-diagonal in the chiral grading: h₀ = 1
        AzClass::AIII => kron(&sigma(1), &id(n / 2)),
        AzClass::AII => kron(&kron(&id(n / 4), &sigma(3)), &id(2)),
        _ => {
            return Err(LabError::InvalidArgument(format!("no trivial reference implemented for class {class}")));
        }
    };
    Ok(block)
}
