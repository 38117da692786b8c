use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::block::BlockOperator;
use super::symmetry::{coupling_violations, SymmetryData};
use crate::error::{LabError, Result};

const COUPLING_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderDistribution {
    /// i.i.d. uniform on `[0, 1]`.
    #[default]
    Uniform,
    /// i.i.d. uniform on `[−½, ½]`.
    Centered,
    /// Explicit per-site values in pattern order.
    Values(Vec<f64>),
}

/// On-site disorder `λ Σ_x ω_x c ⊗ |x⟩⟨x|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub strength: f64,
    pub seed: u64,
    /// Independent sub-stream of `seed`; experiments use the sample number.
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub distribution: DisorderDistribution,
    /// On-site matrix `c` as `[re, im]` entries; identity when absent.
    #[serde(default)]
    pub coupling: Option<Vec<Vec<[f64; 2]>>>,
}

impl DisorderSpec {
    pub fn uniform(strength: f64, seed: u64, stream: u64) -> Self {
        Self { strength, seed, stream, distribution: DisorderDistribution::Uniform, coupling: None }
    }

    /// The realization `ω_x` for `n_sites` sites in pattern order.
    pub fn realize(&self, n_sites: usize) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        match &self.distribution {
            DisorderDistribution::Uniform => Ok((0..n_sites).map(|_| rng.random::<f64>()).collect()),
            DisorderDistribution::Centered => Ok((0..n_sites).map(|_| rng.random::<f64>() - 0.5).collect()),
            DisorderDistribution::Values(v) => {
                if v.len() != n_sites {
                    return Err(LabError::Dimension(format!("{} disorder values for {n_sites} sites", v.len())));
                }
                Ok(v.clone())
            }
        }
    }

    pub fn coupling_matrix(&self, n: usize) -> Result<Array2<C64>> {
        match &self.coupling {
            None => Ok(Array2::eye(n)),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(LabError::Dimension(format!("disorder coupling must be {n}×{n}")));
                }
                Ok(Array2::from_shape_fn((n, n), |(i, j)| C64::new(rows[i][j][0], rows[i][j][1])))
            }
        }
    }
}

/// Returns `h + λ Σ_x ω_x c ⊗ |x⟩⟨x|`. The coupling must respect every
/// relation of `sym`, otherwise the realization would leave the class.
/// At zero strength nothing is added and nothing is checked.
pub fn apply_disorder(h: &BlockOperator, spec: &DisorderSpec, sym: &SymmetryData) -> Result<BlockOperator> {
    if spec.strength == 0.0 {
        return Ok(h.clone());
    }
    let c = spec.coupling_matrix(h.fiber_dim())?;
    let bad: Vec<String> = coupling_violations(&c, sym)
        .into_iter()
        .filter(|(_, v)| *v > COUPLING_TOL)
        .map(|(name, v)| format!("{name} violated by {v:.3e}"))
        .collect();
    if !bad.is_empty() {
        return Err(LabError::Symmetry(format!("disorder coupling breaks class {}: {}", sym.class, bad.join("; "))));
    }
    let omega = spec.realize(h.pattern().len())?;
    let mut out = h.clone();
    for (x, w) in omega.into_iter().enumerate() {
        out.add_block(x, x, &(&c * C64::new(spec.strength * w, 0.0)))?;
    }
    Ok(out)
}
